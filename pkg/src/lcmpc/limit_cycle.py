"""Periodic steady-state cycles of switched affine systems.

A length-p input sequence generates a unique p-periodic state cycle iff
the one-period state transition matrix has no eigenvalue at 1; the cycle
is then the solution of one block-banded linear system. The optimal
cycle for an output reference is found by exact enumeration over the
finite control set, deduplicated up to cyclic rotation.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EnumerationBudgetError, InfeasibleCycleError, NoUniqueCycleError
from .model import SwitchedAffineSystem

EXISTENCE_TOL = 1e-9
CONDITION_LIMIT = 1e12
ENUMERATION_BUDGET = 10 ** 7


@dataclass(frozen=True)
class LimitCycle:
    """p-periodic state/input/output cycle with its closure certificate."""

    input_indices: tuple
    states: np.ndarray       # (p, n_x)
    outputs: np.ndarray      # (p, n_y)
    closure_residual: float
    condition_number: float

    def __post_init__(self):
        object.__setattr__(self, "input_indices", tuple(int(i) for i in self.input_indices))
        for name in ("states", "outputs"):
            a = np.asarray(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def p(self) -> int:
        return len(self.input_indices)

    def state_at(self, k: int) -> np.ndarray:
        return self.states[k % self.p]

    def input_index_at(self, k: int) -> int:
        return self.input_indices[k % self.p]

    def to_dict(self) -> dict:
        return {
            "input_indices": list(self.input_indices),
            "states": self.states.tolist(),
            "outputs": self.outputs.tolist(),
            "closure_residual": self.closure_residual,
            "condition_number": self.condition_number,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LimitCycle":
        return cls(tuple(d["input_indices"]), np.asarray(d["states"], dtype=float),
                   np.asarray(d["outputs"], dtype=float),
                   float(d["closure_residual"]), float(d["condition_number"]))


@dataclass(frozen=True)
class CycleCostSpec:
    """Norm + output reference defining the steady-state synthesis cost.

    The cost of a cycle is ||(1/p) sum_j (y(j) - yref(j))|| in the chosen
    norm: the mean output error over one period, which cancels symmetric
    ripple by design. A reference of length q with q dividing p is
    replicated; a single vector means a constant reference.
    """

    reference: np.ndarray
    norm: object = 1

    def __post_init__(self):
        ref = np.asarray(self.reference, dtype=float)
        if ref.ndim == 1:
            ref = ref[None, :]
        if self.norm not in (1, 2, np.inf, "inf"):
            raise ValueError("norm must be 1, 2 or inf")
        ref.flags.writeable = False
        object.__setattr__(self, "reference", ref)

    def reference_for_period(self, p: int) -> np.ndarray:
        q = self.reference.shape[0]
        if p % q != 0:
            raise ValueError(f"reference length {q} does not divide the period {p}")
        return np.tile(self.reference, (p // q, 1))


def monodromy(sys: SwitchedAffineSystem, input_indices) -> np.ndarray:
    """One-period state transition matrix of the sequence.

    The sequence element at position 0 acts first, so the matrix is the
    right-to-left product A(i_{p-1}) ... A(i_0): it maps x(0) to x(p) and
    its eigenvalues decide both cycle existence and error-dynamics
    stability.
    """
    M = np.eye(sys.n_x)
    for idx in input_indices:
        M = sys.A(idx) @ M
    return M


def _cycle_matrix(sys, input_indices):
    p = len(input_indices)
    n = sys.n_x
    M = np.zeros((p * n, p * n))
    rhs = np.empty(p * n)
    for j, idx in enumerate(input_indices):
        M[j * n:(j + 1) * n, j * n:(j + 1) * n] += sys.A(idx)
        col = (j + 1) % p
        M[j * n:(j + 1) * n, col * n:(col + 1) * n] += -np.eye(n)
        rhs[j * n:(j + 1) * n] = -sys.b(idx)
    return M, rhs


def solve_cycle(sys: SwitchedAffineSystem, input_indices) -> LimitCycle:
    """Solve for the unique cycle generated by the given input sequence.

    Raises NoUniqueCycleError when the one-period transition matrix has an
    eigenvalue within 1e-9 of 1. An ill-conditioned cycle system
    (cond > 1e12) is reported via a warning and recorded on the result.
    """
    input_indices = [int(i) for i in input_indices]
    p = len(input_indices)
    if p < 1:
        raise ValueError("the input sequence must have length >= 1")
    for i in input_indices:
        if not 0 <= i < sys.num_inputs:
            raise ValueError(f"input index {i} out of range")

    eigs = np.linalg.eigvals(monodromy(sys, input_indices))
    if np.min(np.abs(eigs - 1.0)) < EXISTENCE_TOL:
        raise NoUniqueCycleError(
            "the input sequence admits no unique cycle: the one-period "
            "transition matrix has an eigenvalue at 1")

    M, rhs = _cycle_matrix(sys, input_indices)
    cond = float(np.linalg.cond(M))
    if cond > CONDITION_LIMIT:
        warnings.warn(f"cycle system is ill-conditioned (cond={cond:.2e})",
                      RuntimeWarning, stacklevel=2)
    states = np.linalg.solve(M, rhs).reshape(p, sys.n_x)

    # consistency: propagating the first state must reproduce the block solve
    scale = 1.0 + float(np.max(np.linalg.norm(states, axis=1)))
    x = states[0].copy()
    for j, idx in enumerate(input_indices):
        resid = np.linalg.norm(sys.A(idx) @ x + sys.b(idx) - states[(j + 1) % p])
        if resid > 1e-9 * scale:
            raise NoUniqueCycleError(
                f"cycle solve self-check failed at step {j} (residual {resid:.2e})")
        x = sys.A(idx) @ x + sys.b(idx)
    closure = float(np.linalg.norm(x - states[0]))

    outputs = np.array([sys.modes[idx].C @ states[j] + sys.modes[idx].d
                        for j, idx in enumerate(input_indices)])
    return LimitCycle(tuple(input_indices), states, outputs, closure, cond)


def cycle_cost(cycle: LimitCycle, spec: CycleCostSpec) -> float:
    """Chosen norm of the mean output error over one period."""
    ref = spec.reference_for_period(cycle.p)
    if ref.shape[1] != cycle.outputs.shape[1]:
        raise ValueError("reference output dimension mismatch")
    mean_err = (cycle.outputs - ref).mean(axis=0)
    order = np.inf if spec.norm == "inf" else spec.norm
    return float(np.linalg.norm(mean_err, ord=order))


def _is_canonical_rotation(seq) -> bool:
    p = len(seq)
    doubled = seq + seq
    for r in range(1, p):
        if doubled[r:r + p] < seq:
            return False
    return True


def synthesize_optimal_cycle(sys: SwitchedAffineSystem, p: int,
                             spec: CycleCostSpec, constraints_on: bool = True,
                             state_tol: float = 1e-9):
    """Exhaustive optimal-cycle search over all length-p input sequences.

    Rotations of a sequence generate phase-shifted copies of one cycle, so
    only the lexicographically smallest rotation of each class is solved.
    Sequences without a unique cycle are skipped; with constraints_on every
    cycle state must satisfy the state constraints (closed test at 1e-9).
    Returns (cycle, cost); ties keep the lexicographically smallest
    canonical sequence.
    """
    if p < 1:
        raise ValueError("period must be >= 1")
    if sys.num_inputs ** p > ENUMERATION_BUDGET:
        raise EnumerationBudgetError(
            f"{sys.num_inputs}^{p} sequences exceed the enumeration budget")
    X = sys.state_constraints
    best = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for seq in itertools.product(range(sys.num_inputs), repeat=p):
            if not _is_canonical_rotation(seq):
                continue
            try:
                cyc = solve_cycle(sys, seq)
            except NoUniqueCycleError:
                continue
            if constraints_on and not all(
                    np.all(X.H @ x <= X.h + state_tol) for x in cyc.states):
                continue
            cost = cycle_cost(cyc, spec)
            if best is None or cost < best[1]:
                best = (cyc, cost)
    if best is None:
        raise InfeasibleCycleError(
            f"no admissible period-{p} input sequence yields a feasible cycle")
    return best
