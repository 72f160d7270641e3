"""Periodic quadratic terminal costs for the cycle-following terminal law.

Along the cycle the closed-loop error obeys z(j+1) = A(u(j)) z(j), a
linear p-periodic system. A family of matrices with

    A_j' P_{j+1 mod p} A_j - P_j + Q <= 0,      P_j > 0,

certifies a one-step decrease of the terminal cost by the full state
stage cost. Solving the EQUALITY version (a periodic discrete Lyapunov
equation) always produces such a family when the one-period transition
matrix is Schur, and needs nothing beyond a Kronecker linear solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotStabilizingError
from .limit_cycle import LimitCycle, monodromy
from .model import SwitchedAffineSystem

POS_DEF_TOL = 1e-9
LMI_TOL = 1e-7


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class StageCost:
    """Quadratic stage cost ||x - xref||^2_Q + ||u - uref||^2_R."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = _sym(np.atleast_2d(np.asarray(self.Q, dtype=float)))
        R = _sym(np.atleast_2d(np.asarray(self.R, dtype=float)))
        if np.linalg.eigvalsh(Q).min() <= 0 or np.linalg.eigvalsh(R).min() <= 0:
            raise ValueError("Q and R must be positive definite")
        Q.flags.writeable = False
        R.flags.writeable = False
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)


@dataclass(frozen=True)
class PeriodicTerminalCost:
    """The p terminal weighting matrices with their decrease-LMI residuals.

    residuals[j] is the most negative eigenvalue of
    P_j - A_j' P_{j+1 mod p} A_j - Q; nonnegative (to tolerance) means the
    certificate holds at phase j.
    """

    P: tuple
    residuals: tuple

    def __post_init__(self):
        mats = tuple(np.asarray(P, dtype=float) for P in self.P)
        for P in mats:
            if np.linalg.eigvalsh(P).min() <= POS_DEF_TOL:
                raise ValueError("terminal weighting matrices must be positive definite")
            P.flags.writeable = False
        res = tuple(float(r) for r in self.residuals)
        if len(res) != len(mats):
            raise ValueError("one residual per matrix is required")
        if min(res) < -LMI_TOL:
            raise ValueError(
                f"decrease LMI violated (worst residual {min(res):.2e})")
        object.__setattr__(self, "P", mats)
        object.__setattr__(self, "residuals", res)

    @property
    def p(self) -> int:
        return len(self.P)

    def at(self, k: int) -> np.ndarray:
        return self.P[k % self.p]

    def to_dict(self) -> dict:
        return {"P": [P.tolist() for P in self.P], "residuals": list(self.residuals)}

    @classmethod
    def from_dict(cls, d: dict) -> "PeriodicTerminalCost":
        return cls(tuple(np.asarray(P, dtype=float) for P in d["P"]),
                   tuple(d["residuals"]))


@dataclass(frozen=True)
class TerminalCostReport:
    """Raw verification numbers for a candidate matrix family."""

    min_eigenvalues: tuple    # of P_j
    residuals: tuple          # min eig of P_j - A_j' P_{j+1} A_j - Q

    def passes(self, tol: float = LMI_TOL) -> bool:
        return (min(self.min_eigenvalues) > POS_DEF_TOL
                and min(self.residuals) >= -tol)


def _cycle_transitions(sys: SwitchedAffineSystem, cycle: LimitCycle):
    return [sys.A(i) for i in cycle.input_indices]


def solve_periodic_lyapunov(sys: SwitchedAffineSystem, cycle: LimitCycle,
                            Q) -> PeriodicTerminalCost:
    """Equality solution of the periodic decrease condition.

    Backward substitution over one period reduces the p coupled equations
    to a single discrete Lyapunov equation P_0 = Psi' P_0 Psi + Qacc with
    Psi the one-period transition matrix, solved by Kronecker
    vectorization (n_x^2 unknowns); the remaining matrices follow by
    backward propagation. The result satisfies the inequality version with
    residual ~0, hence is a valid certificate.
    """
    Q = _sym(np.atleast_2d(np.asarray(Q, dtype=float)))
    n = sys.n_x
    if Q.shape != (n, n) or np.linalg.eigvalsh(Q).min() <= 0:
        raise ValueError("Q must be positive definite with state dimension")

    A_seq = _cycle_transitions(sys, cycle)
    p = cycle.p
    rho = float(np.max(np.abs(np.linalg.eigvals(monodromy(sys, cycle.input_indices)))))
    if rho >= 1.0 - 1e-9:
        raise NotStabilizingError(
            f"one-period transition matrix is not Schur (spectral radius {rho:.6f}); "
            "the cycle-following terminal law cannot certify decrease")

    # accumulate Psi = A_{p-1}...A_0 and Qacc = sum Phi_j' Q Phi_j
    Phi = np.eye(n)
    Qacc = np.zeros((n, n))
    for j in range(p):
        Qacc += Phi.T @ Q @ Phi
        Phi = A_seq[j] @ Phi
    K = np.eye(n * n) - np.kron(Phi.T, Phi.T)
    vecP0 = np.linalg.solve(K, Qacc.reshape(-1, order="F"))
    P0 = _sym(vecP0.reshape(n, n, order="F"))

    P = [None] * p
    P[0] = P0
    for j in range(p - 1, 0, -1):
        P[j] = _sym(A_seq[j].T @ P[(j + 1) % p] @ A_seq[j] + Q)

    residuals = tuple(
        float(np.linalg.eigvalsh(
            P[j] - A_seq[j].T @ P[(j + 1) % p] @ A_seq[j] - Q).min())
        for j in range(p))
    return PeriodicTerminalCost(tuple(P), residuals)


def verify_terminal_cost(sys: SwitchedAffineSystem, cycle: LimitCycle, Q,
                         P_list) -> TerminalCostReport:
    """Eigenvalue report for an externally supplied matrix family."""
    Q = _sym(np.atleast_2d(np.asarray(Q, dtype=float)))
    mats = [np.asarray(P, dtype=float) for P in P_list]
    if len(mats) != cycle.p:
        raise ValueError("one matrix per cycle phase is required")
    A_seq = _cycle_transitions(sys, cycle)
    p = cycle.p
    min_eigs = tuple(float(np.linalg.eigvalsh(P).min()) for P in mats)
    residuals = tuple(
        float(np.linalg.eigvalsh(
            mats[j] - A_seq[j].T @ mats[(j + 1) % p] @ A_seq[j] - Q).min())
        for j in range(p))
    return TerminalCostReport(min_eigs, residuals)


def terminal_cost_value(terminal, k_plus_N: int, x_err) -> float:
    """Terminal penalty x_err' P[(k+N) mod p] x_err."""
    if isinstance(terminal, PeriodicTerminalCost):
        P = terminal.at(k_plus_N)
    else:
        P = terminal[k_plus_N % len(terminal)]
    x_err = np.asarray(x_err, dtype=float)
    return float(x_err @ P @ x_err)
