"""Finite-control-set receding-horizon optimizer tracking a stored cycle.

Each solve minimizes the stage-cost sum plus a phase-indexed quadratic
terminal penalty over all input sequences of length N, subject to state
constraints on the interior of the horizon and (optionally) a
phase-indexed terminal-set membership. The search is an exact
depth-first branch-and-bound: ascending input order, accumulated stage
cost as lower bound, warm-started incumbents, lexicographic tie-break.
Partitioning the first tree level across threads returns bit-identical
results to the single-threaded search.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels as k_
from .errors import InfeasibleProblemError
from .geometry import Ellipsoid, Polytope
from .limit_cycle import LimitCycle
from .lyapunov import PeriodicTerminalCost, StageCost
from .model import SwitchedAffineSystem
from .tube import StateTube

MEMBER_TOL = 1e-9

_EMPTY_SEQ = np.empty(0, dtype=np.int64)
_NO_MATRIX = np.zeros((0, 0))
_NO_ROWS = np.zeros((0, 1))
_NO_VEC = np.zeros(0)


@dataclass(frozen=True)
class MpcConfig:
    """Everything the online optimizer needs, validated once."""

    sys: SwitchedAffineSystem
    cycle: LimitCycle
    N: int
    stage: StageCost
    terminal: PeriodicTerminalCost
    terminal_tube: StateTube | None = None
    use_terminal_set: bool = True
    state_constraints_on: bool = True

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("horizon must be >= 1")
        if self.terminal.p != self.cycle.p:
            raise ValueError("terminal cost period differs from the cycle period")
        if self.terminal_tube is not None and self.terminal_tube.p != self.cycle.p:
            raise ValueError("terminal tube period differs from the cycle period")
        n = self.sys.n_x
        if self.stage.Q.shape != (n, n):
            raise ValueError("Q dimension mismatch")
        if self.stage.R.shape != (self.sys.n_u, self.sys.n_u):
            raise ValueError("R dimension mismatch")
        if any(P.shape != (n, n) for P in self.terminal.P):
            raise ValueError("terminal matrix dimension mismatch")

    @property
    def terminal_set_active(self) -> bool:
        return self.use_terminal_set and self.terminal_tube is not None


@dataclass(frozen=True)
class MpcSolution:
    """Optimal sequence with its certificate data and solver statistics."""

    input_indices: tuple
    predicted_states: np.ndarray    # (N+1, n_x), empty when infeasible
    value: float
    nodes_expanded: int
    nodes_pruned: int
    feasible: bool

    def __post_init__(self):
        object.__setattr__(self, "input_indices",
                           tuple(int(i) for i in self.input_indices))
        a = np.asarray(self.predicted_states, dtype=float)
        a.flags.writeable = False
        object.__setattr__(self, "predicted_states", a)


def reference_at(cycle: LimitCycle, k: int, i: int):
    """(state reference, input-index reference) at prediction offset i from k."""
    return cycle.state_at(k + i), cycle.input_index_at(k + i)


def terminal_set_at(tube: StateTube, k: int, N: int):
    """The terminal set the horizon N must land in when solving at time k."""
    return tube.set_at(k + N)


def _search_arrays(config: MpcConfig, k: int):
    sys = config.sys
    N = config.N
    cycle = config.cycle
    A_s, b_s, _, _ = sys.stacked()
    U = sys.inputs.as_array()
    xbars = np.array([cycle.state_at(k + i) for i in range(N + 1)])
    R = config.stage.R
    r_table = np.empty((N, sys.num_inputs))
    for i in range(N):
        ubar = U[cycle.input_index_at(k + i)]
        for u in range(sys.num_inputs):
            du = U[u] - ubar
            r_table[i, u] = du @ R @ du
    X = sys.state_constraints
    if config.terminal_set_active:
        term = terminal_set_at(config.terminal_tube, k, N)
        if isinstance(term, Polytope):
            term_args = (k_.TERM_POLYTOPE, term.H, term.h, _NO_MATRIX, _NO_VEC)
        elif isinstance(term, Ellipsoid):
            term_args = (k_.TERM_ELLIPSOID, _NO_ROWS[:, :sys.n_x], _NO_VEC,
                         term.Z, term.center)
        else:  # pragma: no cover
            raise TypeError(f"unsupported terminal set type {type(term)!r}")
    else:
        term_args = (k_.TERM_NONE, _NO_ROWS[:, :sys.n_x], _NO_VEC, _NO_MATRIX, _NO_VEC)
    return (A_s, b_s, config.stage.Q, r_table, config.terminal.at(k + N),
            xbars, X.H, X.h, term_args)


def _as_warm(warm_start, N: int) -> np.ndarray:
    if warm_start is None:
        return _EMPTY_SEQ
    w = np.asarray(warm_start, dtype=np.int64)
    if w.shape != (N,):
        raise ValueError("warm start must be a full-horizon input sequence")
    return w


def solve(config: MpcConfig, x, k: int, threads: int = 1,
          warm_start=None) -> MpcSolution:
    """Exact optimizer over all N_s^N admissible sequences at time k.

    warm_start (optional, a full-horizon index sequence) only seeds the
    incumbent; the returned minimizer is independent of it, and of the
    thread count.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (config.sys.n_x,):
        raise ValueError("state dimension mismatch")
    N = config.N
    Ns = config.sys.num_inputs
    (A_s, b_s, Q, r_table, P_term, xbars, HX, hX, term_args) = _search_arrays(config, k)
    term_mode, Hterm, hterm, Zterm, cterm = term_args
    warm = _as_warm(warm_start, N)
    check_state = config.state_constraints_on

    def run(prefix: np.ndarray, warm_tail: np.ndarray):
        return k_.dfs_tracking(x, A_s, b_s, Q, r_table, P_term, xbars,
                               HX, hX, check_state,
                               term_mode, Hterm, hterm, Zterm, cterm,
                               N, prefix, warm_tail, MEMBER_TOL)

    if threads <= 1 or N == 1:
        value, found, seq, expanded, pruned = run(_EMPTY_SEQ, warm)
        results = [(value, found, seq, expanded, pruned)]
    else:
        jobs = []
        with ThreadPoolExecutor(max_workers=min(threads, Ns)) as pool:
            for u0 in range(Ns):
                prefix = np.array([u0], dtype=np.int64)
                tail = warm[1:] if warm.shape[0] == N and warm[0] == u0 else _EMPTY_SEQ
                jobs.append(pool.submit(run, prefix, tail))
            results = [j.result() for j in jobs]

    best = None
    expanded = 0
    pruned = 0
    for value, found, seq, exp, prn in results:
        expanded += exp
        pruned += prn
        if not found:
            continue
        key = (value, tuple(int(s) for s in seq))
        if best is None or key < best:
            best = key
    if best is None:
        return MpcSolution((), np.empty((0, config.sys.n_x)), np.inf,
                           expanded, pruned, False)
    value, seq = best
    states = np.empty((N + 1, config.sys.n_x))
    states[0] = x
    for i, u in enumerate(seq):
        states[i + 1] = A_s[u] @ states[i] + b_s[u]
    return MpcSolution(seq, states, float(value), expanded, pruned, True)


def evaluate_sequence(config: MpcConfig, x, k: int, sequence):
    """(value, feasible) of one fixed input sequence, same constraint tests."""
    x = np.asarray(x, dtype=float)
    N = config.N
    (A_s, b_s, Q, r_table, P_term, xbars, HX, hX, term_args) = _search_arrays(config, k)
    term_mode, Hterm, hterm, Zterm, cterm = term_args
    seq = np.asarray(sequence, dtype=np.int64)
    if seq.shape != (N,):
        raise ValueError("sequence length must equal the horizon")
    value, found, _, _, _ = k_.dfs_tracking(
        x, A_s, b_s, Q, r_table, P_term, xbars, HX, hX,
        config.state_constraints_on, term_mode, Hterm, hterm, Zterm, cterm,
        N, seq, _EMPTY_SEQ, MEMBER_TOL)
    return (float(value), bool(found))


def receding_horizon_law(config: MpcConfig, x, k: int, threads: int = 1,
                         warm_start=None) -> np.ndarray:
    """First element of the optimal sequence, mapped to its input vector."""
    sol = solve(config, x, k, threads=threads, warm_start=warm_start)
    if not sol.feasible:
        raise InfeasibleProblemError(
            f"no admissible input sequence from the given state at time {k}")
    return config.sys.inputs[sol.input_indices[0]]
