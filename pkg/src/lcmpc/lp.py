"""Small dense LP solver for halfspace-polytope queries.

Solves   max c.x  s.t.  H x <= h,  x free
with a two-phase tableau simplex. Every geometric predicate in this
package (emptiness, redundancy, containment, support functions) reduces
to LPs of this shape with n <= ~6 variables and m <= ~200 rows, a regime
where a dense tableau beats general-purpose solvers on per-call overhead.

Dantzig pricing with a deterministic tie-break; switches to Bland's rule
after a pivot budget so degenerate instances cannot cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LcmpcError

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a hard dep, kept soft for safety
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2

_TOL_COST = 1e-10
_TOL_PIVOT = 1e-10
_MAX_PIVOTS = 20000


@dataclass(frozen=True)
class LpResult:
    status: int
    x: np.ndarray | None
    value: float

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@njit(cache=True, nogil=True)
def _run_pivots(T, basis, n_enterable, bland_after):
    """Pivot until optimal/unbounded. Returns 0 optimal, 1 unbounded, 2 stalled."""
    m = T.shape[0] - 1
    pivots = 0
    while True:
        # entering column
        enter = -1
        if pivots < bland_after:
            best = -_TOL_COST
            for j in range(n_enterable):
                rc = T[m, j]
                if rc < best:
                    best = rc
                    enter = j
        else:  # Bland: first improving index
            for j in range(n_enterable):
                if T[m, j] < -_TOL_COST:
                    enter = j
                    break
        if enter < 0:
            return 0
        # ratio test (smallest ratio; ties -> smallest basic variable, Bland-safe)
        leave = -1
        best_ratio = np.inf
        for i in range(m):
            a = T[i, enter]
            if a > _TOL_PIVOT:
                ratio = T[i, -1] / a
                if ratio < best_ratio - 1e-12 or (
                    ratio < best_ratio + 1e-12
                    and (leave < 0 or basis[i] < basis[leave])
                ):
                    best_ratio = ratio
                    leave = i
        if leave < 0:
            return 1
        # pivot
        piv = T[leave, enter]
        T[leave] /= piv
        for i in range(T.shape[0]):
            if i != leave:
                f = T[i, enter]
                if f != 0.0:
                    T[i] -= f * T[leave]
        basis[leave] = enter
        pivots += 1
        if pivots > _MAX_PIVOTS:
            return 2


def _price_out(T, basis):
    m = T.shape[0] - 1
    for i in range(m):
        cj = T[m, basis[i]]
        if cj != 0.0:
            T[m] -= cj * T[i]


def solve_lp(c, H, h) -> LpResult:
    """Maximize c.x subject to H x <= h over free x."""
    c = np.asarray(c, dtype=float)
    H = np.asarray(H, dtype=float)
    h = np.asarray(h, dtype=float)
    if H.ndim != 2 or H.shape[0] != h.shape[0] or H.shape[1] != c.shape[0]:
        raise ValueError("inconsistent LP dimensions")
    m, n = H.shape
    if m == 0:
        if np.max(np.abs(c), initial=0.0) <= _TOL_COST:
            return LpResult(OPTIMAL, np.zeros(n), 0.0)
        return LpResult(UNBOUNDED, None, np.inf)

    # variables y = [u(n), w(n), s(m), artificials...] with x = u - w
    neg = h < 0.0
    n_art = int(np.count_nonzero(neg))
    nv = 2 * n + m
    A = np.zeros((m, nv + n_art))
    A[:, :n] = H
    A[:, n:2 * n] = -H
    A[np.arange(m), 2 * n + np.arange(m)] = 1.0
    b = h.copy()
    A[neg] *= -1.0
    b[neg] *= -1.0
    art_rows = np.flatnonzero(neg)
    A[art_rows, nv + np.arange(n_art)] = 1.0

    basis = np.empty(m, dtype=np.int64)
    basis[~neg] = 2 * n + np.flatnonzero(~neg)
    basis[neg] = nv + np.arange(n_art)

    T = np.zeros((m + 1, nv + n_art + 1))
    T[:m, :-1] = A
    T[:m, -1] = b

    bland_after = 50 * (m + n + 10)
    if n_art:
        # phase 1: minimize sum of artificials
        T[m, :] = 0.0
        T[m, nv:nv + n_art] = 1.0
        _price_out(T, basis)
        code = _run_pivots(T, basis, nv, bland_after)
        if code == 2:
            raise LcmpcError("simplex stalled in phase 1")
        if -T[m, -1] > 1e-7:
            return LpResult(INFEASIBLE, None, -np.inf)
        # drive any basic artificial out or drop its (redundant) row
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= nv:
                pivot_col = -1
                for j in range(nv):
                    if abs(T[i, j]) > _TOL_PIVOT:
                        pivot_col = j
                        break
                if pivot_col < 0:
                    keep[i] = False
                    continue
                piv = T[i, pivot_col]
                T[i] /= piv
                for r in range(T.shape[0]):
                    if r != i and T[r, pivot_col] != 0.0:
                        T[r] -= T[r, pivot_col] * T[i]
                basis[i] = pivot_col
        if not keep.all():
            rows = np.concatenate([np.flatnonzero(keep), [m]])
            T = T[rows]
            basis = basis[keep]
            m = basis.shape[0]
        T = T[:, list(range(nv)) + [-1]]

    # phase 2: minimize f.y with f = [-c, c, 0...]
    T[-1, :] = 0.0
    T[-1, :n] = -c
    T[-1, n:2 * n] = c
    _price_out(T, basis)
    code = _run_pivots(T, basis, nv, bland_after)
    if code == 2:
        raise LcmpcError("simplex stalled in phase 2")
    if code == 1:
        return LpResult(UNBOUNDED, None, np.inf)

    y = np.zeros(nv)
    mm = basis.shape[0]
    y[basis] = T[:mm, -1]
    x = y[:n] - y[n:2 * n]
    return LpResult(OPTIMAL, x, float(c @ x))


def support(direction, H, h) -> LpResult:
    """Support function max{d.x : Hx <= h} of a halfspace set."""
    return solve_lp(direction, H, h)


def chebyshev_center(H, h):
    """Largest-inscribed-ball center and radius for unit-norm rows of H.

    Returns (center, radius); radius < 0 means the set is empty, +inf means
    it is unbounded (a ball of any size fits).
    """
    H = np.asarray(H, dtype=float)
    h = np.asarray(h, dtype=float)
    m, n = H.shape
    Hr = np.hstack([H, np.ones((m, 1))])
    cr = np.zeros(n + 1)
    cr[-1] = 1.0
    res = solve_lp(cr, Hr, h)
    if res.status == UNBOUNDED:
        # either radius grows without bound or the center can drift; both
        # certify a nonempty interior
        return None, np.inf
    if res.status == INFEASIBLE:
        return None, -np.inf
    return res.x[:n], float(res.x[n])
