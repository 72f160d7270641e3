"""Halfspace-polytope calculus and ellipsoid containment tests.

Everything is H-representation based: a polytope is {x : Hx <= h} with
unit-norm rows, and all set predicates (emptiness, redundancy,
containment) reduce to small dense LPs. Vertex enumeration and hulls are
provided for the plane only, which is all the set-iteration algorithms
and plotting need; the pure H-rep operations work in any dimension.

Tolerances follow one convention: rows are normalized, LP feasibility is
resolved at 1e-9, and set comparisons use an absolute 1e-8 on the
normalized rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lp
from .errors import UnboundedPolytopeError, UnsupportedDimensionError

FEAS_TOL = 1e-9
SET_TOL = 1e-8


@dataclass(frozen=True)
class Polytope:
    """Convex polytope {x : Hx <= h}; rows are normalized on construction."""

    H: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        h = np.asarray(self.h, dtype=float).ravel()
        if H.shape[0] != h.shape[0]:
            raise ValueError("H and h row counts differ")
        norms = np.linalg.norm(H, axis=1)
        if np.any(norms < 1e-12):
            raise ValueError("polytope has an all-zero facet normal")
        H = H / norms[:, None]
        h = h / norms
        H.flags.writeable = False
        h.flags.writeable = False
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "h", h)

    @classmethod
    def box(cls, lower, upper) -> "Polytope":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if lower.shape != upper.shape or np.any(lower > upper):
            raise ValueError("invalid box bounds")
        n = lower.shape[0]
        return cls(np.vstack([np.eye(n), -np.eye(n)]),
                   np.concatenate([upper, -lower]))

    @property
    def dim(self) -> int:
        return self.H.shape[1]

    @property
    def num_rows(self) -> int:
        return self.H.shape[0]

    def chebyshev(self):
        """(center, radius) of the largest inscribed ball."""
        return lp.chebyshev_center(self.H, self.h)

    def is_empty(self, tol: float = FEAS_TOL) -> bool:
        _, r = self.chebyshev()
        return r < -tol

    def has_interior(self, tol: float = FEAS_TOL) -> bool:
        _, r = self.chebyshev()
        return r > tol

    def is_bounded(self) -> bool:
        for i in range(self.dim):
            for sign in (1.0, -1.0):
                d = np.zeros(self.dim)
                d[i] = sign
                if lp.support(d, self.H, self.h).status == lp.UNBOUNDED:
                    return False
        return True

    def contains_point(self, x, tol: float = FEAS_TOL) -> bool:
        return bool(np.all(self.H @ np.asarray(x, dtype=float) <= self.h + tol))

    def support(self, direction) -> float:
        res = lp.support(np.asarray(direction, dtype=float), self.H, self.h)
        if res.status == lp.UNBOUNDED:
            return np.inf
        if res.status == lp.INFEASIBLE:
            return -np.inf
        return res.value

    def to_dict(self) -> dict:
        return {"H": self.H.tolist(), "h": self.h.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Polytope":
        return cls(np.asarray(d["H"], dtype=float), np.asarray(d["h"], dtype=float))


@dataclass(frozen=True)
class Ellipsoid:
    """Ellipsoid {x : (x-center)' Z (x-center) <= 1} with Z positive definite."""

    Z: np.ndarray
    center: np.ndarray = None

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        n = Z.shape[0]
        center = (np.zeros(n) if self.center is None
                  else np.asarray(self.center, dtype=float))
        if Z.shape != (n, n) or center.shape != (n,):
            raise ValueError("inconsistent ellipsoid dimensions")
        if np.max(np.abs(Z - Z.T)) > 1e-10:
            raise ValueError("shape matrix is not symmetric")
        Z = 0.5 * (Z + Z.T)
        if np.linalg.eigvalsh(Z).min() <= 0.0:
            raise ValueError("shape matrix is not positive definite")
        Z.flags.writeable = False
        center.flags.writeable = False
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "center", center)

    @property
    def dim(self) -> int:
        return self.Z.shape[0]

    def contains_point(self, x, tol: float = FEAS_TOL) -> bool:
        d = np.asarray(x, dtype=float) - self.center
        return bool(d @ self.Z @ d <= 1.0 + tol)

    def support(self, direction) -> float:
        d = np.asarray(direction, dtype=float)
        return float(d @ self.center + np.sqrt(d @ np.linalg.solve(self.Z, d)))

    def to_dict(self) -> dict:
        return {"Z": self.Z.tolist(), "center": self.center.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Ellipsoid":
        return cls(np.asarray(d["Z"], dtype=float),
                   np.asarray(d["center"], dtype=float))


def translate(P: Polytope, v) -> Polytope:
    """Minkowski sum with the point v: {x : Hx <= h + Hv}."""
    v = np.asarray(v, dtype=float)
    return Polytope(P.H, P.h + P.H @ v)


def pontryagin_diff_point(P: Polytope, v) -> Polytope:
    """Pontryagin difference with the singleton {v}, i.e. translate by -v."""
    return translate(P, -np.asarray(v, dtype=float))


def preimage(P: Polytope, A) -> Polytope:
    """Exact preimage {z : Az in P} = {z : (HA)z <= h}.

    A may be singular, in which case the preimage is unbounded along
    null(A); rows of HA that vanish are dropped together with redundant
    constraints they represent (they are satisfiable iff h >= 0 there).
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (P.dim, P.dim):
        raise ValueError("preimage expects a square matrix matching the dimension")
    HA = P.H @ A
    norms = np.linalg.norm(HA, axis=1)
    zero = norms < 1e-12
    if np.any(zero) and np.any(P.h[zero] < -FEAS_TOL):
        # 0 <= h_i is violated: the preimage is empty; keep an explicit
        # infeasible certificate row
        n = P.dim
        e = np.zeros(n)
        e[0] = 1.0
        return Polytope(np.vstack([e, -e]), np.array([-1.0, -1.0]))
    if np.all(zero):
        raise ValueError("preimage is the whole space; not representable")
    return Polytope(HA[~zero], P.h[~zero])


def intersect(P: Polytope, Q: Polytope) -> Polytope:
    """Row-concatenation intersection, pruned to a minimal representation."""
    if P.dim != Q.dim:
        raise ValueError("dimension mismatch")
    raw = Polytope(np.vstack([P.H, Q.H]), np.concatenate([P.h, Q.h]))
    if raw.is_empty():
        return _dedup_rows(raw)
    return remove_redundancy(raw)


def _dedup_rows(P: Polytope, tol: float = 1e-12) -> Polytope:
    keep: list[int] = []
    for i in range(P.num_rows):
        dominated = False
        for j in keep:
            if (np.max(np.abs(P.H[i] - P.H[j])) <= tol
                    and P.h[i] >= P.h[j] - tol):
                dominated = True
                break
        if not dominated:
            keep.append(i)
    return Polytope(P.H[keep], P.h[keep])


def remove_redundancy(P: Polytope, tol: float = FEAS_TOL) -> Polytope:
    """Minimal H-representation by LP pruning.

    Row i is redundant iff max{H_i x} over the other rows plus the relaxed
    row H_i x <= h_i + 1 stays below h_i + tol. The relaxation keeps every
    test LP bounded, so facet deletion cannot spuriously unbound the test.
    """
    P = _dedup_rows(P)
    H, h = P.H, P.h
    keep = list(range(P.num_rows))
    i = 0
    while i < len(keep) and len(keep) > 1:
        row = keep[i]
        others = [r for r in keep if r != row]
        Ht = np.vstack([H[others], H[row][None, :]])
        ht = np.concatenate([h[others], [h[row] + 1.0]])
        res = lp.solve_lp(H[row], Ht, ht)
        if res.status == lp.UNBOUNDED:
            raise UnboundedPolytopeError("unbounded redundancy-test LP")
        if res.optimal and res.value <= h[row] + tol:
            keep.pop(i)
        else:
            i += 1
    return Polytope(H[keep], h[keep])


def contains_polytope(outer: Polytope, inner: Polytope,
                      tol: float = SET_TOL) -> bool:
    """True iff inner is a subset of outer, resolved by support LPs."""
    if outer.dim != inner.dim:
        raise ValueError("dimension mismatch")
    for i in range(outer.num_rows):
        res = lp.support(outer.H[i], inner.H, inner.h)
        if res.status == lp.UNBOUNDED:
            return False
        if res.status == lp.INFEASIBLE:
            return True  # inner empty
        if res.value > outer.h[i] + tol:
            return False
    return True


def set_equal(P: Polytope, Q: Polytope, tol: float = SET_TOL) -> bool:
    return contains_polytope(P, Q, tol) and contains_polytope(Q, P, tol)


def vertices_2d(P: Polytope, tol: float = 1e-7) -> np.ndarray:
    """Counterclockwise vertex cycle of a bounded planar polytope.

    All facet pairs are intersected and feasible intersection points are
    kept; this is quadratic in the row count, which is fine at the row
    counts LP pruning leaves behind.
    """
    if P.dim != 2:
        raise UnsupportedDimensionError("vertex enumeration only supports n=2")
    H, h = P.H, P.h
    m = P.num_rows
    pts = []
    for i in range(m):
        for j in range(i + 1, m):
            det = H[i, 0] * H[j, 1] - H[i, 1] * H[j, 0]
            if abs(det) < 1e-12:
                continue
            x = np.array([
                (h[i] * H[j, 1] - h[j] * H[i, 1]) / det,
                (H[i, 0] * h[j] - H[j, 0] * h[i]) / det,
            ])
            if np.all(H @ x <= h + tol):
                pts.append(x)
    if not pts:
        raise UnboundedPolytopeError("no vertices: polytope is empty or unbounded")
    V = np.array(pts)
    out: list[np.ndarray] = []
    for v in V:
        if not any(np.linalg.norm(v - w) <= tol for w in out):
            out.append(v)
    V = np.array(out)
    c = V.mean(axis=0)
    order = np.argsort(np.arctan2(V[:, 1] - c[1], V[:, 0] - c[0]))
    return V[order]


def _hull_ccw(points: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull, counterclockwise, collinear points dropped."""
    pts = sorted(map(tuple, points))
    if len(pts) < 3:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple] = []
    for pt in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], pt) <= 1e-14:
            lower.pop()
        lower.append(pt)
    upper: list[tuple] = []
    for pt in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], pt) <= 1e-14:
            upper.pop()
        upper.append(pt)
    return np.array(lower[:-1] + upper[:-1])


def hull_hrep_2d(points) -> Polytope:
    """H-representation of the convex hull of planar points."""
    V = _hull_ccw(np.asarray(points, dtype=float))
    if V.shape[0] < 3:
        raise UnboundedPolytopeError("hull is lower-dimensional")
    rows, offs = [], []
    k = V.shape[0]
    for i in range(k):
        a, b = V[i], V[(i + 1) % k]
        e = b - a
        normal = np.array([e[1], -e[0]])  # outward for a CCW cycle
        rows.append(normal)
        offs.append(normal @ a)
    return Polytope(np.array(rows), np.array(offs))


def convex_hull_union_2d(Ps) -> Polytope:
    """Convex hull of a union of bounded planar polytopes."""
    pool = []
    for P in Ps:
        pool.extend(vertices_2d(P))
    return hull_hrep_2d(np.array(pool))


def ellipsoid_in_polytope(E: Ellipsoid, P: Polytope,
                          tol: float = SET_TOL) -> bool:
    """Support-function containment: H_i c + sqrt(H_i Z^-1 H_i') <= h_i."""
    if E.dim != P.dim:
        raise ValueError("dimension mismatch")
    Zinv = np.linalg.inv(E.Z)
    for i in range(P.num_rows):
        val = P.H[i] @ E.center + np.sqrt(max(P.H[i] @ Zinv @ P.H[i], 0.0))
        if val > P.h[i] + tol:
            return False
    return True
