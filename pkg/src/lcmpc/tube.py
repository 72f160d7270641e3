"""Periodic invariant tubes for the cycle-following error dynamics.

In error coordinates z = x - xref(j) the terminal law gives the linear
p-periodic dynamics z(j+1) = A_j z(j) constrained to Zc_j, the state
constraints recentred at the cycle. A tube is a sequence of p sets, each
mapped into the next (cyclically) and contained in its Zc_j; translating
the sets back by the cycle states yields terminal sets for the
controller.

Two constructions are provided: a set recursion intersecting backward
reachable sets until a fixed point (polytopic, maximal), and ellipsoids
from either a max-volume conic program or sublevel sets of the periodic
terminal cost (self-contained fallback).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .errors import LcmpcError, NoTubeError, TubeNotConvergedError
from .geometry import Ellipsoid, Polytope
from .limit_cycle import LimitCycle
from .lyapunov import solve_periodic_lyapunov
from .model import SwitchedAffineSystem

MARGIN_TOL = 1e-8
DEFAULT_N_MAX = 500

ELLIPSOIDAL = "ellipsoidal"
POLYTOPIC = "polytopic"


@dataclass(frozen=True)
class ErrorTube:
    """p-periodic invariant tube in error coordinates."""

    kind: str
    sets: tuple                 # Polytope or Ellipsoid (origin-centred)
    constraint_sets: tuple      # the recentred state constraints Zc_j
    iterations: int = 0

    def __post_init__(self):
        if self.kind not in (ELLIPSOIDAL, POLYTOPIC):
            raise ValueError(f"unknown tube kind {self.kind!r}")
        object.__setattr__(self, "sets", tuple(self.sets))
        object.__setattr__(self, "constraint_sets", tuple(self.constraint_sets))

    @property
    def p(self) -> int:
        return len(self.sets)

    def to_dict(self) -> dict:
        return {"kind": self.kind,
                "sets": [s.to_dict() for s in self.sets],
                "constraint_sets": [s.to_dict() for s in self.constraint_sets],
                "iterations": self.iterations}

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorTube":
        mk = Ellipsoid.from_dict if d["kind"] == ELLIPSOIDAL else Polytope.from_dict
        return cls(d["kind"], tuple(mk(s) for s in d["sets"]),
                   tuple(Polytope.from_dict(s) for s in d["constraint_sets"]),
                   int(d.get("iterations", 0)))


@dataclass(frozen=True)
class StateTube:
    """The tube translated back to state space: one terminal set per phase."""

    kind: str
    sets: tuple

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(self.sets))

    @property
    def p(self) -> int:
        return len(self.sets)

    def set_at(self, k: int):
        return self.sets[k % self.p]

    def contains(self, x, k: int, tol: float = 1e-9) -> bool:
        return self.set_at(k).contains_point(x, tol)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sets": [s.to_dict() for s in self.sets]}

    @classmethod
    def from_dict(cls, d: dict) -> "StateTube":
        mk = Ellipsoid.from_dict if d["kind"] == ELLIPSOIDAL else Polytope.from_dict
        return cls(d["kind"], tuple(mk(s) for s in d["sets"]))


@dataclass(frozen=True)
class TubeReport:
    """Worst margins of the tube properties; all must clear -tol to pass.

    invariance_margin: polytopic tubes report the worst slack of the
    mapped set inside the successor (support values on normalized rows);
    ellipsoidal tubes report the most negative eigenvalue of
    Z_j - A_j' Z_{j+1} A_j. containment_margin is the worst slack of
    set j inside Zc_j, and origin_margin the worst clearance of the
    origin from any facet (interior certificate).
    """

    invariance_margin: float
    containment_margin: float
    origin_margin: float

    def passes(self, tol: float = MARGIN_TOL) -> bool:
        return (self.invariance_margin >= -tol
                and self.containment_margin >= -tol
                and self.origin_margin > 0.0)


def error_constraint_sets(sys: SwitchedAffineSystem, cycle: LimitCycle):
    """Zc_j: the state constraints recentred at each cycle state."""
    return tuple(geo.pontryagin_diff_point(sys.state_constraints, cycle.states[j])
                 for j in range(cycle.p))


def _cycle_transitions(sys, cycle):
    return [sys.A(i) for i in cycle.input_indices]


def polytopic_tube(sys: SwitchedAffineSystem, cycle: LimitCycle,
                   n_max: int = DEFAULT_N_MAX) -> ErrorTube:
    """Set recursion for a maximal polytopic periodic invariant tube.

    Sweeps phases backward: the new set at phase j is the backward
    reachable set of the successor phase (phase p-1 targets phase 0 from
    the previous sweep), intersected with the previous iterate, which
    makes the iteration monotonically shrinking. Terminates when a sweep
    is a set-equal fixed point; the result is then invariant and is
    re-verified before returning.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    p = cycle.p
    A_seq = _cycle_transitions(sys, cycle)
    Zc = error_constraint_sets(sys, cycle)
    current = list(Zc)
    for j, Z in enumerate(current):
        if not Z.has_interior():
            raise NoTubeError(f"recentred constraint set at phase {j} has no interior")

    iterations = 0
    converged = False
    for n in range(1, n_max + 1):
        previous = current
        current = [None] * p
        for j in range(p - 1, -1, -1):
            target = previous[0] if j == p - 1 else current[j + 1]
            pre = geo.preimage(target, A_seq[j])
            new = geo.intersect(pre, previous[j])
            if new.is_empty() or not new.has_interior():
                raise NoTubeError(
                    f"tube recursion lost interior at phase {j}, sweep {n}")
            if not geo.contains_polytope(previous[j], new):
                raise LcmpcError("tube recursion is not monotone")  # unreachable
            current[j] = new
        iterations = n
        if all(_rows_match(current[j], previous[j]) for j in range(p)):
            converged = True
            break

    if not converged and all(geo.set_equal(current[j], previous[j]) for j in range(p)):
        converged = True
    if not converged:
        raise TubeNotConvergedError(
            f"tube recursion did not converge within {n_max} sweeps",
            last_sets=tuple(current))

    tube = ErrorTube(POLYTOPIC, tuple(current), Zc, iterations)
    report = verify_tube(sys, cycle, tube)
    if not report.passes():
        raise NoTubeError(f"converged tube failed verification: {report}")
    return tube


def _rows_match(P: Polytope, Q: Polytope, tol: float = 1e-9) -> bool:
    """Cheap fixed-point test: identical canonicalized minimal H-reps."""
    if P.num_rows != Q.num_rows:
        return False
    ka = np.lexsort((P.h,) + tuple(P.H.T))
    kb = np.lexsort((Q.h,) + tuple(Q.H.T))
    return (np.allclose(P.H[ka], Q.H[kb], atol=tol)
            and np.allclose(P.h[ka], Q.h[kb], atol=tol))


def _normalized_to_unit_offsets(Z: Polytope, j: int):
    """Rescale (H, h) so every offset is 1; requires the origin strictly inside."""
    if np.any(Z.h <= 1e-9):
        raise NoTubeError(
            f"origin is not strictly inside the recentred constraints at phase {j}")
    return Z.H / Z.h[:, None]


def ellipsoidal_tube(sys: SwitchedAffineSystem, cycle: LimitCycle,
                     backend: str = "lyapunov", Q=None,
                     sdp_margin: float = 1e-6) -> ErrorTube:
    """Ellipsoidal periodic invariant tube, one ellipsoid per phase.

    backend="sdp" maximizes sum log det of the inverse shape matrices
    subject to the periodic-invariance Schur blocks and per-facet
    containment (requires cvxpy). backend="lyapunov" is the
    self-contained fallback: a common sublevel set of the periodic
    terminal cost, with the level chosen as the largest value keeping
    every phase inside its constraints; invariance is inherited from the
    terminal-cost decrease. Both results are verified before returning.
    """
    p = cycle.p
    A_seq = _cycle_transitions(sys, cycle)
    Zc = error_constraint_sets(sys, cycle)
    Hn = [_normalized_to_unit_offsets(Zc[j], j) for j in range(p)]

    if backend == "lyapunov":
        Qm = np.eye(sys.n_x) if Q is None else np.asarray(Q, dtype=float)
        terminal = solve_periodic_lyapunov(sys, cycle, Qm)
        level = np.inf
        for j in range(p):
            Pinv = np.linalg.inv(terminal.P[j])
            for row in Hn[j]:
                level = min(level, 1.0 / float(row @ Pinv @ row))
        if not np.isfinite(level) or level <= 0:
            raise NoTubeError("no positive sublevel set fits the constraints")
        sets = tuple(Ellipsoid(terminal.P[j] / level) for j in range(p))
    elif backend == "sdp":
        sets = _sdp_ellipsoids(A_seq, Hn, sdp_margin)
    else:
        raise ValueError(f"unknown ellipsoidal backend {backend!r}")

    tube = ErrorTube(ELLIPSOIDAL, sets, Zc)
    report = verify_tube(sys, cycle, tube)
    if not report.passes():
        raise NoTubeError(f"ellipsoidal tube failed verification: {report}")
    return tube


def _sdp_ellipsoids(A_seq, Hn, margin: float):
    try:
        import cvxpy as cp
    except ImportError as exc:  # pragma: no cover
        raise LcmpcError(
            "the sdp backend requires cvxpy; install the 'sdp' extra or "
            "use backend='lyapunov'") from exc
    p = len(A_seq)
    n = A_seq[0].shape[0]
    O = [cp.Variable((n, n), PSD=True) for _ in range(p)]
    constraints = []
    for j in range(p):
        Aj = A_seq[j]
        blk = cp.bmat([[O[j], O[j] @ Aj.T], [Aj @ O[j], O[(j + 1) % p]]])
        constraints.append(blk >> margin * np.eye(2 * n))
        for row in Hn[j]:
            constraints.append(cp.quad_form(row, O[j]) <= 1.0 - margin)
    problem = cp.Problem(cp.Maximize(sum(cp.log_det(Oj) for Oj in O)), constraints)
    for solver in ("CLARABEL", "SCS"):
        try:
            problem.solve(solver=solver)
        except (cp.SolverError, Exception):
            continue
        if problem.status in ("optimal", "optimal_inaccurate"):
            break
    if problem.status not in ("optimal", "optimal_inaccurate"):
        raise NoTubeError(f"max-volume conic program failed ({problem.status})")
    sets = []
    for j in range(p):
        Oval = 0.5 * (O[j].value + O[j].value.T)
        sets.append(Ellipsoid(np.linalg.inv(Oval)))
    return tuple(sets)


def log_det_objective(tube: ErrorTube) -> float:
    """sum_j log det(Z_j^-1); the volume objective both backends compare on."""
    if tube.kind != ELLIPSOIDAL:
        raise ValueError("objective is defined for ellipsoidal tubes")
    total = 0.0
    for E in tube.sets:
        sign, logdet = np.linalg.slogdet(np.linalg.inv(E.Z))
        total += float(sign) * float(logdet)
    return total


def lift_to_state(tube: ErrorTube, cycle: LimitCycle) -> StateTube:
    """Translate each tube set by its cycle state to get the terminal sets."""
    if tube.p != cycle.p:
        raise ValueError("tube and cycle periods differ")
    if tube.kind == POLYTOPIC:
        sets = tuple(geo.translate(tube.sets[j], cycle.states[j])
                     for j in range(tube.p))
    else:
        sets = tuple(Ellipsoid(tube.sets[j].Z, cycle.states[j])
                     for j in range(tube.p))
    return StateTube(tube.kind, sets)


def verify_tube(sys: SwitchedAffineSystem, cycle: LimitCycle,
                tube: ErrorTube) -> TubeReport:
    """Recompute the invariance/containment/interior margins of a tube.

    Polytopic sets in the plane are checked at their vertices (exact by
    convexity); other dimensions fall back to support LPs against the
    backward reachable set. Ellipsoids use the eigenvalue test for
    invariance and the support function for containment.
    """
    p = tube.p
    A_seq = _cycle_transitions(sys, cycle)
    inv_margin = np.inf
    con_margin = np.inf
    origin_margin = np.inf

    for j in range(p):
        succ = tube.sets[(j + 1) % p]
        cur = tube.sets[j]
        Zc = tube.constraint_sets[j]
        if tube.kind == POLYTOPIC:
            origin_margin = min(origin_margin, float(np.min(cur.h)))
            if cur.dim == 2:
                V = geo.vertices_2d(cur)
                mapped = V @ A_seq[j].T
                inv_margin = min(inv_margin, float(
                    np.min(succ.h[None, :] - mapped @ succ.H.T)))
                con_margin = min(con_margin, float(
                    np.min(Zc.h[None, :] - V @ Zc.H.T)))
            else:
                pre = geo.preimage(succ, A_seq[j])
                for i in range(pre.num_rows):
                    inv_margin = min(inv_margin,
                                     float(pre.h[i] - cur.support(pre.H[i])))
                for i in range(Zc.num_rows):
                    con_margin = min(con_margin,
                                     float(Zc.h[i] - cur.support(Zc.H[i])))
        else:
            Zj, Zn = cur.Z, succ.Z
            inv_margin = min(inv_margin, float(
                np.linalg.eigvalsh(Zj - A_seq[j].T @ Zn @ A_seq[j]).min()))
            Zinv = np.linalg.inv(Zj)
            for i in range(Zc.num_rows):
                s = float(Zc.H[i] @ Zinv @ Zc.H[i])
                con_margin = min(con_margin, float(Zc.h[i] - np.sqrt(max(s, 0.0))))
            origin_margin = min(origin_margin, 1.0)  # origin is the centre

    return TubeReport(inv_margin, con_margin, origin_margin)
