"""N-step feasible-state sets for the tube-constrained controller.

The exact feasible set is a union of polytopes grown backward from the
terminal sets, one piece per (input, piece) pair and therefore
exponential in the horizon; it is kept exact here for desk-scale
problems. The tractable alternative outer-approximates each level with
the convex hull of the per-input one-step controllable sets, which costs
one hull and one preimage per input per level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .errors import EnumerationBudgetError, UnsupportedDimensionError
from .geometry import Polytope
from .model import SwitchedAffineSystem

EXACT_UNION = "exact_union"
OUTER_HULL = "outer_hull"

PIECE_BUDGET = 10 ** 5
MEMBER_TOL = 1e-9


@dataclass(frozen=True)
class FeasibleSetResult:
    """Per-level feasible sets: lists of pieces (exact) or one hull per level."""

    kind: str
    per_step: tuple    # per_step[i]: tuple of Polytope (exact) or Polytope (hull)
    N: int

    def __post_init__(self):
        if self.kind not in (EXACT_UNION, OUTER_HULL):
            raise ValueError(f"unknown feasible-set kind {self.kind!r}")
        object.__setattr__(self, "per_step", tuple(self.per_step))

    def sets_at(self, i: int):
        entry = self.per_step[i]
        return entry if self.kind == EXACT_UNION else (entry,)

    def contains(self, x, i: int | None = None, tol: float = MEMBER_TOL) -> bool:
        """Membership at level i (default: the full horizon), by piece scan."""
        x = np.asarray(x, dtype=float)
        level = self.N if i is None else i
        return any(P.contains_point(x, tol) for P in self.sets_at(level))

    def to_dict(self) -> dict:
        if self.kind == EXACT_UNION:
            steps = [[P.to_dict() for P in pieces] for pieces in self.per_step]
        else:
            steps = [P.to_dict() for P in self.per_step]
        return {"kind": self.kind, "N": self.N, "per_step": steps}

    @classmethod
    def from_dict(cls, d: dict) -> "FeasibleSetResult":
        if d["kind"] == EXACT_UNION:
            steps = tuple(tuple(Polytope.from_dict(p) for p in pieces)
                          for pieces in d["per_step"])
        else:
            steps = tuple(Polytope.from_dict(p) for p in d["per_step"])
        return cls(d["kind"], steps, int(d["N"]))


def one_step_controllable(sys: SwitchedAffineSystem, target: Polytope,
                          input_index: int) -> Polytope:
    """States in X that input_index drives into the target in one step.

    Exact H-rep: X intersected with the preimage of the target shifted by
    -b under A. May be empty; callers test with is_empty().
    """
    mode = sys.modes[input_index]
    shifted = geo.translate(target, -mode.b)
    return geo.intersect(geo.preimage(shifted, mode.A), sys.state_constraints)


def exact_feasible_union(sys: SwitchedAffineSystem, terminal_sets, N: int,
                         budget: int = PIECE_BUDGET) -> FeasibleSetResult:
    """Exact N-step feasible set as a growing union of polytopes.

    Level i+1 maps every retained piece through every input; empty pieces
    are pruned and set-equal duplicates merged (pairwise mutual
    containment, insertion order kept). Aborts with a budget error when
    the union would exceed `budget` pieces in total.
    """
    if N < 0:
        raise ValueError("horizon must be >= 0")
    level = [P for P in terminal_sets if not P.is_empty()]
    if not level:
        raise ValueError("all terminal sets are empty")
    per_step = [tuple(level)]
    total = len(level)
    for _ in range(N):
        new: list[Polytope] = []
        for u in range(sys.num_inputs):
            for piece in level:
                C = one_step_controllable(sys, piece, u)
                if C.is_empty():
                    continue
                if any(geo.set_equal(C, other) for other in new):
                    continue
                new.append(C)
        total += len(new)
        if total > budget:
            raise EnumerationBudgetError(
                f"exact feasible union exceeded {budget} pieces; "
                "use the outer-hull approximation instead")
        if not new:
            level = []
            per_step.append(tuple())
            continue
        level = new
        per_step.append(tuple(level))
    return FeasibleSetResult(EXACT_UNION, tuple(per_step), N)


def outer_hull_feasible(sys: SwitchedAffineSystem, terminal_sets,
                        N: int) -> FeasibleSetResult:
    """Convex outer approximation of the feasible set, planar systems only.

    Level 0 is the hull of the terminal-set union; each further level is
    the hull of the per-input one-step controllable sets of the previous
    hull. Soundness: every exact piece is contained in the corresponding
    hull, which is checked by the test-suite oracles rather than here.
    """
    if sys.n_x != 2:
        raise UnsupportedDimensionError(
            "the hull-based approximation needs planar dynamics")
    hull = geo.convex_hull_union_2d(list(terminal_sets))
    per_step = [hull]
    for _ in range(N):
        pieces = []
        for u in range(sys.num_inputs):
            C = one_step_controllable(sys, hull, u)
            if not C.is_empty():
                pieces.append(C)
        if not pieces:
            raise EnumerationBudgetError(
                "no input yields a nonempty one-step controllable set")
        hull = geo.convex_hull_union_2d(pieces)
        per_step.append(hull)
    return FeasibleSetResult(OUTER_HULL, tuple(per_step), N)


def convexity_gap(exact: FeasibleSetResult, hull: FeasibleSetResult,
                  level: int | None = None, samples: int = 4000,
                  seed: int = 0) -> float:
    """Fraction of hull samples outside the exact union (diagnostic only).

    Estimates how much the convex relaxation over-approximates at a given
    level by rejection-sampling the hull's bounding box.
    """
    i = (min(exact.N, hull.N) if level is None else level)
    hull_set = hull.per_step[i]
    V = geo.vertices_2d(hull_set)
    lo, hi = V.min(axis=0), V.max(axis=0)
    rng = np.random.default_rng(seed)
    in_hull = 0
    outside = 0
    while in_hull < samples:
        x = lo + rng.random(2) * (hi - lo)
        if not hull_set.contains_point(x):
            continue
        in_hull += 1
        if not exact.contains(x, i):
            outside += 1
    return outside / in_hull
