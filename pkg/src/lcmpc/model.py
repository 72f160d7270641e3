"""Discrete-time switched affine systems and exact ZOH discretization.

A system is a finite family of affine modes

    x+ = A_i x + b_i,      y = C_i x + d_i,

indexed by the elements of a finite control set: applying input i means
running mode i for one sample. Continuous-time descriptions are sampled
exactly with a zero-order hold via the augmented-matrix exponential, so
singular drift matrices (ubiquitous in converter circuits) need no
special casing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .geometry import Polytope


def _frozen(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FiniteInputSet:
    """Ordered finite control set; element i is the input vector at index i."""

    elements: tuple

    def __init__(self, elements):
        vecs = [np.atleast_1d(np.asarray(u, dtype=float)) for u in elements]
        if not vecs:
            raise ValueError("the control set must contain at least one element")
        n_u = vecs[0].shape[0]
        if any(v.shape != (n_u,) for v in vecs):
            raise ValueError("control-set elements have inconsistent dimension")
        for i in range(len(vecs)):
            for j in range(i + 1, len(vecs)):
                if np.array_equal(vecs[i], vecs[j]):
                    raise ValueError(f"duplicate control-set elements {i} and {j}")
        object.__setattr__(self, "elements", tuple(_frozen(v) for v in vecs))

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.elements[i]

    @property
    def size(self) -> int:
        return len(self.elements)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def as_array(self) -> np.ndarray:
        return np.array(self.elements)


@dataclass(frozen=True)
class Mode:
    """One affine mode: x+ = A x + b, y = C x + d."""

    A: np.ndarray
    b: np.ndarray
    C: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        d = np.asarray(self.d, dtype=float).ravel()
        n = A.shape[0]
        if A.shape != (n, n) or b.shape != (n,):
            raise ValueError("A must be square and b must match its size")
        if C.shape[1] != n or d.shape != (C.shape[0],):
            raise ValueError("output map dimensions are inconsistent")
        for name, arr in (("A", A), ("b", b), ("C", C), ("d", d)):
            object.__setattr__(self, name, _frozen(arr))


@dataclass(frozen=True)
class SwitchedAffineSystem:
    """Mode-indexed affine dynamics with a polytopic state constraint set."""

    modes: tuple
    inputs: FiniteInputSet
    state_constraints: Polytope

    def __post_init__(self):
        modes = tuple(self.modes)
        if len(modes) != self.inputs.size:
            raise ValueError("one mode per control-set element is required")
        n_x = modes[0].A.shape[0]
        n_y = modes[0].C.shape[0]
        for m in modes:
            if m.A.shape[0] != n_x or m.C.shape[0] != n_y:
                raise ValueError("modes have inconsistent dimensions")
        if self.state_constraints.dim != n_x:
            raise ValueError("state constraint dimension mismatch")
        if not self.state_constraints.has_interior():
            raise ValueError("state constraints must have a nonempty interior")
        if not self.state_constraints.is_bounded():
            raise ValueError("state constraints must be bounded")
        object.__setattr__(self, "modes", modes)

    @property
    def n_x(self) -> int:
        return self.modes[0].A.shape[0]

    @property
    def n_u(self) -> int:
        return self.inputs.dim

    @property
    def n_y(self) -> int:
        return self.modes[0].C.shape[0]

    @property
    def num_inputs(self) -> int:
        return self.inputs.size

    def A(self, i: int) -> np.ndarray:
        return self.modes[i].A

    def b(self, i: int) -> np.ndarray:
        return self.modes[i].b

    def stacked(self):
        """(A, b, C, d) stacked along a leading mode axis, for vectorized code."""
        return (np.array([m.A for m in self.modes]),
                np.array([m.b for m in self.modes]),
                np.array([m.C for m in self.modes]),
                np.array([m.d for m in self.modes]))


@dataclass(frozen=True)
class ContinuousSwitchedSystem:
    """Continuous-time switched affine modes driven by a constant source vector.

    Mode i is dx/dt = A_c x + B_c w, y = C_c x + D_c w with the constant
    exogenous input w shared by all modes.
    """

    modes_c: tuple
    omega: np.ndarray
    inputs: FiniteInputSet

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float).ravel()
        modes = []
        for (Ac, Bc, Cc, Dc) in self.modes_c:
            Ac = np.atleast_2d(np.asarray(Ac, dtype=float))
            Bc = np.atleast_2d(np.asarray(Bc, dtype=float))
            Cc = np.atleast_2d(np.asarray(Cc, dtype=float))
            Dc = np.atleast_2d(np.asarray(Dc, dtype=float))
            n = Ac.shape[0]
            if Ac.shape != (n, n) or Bc.shape[0] != n:
                raise ValueError("continuous mode matrices are inconsistent")
            if Bc.shape[1] != omega.shape[0] or Dc.shape[1] != omega.shape[0]:
                raise ValueError("source vector dimension does not match B/D columns")
            if Cc.shape[1] != n or Dc.shape[0] != Cc.shape[0]:
                raise ValueError("continuous output map is inconsistent")
            modes.append((_frozen(Ac), _frozen(Bc), _frozen(Cc), _frozen(Dc)))
        if len(modes) != self.inputs.size:
            raise ValueError("one continuous mode per control-set element is required")
        object.__setattr__(self, "modes_c", tuple(modes))
        object.__setattr__(self, "omega", _frozen(omega))


def step(sys: SwitchedAffineSystem, x, input_index: int):
    """One exact plant step; returns (x_next, y). No constraint checking."""
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n_x,):
        raise ValueError(f"state must have shape ({sys.n_x},)")
    if not 0 <= input_index < sys.num_inputs:
        raise ValueError(f"input index {input_index} out of range")
    m = sys.modes[input_index]
    return m.A @ x + m.b, m.C @ x + m.d


def discretize_zoh(csys: ContinuousSwitchedSystem, T_s: float,
                   state_constraints: Polytope) -> SwitchedAffineSystem:
    """Exact zero-order-hold sampling of every mode at period T_s.

    Uses exp([[A_c, b_c], [0, 0]] T_s) so that A = exp(A_c T_s) and
    b = (int_0^T_s exp(A_c s) ds) b_c come out in one call, with no
    inversion of A_c. The output map is unaffected by sampling: C is
    copied and d = D_c w.
    """
    if T_s <= 0.0:
        raise ValueError("sampling time must be positive")
    modes = []
    for (Ac, Bc, Cc, Dc) in csys.modes_c:
        n = Ac.shape[0]
        bc = Bc @ csys.omega
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = Ac
        M[:n, n] = bc
        E = expm(M * T_s)
        modes.append(Mode(E[:n, :n], E[:n, n], Cc, Dc @ csys.omega))
    return SwitchedAffineSystem(tuple(modes), csys.inputs, state_constraints)
