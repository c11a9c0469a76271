"""Reduced equations of motion for the paired 4-body and two-triangle 6-body ansatzes.

State vectors are float64 arrays ordered ``(r1, r2, theta, beta, dr1, dr2, dtheta, dbeta)``.
The first group has unit masses, the second group has mass ``m2`` per body and G = 1.

The ``_rhs*`` kernels are numba-compiled and share the calling convention used by
:mod:`pseudoperiodic.integrator`: ``status = rhs(y, params, floor, out)`` where a
non-zero status means the state is below the collision floor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

COLLISION_FLOOR = 1e-9

SQRT3 = math.sqrt(3.0)
_PI6 = math.pi / 6.0

# Phase of the first body of the second group relative to beta, and the spacing
# between bodies inside a group.
GROUP_OFFSET = {4: math.pi / 2.0, 6: math.pi / 3.0}
GROUP_SPACING = {4: math.pi, 6: 2.0 * math.pi / 3.0}


class CollisionError(ValueError):
    """Raised when a state lies below the collision floor."""


class ReducedState(NamedTuple):
    r1: float
    r2: float
    theta: float
    beta: float
    dr1: float = 0.0
    dr2: float = 0.0
    dtheta: float = 0.0
    dbeta: float = 0.0

    @property
    def delta(self) -> float:
        return self.theta - self.beta

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=np.float64)

    @classmethod
    def from_array(cls, y) -> "ReducedState":
        return cls(*(float(v) for v in y))


@dataclass(frozen=True)
class CartesianState:
    """Planar positions and velocities of all bodies, shape ``(n, 2)`` each."""

    masses: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    @property
    def n(self) -> int:
        return len(self.masses)

    def as_array(self) -> np.ndarray:
        """Flat layout ``(x1, y1, ..., xn, yn, vx1, vy1, ..., vxn, vyn)``."""
        return np.concatenate([self.positions.ravel(), self.velocities.ravel()])

    @classmethod
    def from_array(cls, y, masses) -> "CartesianState":
        masses = np.asarray(masses, dtype=np.float64)
        n = len(masses)
        y = np.asarray(y, dtype=np.float64)
        return cls(masses, y[: 2 * n].reshape(n, 2).copy(), y[2 * n :].reshape(n, 2).copy())


@dataclass(frozen=True)
class ConservedQuantities:
    L: float
    E: float
    K: float


def group_masses(n: int, m2: float) -> np.ndarray:
    half = n // 2
    return np.array([1.0] * half + [m2] * half, dtype=np.float64)


# ---------------------------------------------------------------------------
# closed forms


@numba.njit(cache=True)
def _distances4(r1, r2, delta):
    s = 2.0 * r1 * r2 * math.sin(delta)
    base = r1 * r1 + r2 * r2
    # max() guards against tiny negative round-off at exact collisions
    return math.sqrt(max(base - s, 0.0)), math.sqrt(max(base + s, 0.0))


@numba.njit(cache=True)
def _distances6(r1, r2, delta):
    base = r1 * r1 + r2 * r2
    two = 2.0 * r1 * r2
    d1 = math.sqrt(max(base - two * math.sin(_PI6 + delta), 0.0))
    d2 = math.sqrt(max(base + two * math.cos(delta), 0.0))
    d3 = math.sqrt(max(base - two * math.sin(_PI6 - delta), 0.0))
    return d1, d2, d3


@numba.njit(cache=True)
def _force_terms6(r1, r2, delta, d1, d2, d3):
    c1 = 1.0 / (d1 * d1 * d1)
    c2 = 1.0 / (d2 * d2 * d2)
    c3 = 1.0 / (d3 * d3 * d3)
    sp = math.sin(_PI6 + delta)
    sm = math.sin(_PI6 - delta)
    cp = math.cos(_PI6 + delta)
    cm = math.cos(_PI6 - delta)
    cd = math.cos(delta)
    sd = math.sin(delta)
    a1 = (-r1 + r2 * sp) * c1 + (-r1 - r2 * cd) * c2 + (-r1 + r2 * sm) * c3
    b1 = r2 * cp * c1 + r2 * sd * c2 - r2 * cm * c3
    a2 = (r1 * sp - r2) * c1 + (r1 * sm - r2) * c3 + (-r1 * cd - r2) * c2
    b2 = -r1 * cp * c1 + r1 * cm * c3 - r1 * sd * c2
    return a1, b1, a2, b2


def distances4(r1: float, r2: float, delta: float) -> tuple[float, float]:
    """Distances from body 1 to bodies 3 and 4 in the paired ansatz."""
    return _distances4(float(r1), float(r2), float(delta))


def distances6(r1: float, r2: float, delta: float) -> tuple[float, float, float]:
    """Distances from body 1 to bodies 4, 5 and 6 in the two-triangle ansatz."""
    return _distances6(float(r1), float(r2), float(delta))


def force_terms6(r1: float, r2: float, delta: float, d) -> tuple[float, float, float, float]:
    """Return ``(A1, B1, A2, B2)``, the cross-group force components.

    ``(A1, B1)`` is the radial/tangential pull of the second triangle on body 1
    (per unit ``m2``); ``(A2, B2)`` is the pull of the first triangle on body 4
    in body 4's radial/tangential frame.
    """
    d1, d2, d3 = (float(x) for x in d)
    if min(d1, d2, d3) <= 0.0:
        raise CollisionError(f"zero inter-group distance: d={d1, d2, d3}")
    return _force_terms6(float(r1), float(r2), float(delta), d1, d2, d3)


# ---------------------------------------------------------------------------
# right-hand sides


@numba.njit(cache=True)
def _rhs4(y, params, floor, out):
    m2 = params[0]
    r1, r2, th, be, dr1, dr2, dth, dbe = y[0], y[1], y[2], y[3], y[4], y[5], y[6], y[7]
    delta = th - be
    d1, d2 = _distances4(r1, r2, delta)
    if not (r1 >= floor and r2 >= floor and d1 >= floor and d2 >= floor):
        return 1
    c1 = 1.0 / (d1 * d1 * d1)
    c2 = 1.0 / (d2 * d2 * d2)
    sd = math.sin(delta)
    cd = math.cos(delta)
    out[0] = dr1
    out[1] = dr2
    out[2] = dth
    out[3] = dbe
    out[4] = r1 * dth * dth - 1.0 / (4.0 * r1 * r1) + m2 * ((r2 * sd - r1) * c1 + (-r2 * sd - r1) * c2)
    out[5] = r2 * dbe * dbe - m2 / (4.0 * r2 * r2) + ((r1 * sd - r2) * c1 + (-r1 * sd - r2) * c2)
    out[6] = (m2 * r2 * cd * (c1 - c2) - 2.0 * dr1 * dth) / r1
    out[7] = (r1 * cd * (c2 - c1) - 2.0 * dr2 * dbe) / r2
    return 0


@numba.njit(cache=True)
def _rhs6(y, params, floor, out):
    m2 = params[0]
    r1, r2, th, be, dr1, dr2, dth, dbe = y[0], y[1], y[2], y[3], y[4], y[5], y[6], y[7]
    delta = th - be
    d1, d2, d3 = _distances6(r1, r2, delta)
    if not (r1 >= floor and r2 >= floor and d1 >= floor and d2 >= floor and d3 >= floor):
        return 1
    a1, b1, a2, b2 = _force_terms6(r1, r2, delta, d1, d2, d3)
    out[0] = dr1
    out[1] = dr2
    out[2] = dth
    out[3] = dbe
    out[4] = r1 * dth * dth - 1.0 / (SQRT3 * r1 * r1) + m2 * a1
    out[5] = r2 * dbe * dbe + a2 - m2 / (SQRT3 * r2 * r2)
    out[6] = (m2 * b1 - 2.0 * dr1 * dth) / r1
    out[7] = (b2 - 2.0 * dr2 * dbe) / r2
    return 0


@numba.njit(cache=True)
def _cartesian_rhs(y, masses, floor, out):
    n = masses.shape[0]
    off = 2 * n
    for i in range(off):
        out[i] = y[off + i]
        out[off + i] = 0.0
    for i in range(n):
        xi = y[2 * i]
        yi = y[2 * i + 1]
        for j in range(i + 1, n):
            dx = y[2 * j] - xi
            dy = y[2 * j + 1] - yi
            r = math.sqrt(dx * dx + dy * dy)
            if not r >= floor:
                return 1
            inv3 = 1.0 / (r * r * r)
            out[off + 2 * i] += masses[j] * dx * inv3
            out[off + 2 * i + 1] += masses[j] * dy * inv3
            out[off + 2 * j] -= masses[i] * dx * inv3
            out[off + 2 * j + 1] -= masses[i] * dy * inv3
    return 0


REDUCED_RHS = {4: _rhs4, 6: _rhs6}


def _call(kernel, y, params, floor):
    y = np.ascontiguousarray(y, dtype=np.float64)
    out = np.empty_like(y)
    if kernel(y, np.asarray(params, dtype=np.float64), floor, out):
        raise CollisionError("state is below the collision floor")
    return out


def rhs4(s, m2: float, floor: float = COLLISION_FLOOR) -> np.ndarray:
    """Time derivative of a reduced 4-body state."""
    return _call(_rhs4, s, [m2], floor)


def rhs6(s, m2: float, floor: float = COLLISION_FLOOR) -> np.ndarray:
    """Time derivative of a reduced 6-body state."""
    return _call(_rhs6, s, [m2], floor)


def reduced_rhs(n: int):
    try:
        return REDUCED_RHS[n]
    except KeyError:
        raise ValueError(f"n must be 4 or 6, got {n!r}") from None


def cartesian_rhs(c: CartesianState, floor: float = COLLISION_FLOOR) -> CartesianState:
    """Newtonian pairwise gravity (G = 1); returns the derivative as a CartesianState."""
    dy = _call(_cartesian_rhs, c.as_array(), c.masses, floor)
    return CartesianState.from_array(dy, c.masses)


# ---------------------------------------------------------------------------
# embedding and invariants


def body_angles(s, n: int) -> np.ndarray:
    """Polar angle of every body, and which radius/rate group it belongs to."""
    s = ReducedState.from_array(s) if not isinstance(s, ReducedState) else s
    half = n // 2
    k = np.arange(half) * GROUP_SPACING[n]
    return np.concatenate([s.theta + k, s.beta + GROUP_OFFSET[n] + k])


def embed_cartesian(s, n: int, m2: float = 1.0) -> CartesianState:
    """Place all ``n`` bodies in the plane according to the ansatz."""
    if n not in GROUP_OFFSET:
        raise ValueError(f"n must be 4 or 6, got {n!r}")
    s = ReducedState.from_array(s) if not isinstance(s, ReducedState) else s
    half = n // 2
    phi = body_angles(s, n)
    r = np.repeat([s.r1, s.r2], half)
    dr = np.repeat([s.dr1, s.dr2], half)
    dphi = np.repeat([s.dtheta, s.dbeta], half)
    radial = np.column_stack([np.cos(phi), np.sin(phi)])
    tangential = np.column_stack([-np.sin(phi), np.cos(phi)])
    pos = r[:, None] * radial
    vel = dr[:, None] * radial + (r * dphi)[:, None] * tangential
    return CartesianState(group_masses(n, m2), pos, vel)


def conserved(s, m2: float, n: int) -> ConservedQuantities:
    """Angular momentum, energy and kinetic energy of a reduced state."""
    s = ReducedState.from_array(s) if not isinstance(s, ReducedState) else s
    r1, r2 = s.r1, s.r2
    k = n // 2
    L = k * r1 * r1 * s.dtheta + k * m2 * r2 * r2 * s.dbeta
    K = 0.5 * k * (s.dr1**2 + (r1 * s.dtheta) ** 2) + 0.5 * k * m2 * (s.dr2**2 + (r2 * s.dbeta) ** 2)
    if n == 6:
        d1, d2, d3 = distances6(r1, r2, s.delta)
        U = SQRT3 / r1 + SQRT3 * m2 * m2 / r2 + 3.0 * m2 * (1.0 / d1 + 1.0 / d2 + 1.0 / d3)
    elif n == 4:
        d1, d2 = distances4(r1, r2, s.delta)
        U = 1.0 / (2.0 * r1) + m2 * m2 / (2.0 * r2) + 2.0 * m2 * (1.0 / d1 + 1.0 / d2)
    else:
        raise ValueError(f"n must be 4 or 6, got {n!r}")
    return ConservedQuantities(L=float(L), E=float(K - U), K=float(K))


def cartesian_conserved(c: CartesianState) -> ConservedQuantities:
    """Angular momentum and energy from the standard N-body definitions."""
    m, p, v = c.masses, c.positions, c.velocities
    L = float(np.sum(m * (p[:, 0] * v[:, 1] - p[:, 1] * v[:, 0])))
    K = float(0.5 * np.sum(m * np.sum(v * v, axis=1)))
    U = 0.0
    for i in range(c.n):
        for j in range(i + 1, c.n):
            U += m[i] * m[j] / float(np.linalg.norm(p[i] - p[j]))
    return ConservedQuantities(L=L, E=K - U, K=K)
