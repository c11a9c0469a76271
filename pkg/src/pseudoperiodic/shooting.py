"""Return-condition residuals and the sup-norm error functional.

A candidate ``Z = (x1, x2, x3, x4, m2, T)`` is integrated from
``r1 = x1, r2 = x2, theta = beta = 0, dr = 0, dtheta = x3, dbeta = x4`` to ``t = T``
and compared with its own initial data, the group phase condition and the
target angle ``theta1``.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

from . import dynamics
from .integrator import OK, FAILURE_REASONS, IntegratorConfig, _run, integrate_reduced

N_EQUATIONS = 8
RETURN_OFFSET = {4: math.pi, 6: 2.0 * math.pi / 3.0}
FAMILY_RANGE = {4: (math.pi / 6.0, 2.0 * math.pi), 6: (math.pi / 6.0, math.pi)}


class Unknowns(NamedTuple):
    x1: float
    x2: float
    x3: float
    x4: float
    m2: float
    T: float

    @property
    def admissible(self) -> bool:
        return all(math.isfinite(v) for v in self) and min(self.x1, self.x2, self.m2, self.T) > 0

    def initial_state(self) -> dynamics.ReducedState:
        return dynamics.ReducedState(self.x1, self.x2, 0.0, 0.0, 0.0, 0.0, self.x3, self.x4)


@dataclass(frozen=True)
class ReturnSpec:
    n: int
    theta1: float  # radians, unwrapped

    def __post_init__(self):
        if self.n not in RETURN_OFFSET:
            raise ValueError(f"n must be 4 or 6, got {self.n!r}")
        lo, hi = FAMILY_RANGE[self.n]
        if not lo - 1e-12 <= self.theta1 <= hi + 1e-12:
            warnings.warn(
                f"theta1={math.degrees(self.theta1):.6g} deg is outside the conjectured "
                f"n={self.n} family range [{math.degrees(lo):g}, {math.degrees(hi):g}] deg",
                stacklevel=2,
            )

    @property
    def offset(self) -> float:
        return RETURN_OFFSET[self.n]


@dataclass(frozen=True)
class Residual:
    h: np.ndarray | None
    evaluable: bool
    failure: str | None = None

    @property
    def err(self) -> float:
        return float(np.max(np.abs(self.h))) if self.evaluable else math.inf


def sup_norm_err(h) -> float:
    """Sup norm of a residual vector; ``None`` (not evaluable) maps to +inf."""
    if h is None:
        return math.inf
    return float(np.max(np.abs(np.asarray(h, dtype=float))))


def assemble(y_final, z, spec: ReturnSpec) -> np.ndarray:
    x1, x2, x3, x4 = z[0], z[1], z[2], z[3]
    y = y_final
    return np.array([
        y[0] - x1,
        y[1] - x2,
        y[4],
        y[5],
        y[6] - x3,
        y[7] - x4,
        y[2] - y[3] - spec.offset,
        y[2] - spec.theta1,
    ])


def residual(z, spec: ReturnSpec, cfg: IntegratorConfig = IntegratorConfig()) -> Residual:
    """Evaluate the 8 return conditions for candidate ``z``."""
    z = Unknowns(*(float(v) for v in z))
    if not z.admissible:
        return Residual(None, False, "inadmissible")
    out = integrate_reduced(z.initial_state().as_array(), z.m2, spec.n, z.T, cfg)
    if not out.completed:
        return Residual(None, False, out.failure)
    return Residual(assemble(out.final_state, z, spec), True)


def err(z, spec: ReturnSpec, cfg: IntegratorConfig = IntegratorConfig()) -> float:
    return residual(z, spec, cfg).err


# ---------------------------------------------------------------------------
# compiled batch path used by the solver


@numba.njit
def _err_one(rhs, z, offset, theta1, rk4, atol, rtol, h0, n_steps, max_steps, floor):
    x1, x2, x3, x4, m2, T = z[0], z[1], z[2], z[3], z[4], z[5]
    for v in z:
        if not math.isfinite(v):
            return math.inf
    if not (x1 > 0.0 and x2 > 0.0 and m2 > 0.0 and T > 0.0):
        return math.inf
    y0 = np.array([x1, x2, 0.0, 0.0, 0.0, 0.0, x3, x4])
    params = np.array([m2])
    h = T / n_steps if (rk4 and n_steps > 0) else h0
    status, y, t, steps = _run(rhs, y0, params, T, rk4, atol, rtol, h, max_steps, floor)
    if status != OK:
        return math.inf
    e = abs(y[0] - x1)
    e = max(e, abs(y[1] - x2))
    e = max(e, abs(y[4]))
    e = max(e, abs(y[5]))
    e = max(e, abs(y[6] - x3))
    e = max(e, abs(y[7] - x4))
    e = max(e, abs(y[2] - y[3] - offset))
    e = max(e, abs(y[2] - theta1))
    return e


@numba.njit
def _err_batch(rhs, zs, offset, theta1, rk4, atol, rtol, h0, n_steps, max_steps, floor):
    out = np.empty(zs.shape[0])
    for j in range(zs.shape[0]):
        out[j] = _err_one(rhs, zs[j], offset, theta1, rk4, atol, rtol, h0, n_steps, max_steps, floor)
    return out


class ErrObjective:
    """The error functional for one ``(spec, cfg)``, callable on one candidate or a batch.

    ``batch`` evaluates rows independently, so its results match repeated
    scalar calls bit for bit.
    """

    def __init__(self, spec: ReturnSpec, cfg: IntegratorConfig = IntegratorConfig()):
        self.spec = spec
        self.cfg = cfg
        self._rhs = dynamics.reduced_rhs(spec.n)

    def _args(self):
        c = self.cfg
        rk4 = c.method == "rk4"
        h0 = c.step if c.step is not None else 0.0
        n_steps = c.n_steps if (rk4 and c.n_steps is not None) else 0
        return (self.spec.offset, self.spec.theta1, rk4, c.abs_tol, c.rel_tol, float(h0),
                n_steps, c.max_steps, c.collision_floor)

    def batch(self, zs) -> np.ndarray:
        zs = np.ascontiguousarray(np.atleast_2d(zs), dtype=np.float64)
        return _err_batch(self._rhs, zs, *self._args())

    def __call__(self, z) -> float:
        return float(self.batch(np.asarray(z, dtype=np.float64)[None, :])[0])


# ---------------------------------------------------------------------------
# relabeling periodicity


@dataclass(frozen=True)
class PeriodicityReport:
    max_mismatch: float
    permutation: tuple[int, ...]  # 0-based: body ``permutation[i]`` at T plays body ``i`` at 0

    def labels(self) -> tuple[int, ...]:
        return tuple(p + 1 for p in self.permutation)


def _rotate(xy: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return xy @ np.array([[c, s], [-s, c]])


def group_permutations(n: int):
    half = n // 2
    first = list(range(half))
    second = list(range(half, n))
    for a in itertools.permutations(first):
        for b in itertools.permutations(second):
            yield a + b


def periodicity_check(z, spec: ReturnSpec, cfg: IntegratorConfig = IntegratorConfig()) -> PeriodicityReport:
    """Rotate the final configuration by ``-theta(T)`` and find the best within-group relabeling."""
    z = Unknowns(*(float(v) for v in z))
    out = integrate_reduced(z.initial_state().as_array(), z.m2, spec.n, z.T, cfg)
    if not out.completed:
        raise ValueError(f"residual not evaluable: {out.failure}")
    start = dynamics.embed_cartesian(z.initial_state(), spec.n, z.m2)
    end = dynamics.embed_cartesian(out.final_state, spec.n, z.m2)
    theta_T = out.final_state[2]
    pos = _rotate(end.positions, -theta_T)
    vel = _rotate(end.velocities, -theta_T)
    best = (math.inf, ())
    for perm in group_permutations(spec.n):
        idx = list(perm)
        mis = max(np.max(np.abs(pos[idx] - start.positions)), np.max(np.abs(vel[idx] - start.velocities)))
        if mis < best[0]:
            best = (float(mis), perm)
    return PeriodicityReport(*best)


__all__ = [
    "Unknowns", "ReturnSpec", "Residual", "ErrObjective", "PeriodicityReport",
    "residual", "err", "sup_norm_err", "periodicity_check", "FAILURE_REASONS",
]
