"""Deterministic explicit Runge-Kutta integration with failure reporting.

Right-hand sides follow the kernel convention ``status = rhs(y, params, floor, out)``
(see :mod:`pseudoperiodic.dynamics`). Plain Python callables are
compiled with numba on first use, so they must stick to the numba-supported subset.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Literal

import numba
import numpy as np
from numba.core.registry import CPUDispatcher

from . import dynamics

OK, COLLISION, NON_FINITE, STEP_BUDGET = 0, 1, 2, 3
FAILURE_REASONS = {COLLISION: "collision", NON_FINITE: "non-finite", STEP_BUDGET: "step-budget"}

# Dormand-Prince 5(4) tableau
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0,
)

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0
_EPS = 2.220446049250313e-16


@dataclass(frozen=True)
class IntegratorConfig:
    method: Literal["dopri5", "rk4"] = "dopri5"
    step: float | None = None  # fixed step (rk4) or initial step (dopri5); None = automatic
    n_steps: int | None = None  # rk4 only: step = T / n_steps
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_steps: int = 10_000_000
    collision_floor: float = dynamics.COLLISION_FLOOR

    def __post_init__(self):
        if self.method not in ("dopri5", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.step is not None and not self.step > 0:
            raise ValueError("step must be > 0")
        if self.n_steps is not None and self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.method == "rk4" and self.step is None and self.n_steps is None:
            raise ValueError("rk4 needs step or n_steps")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be > 0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    def fixed_step(self, T: float) -> float:
        return T / self.n_steps if self.n_steps is not None else self.step

    def to_dict(self) -> dict[str, Any]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class IntegrationOutcome:
    status: Literal["completed", "failed"]
    final_state: np.ndarray | None = None
    failure: str | None = None
    failure_time: float | None = None
    steps_taken: int = 0

    @property
    def completed(self) -> bool:
        return self.status == "completed"


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (k, dim)
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# stepping cores


@numba.njit
def _finite(y):
    for v in y:
        if not math.isfinite(v):
            return False
    return True


@numba.njit
def _rms_err(y, ynew, e, atol, rtol):
    acc = 0.0
    for i in range(y.shape[0]):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        q = e[i] / sc
        acc += q * q
    return math.sqrt(acc / y.shape[0])


@numba.njit
def _initial_step(rhs, y0, f0, params, floor, T, atol, rtol):
    dim = y0.shape[0]
    d0 = 0.0
    d1 = 0.0
    for i in range(dim):
        sc = atol + rtol * abs(y0[i])
        d0 += (y0[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = math.sqrt(d0 / dim)
    d1 = math.sqrt(d1 / dim)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, T)
    y1 = y0 + h0 * f0
    f1 = np.empty(dim)
    if rhs(y1, params, floor, f1) != 0:
        return h0 * 1e-3
    d2 = 0.0
    for i in range(dim):
        sc = atol + rtol * abs(y0[i])
        d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = math.sqrt(d2 / dim) / h0
    big = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if big <= 1e-15 else (0.01 / big) ** 0.2
    return min(100.0 * h0, h1, T)


@numba.njit
def _dopri5(rhs, y0, params, T, atol, rtol, h_init, max_steps, floor):
    """Returns ``(status, y, t, accepted_steps)``; ``t`` is the failure time on failure."""
    dim = y0.shape[0]
    y = y0.copy()
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    k5 = np.empty(dim)
    k6 = np.empty(dim)
    k7 = np.empty(dim)
    ys = np.empty(dim)
    ynew = np.empty(dim)
    err = np.empty(dim)
    t = 0.0
    if rhs(y, params, floor, k1) != 0:
        return COLLISION, y, t, 0
    if not _finite(k1):
        return NON_FINITE, y, t, 0
    h = h_init if h_init > 0.0 else _initial_step(rhs, y, k1, params, floor, T, atol, rtol)
    accepted = 0
    attempts = 0
    rejected = False
    nonfinite = False  # whether the latest rejection came from a non-finite error estimate
    while t < T:
        if attempts >= max_steps:
            return STEP_BUDGET, y, t, accepted
        attempts += 1
        if h <= 16.0 * _EPS * max(abs(t), 1.0):
            # the step collapsed: for gravitational flows this is a collision singularity
            return (NON_FINITE if nonfinite else COLLISION), y, t, accepted
        last = False
        if t + h >= T or T - (t + h) <= 16.0 * _EPS * T:
            h = T - t
            last = True
        for i in range(dim):
            ys[i] = y[i] + h * _A21 * k1[i]
        s = rhs(ys, params, floor, k2)
        if s == 0:
            for i in range(dim):
                ys[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
            s = rhs(ys, params, floor, k3)
        if s == 0:
            for i in range(dim):
                ys[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
            s = rhs(ys, params, floor, k4)
        if s == 0:
            for i in range(dim):
                ys[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
            s = rhs(ys, params, floor, k5)
        if s == 0:
            for i in range(dim):
                ys[i] = y[i] + h * (
                    _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
                )
            s = rhs(ys, params, floor, k6)
        if s == 0:
            for i in range(dim):
                ynew[i] = y[i] + h * (
                    _B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i]
                )
            s = rhs(ynew, params, floor, k7)
        if s != 0:
            # a stage left the domain: retry with a smaller step
            nonfinite = False
            h *= 0.25
            rejected = True
            continue
        for i in range(dim):
            err[i] = h * (
                _E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i]
            )
        en = _rms_err(y, ynew, err, atol, rtol)
        if not math.isfinite(en):
            nonfinite = True
            h *= 0.25
            rejected = True
            continue
        if en <= 1.0:
            t = T if last else t + h
            for i in range(dim):
                y[i] = ynew[i]
                k1[i] = k7[i]
            accepted += 1
            if en == 0.0:
                fac = _FAC_MAX
            else:
                fac = min(_FAC_MAX, max(_FAC_MIN, _SAFETY * en ** -0.2))
            if rejected:
                fac = min(fac, 1.0)
            rejected = False
            nonfinite = False
            h *= fac
        else:
            h *= max(_FAC_MIN, _SAFETY * en ** -0.2)
            rejected = True
            nonfinite = False
    return OK, y, t, accepted


@numba.njit
def _rk4(rhs, y0, params, T, h, max_steps, floor):
    dim = y0.shape[0]
    y = y0.copy()
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    ys = np.empty(dim)
    nsteps = int(math.ceil(T / h - 1e-9))
    if nsteps < 1:
        nsteps = 1
    t = 0.0
    for n in range(nsteps):
        if n >= max_steps:
            return STEP_BUDGET, y, t, n
        hh = h if n < nsteps - 1 else T - (nsteps - 1) * h
        s = rhs(y, params, floor, k1)
        if s == 0:
            for i in range(dim):
                ys[i] = y[i] + 0.5 * hh * k1[i]
            s = rhs(ys, params, floor, k2)
        if s == 0:
            for i in range(dim):
                ys[i] = y[i] + 0.5 * hh * k2[i]
            s = rhs(ys, params, floor, k3)
        if s == 0:
            for i in range(dim):
                ys[i] = y[i] + hh * k3[i]
            s = rhs(ys, params, floor, k4)
        if s != 0:
            return COLLISION, y, t, n
        for i in range(dim):
            y[i] += hh / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if not _finite(y):
            return NON_FINITE, y, t, n
        t = T if n == nsteps - 1 else (n + 1) * h
    if rhs(y, params, floor, k1) != 0:
        return COLLISION, y, t, nsteps
    return OK, y, t, nsteps


@numba.njit
def _run(rhs, y0, params, T, method_rk4, atol, rtol, h, max_steps, floor):
    if method_rk4:
        return _rk4(rhs, y0, params, T, h, max_steps, floor)
    return _dopri5(rhs, y0, params, T, atol, rtol, h, max_steps, floor)


_JITTED: dict = {}


def as_kernel(rhs):
    """Compile a plain kernel-convention callable with numba (memoized)."""
    if isinstance(rhs, CPUDispatcher):
        return rhs
    if rhs not in _JITTED:
        _JITTED[rhs] = numba.njit(rhs)
    return _JITTED[rhs]


def run_kernel(rhs, y0, params, T: float, cfg: IntegratorConfig):
    """Low-level entry: returns the raw ``(status, y, t, steps)`` tuple."""
    y0 = np.ascontiguousarray(y0, dtype=np.float64)
    params = np.ascontiguousarray(params, dtype=np.float64)
    rk4 = cfg.method == "rk4"
    h = cfg.fixed_step(T) if rk4 else (cfg.step if cfg.step is not None else 0.0)
    return _run(as_kernel(rhs), y0, params, float(T), rk4, cfg.abs_tol, cfg.rel_tol, float(h),
                cfg.max_steps, cfg.collision_floor)


# ---------------------------------------------------------------------------
# public API


def integrate(rhs, s0, T: float, cfg: IntegratorConfig = IntegratorConfig(), params=(0.0,)) -> IntegrationOutcome:
    """Integrate ``rhs`` from ``s0`` over ``[0, T]``.

    Never raises on numerical failure; collisions, non-finite states and an
    exhausted step budget come back as a failed outcome.
    """
    if not T > 0:
        raise ValueError(f"T must be > 0, got {T!r}")
    status, y, t, steps = run_kernel(rhs, s0, params, float(T), cfg)
    if status == OK:
        return IntegrationOutcome("completed", final_state=np.array(y), steps_taken=int(steps))
    return IntegrationOutcome(
        "failed", failure=FAILURE_REASONS[int(status)], failure_time=float(t), steps_taken=int(steps)
    )


def sample_trajectory(rhs, s0, T: float, cfg: IntegratorConfig = IntegratorConfig(), k: int = 101,
                      params=(0.0,)) -> Trajectory:
    """Sample the flow at ``k`` uniform times in ``[0, T]``, restarting at each sample.

    Raises :class:`IntegrationError` if any segment fails.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    times = np.linspace(0.0, T, k)
    states = np.empty((k, len(s0)))
    states[0] = s0
    for i in range(1, k):
        out = integrate(rhs, states[i - 1], times[i] - times[i - 1], cfg, params)
        if not out.completed:
            raise IntegrationError(out.failure, times[i - 1] + out.failure_time)
        states[i] = out.final_state
    return Trajectory(times, states)


class IntegrationError(RuntimeError):
    def __init__(self, reason: str, time: float):
        super().__init__(f"integration failed ({reason}) at t={time:.17g}")
        self.reason = reason
        self.time = time


def conservation_drift(s0, m2: float, n: int, T: float, cfg: IntegratorConfig = IntegratorConfig(),
                       k: int = 201) -> tuple[float, float]:
    """Largest relative drift of angular momentum and energy along the reduced flow."""
    traj = sample_trajectory(dynamics.reduced_rhs(n), np.asarray(s0, float), T, cfg, k, (m2,))
    q0 = dynamics.conserved(traj.states[0], m2, n)
    dL = dE = 0.0
    for y in traj.states[1:]:
        q = dynamics.conserved(y, m2, n)
        dL = max(dL, abs(q.L - q0.L) / max(1.0, abs(q0.L)))
        dE = max(dE, abs(q.E - q0.E) / max(1.0, abs(q0.E)))
    return dL, dE


def integrate_reduced(s0, m2: float, n: int, T: float, cfg: IntegratorConfig = IntegratorConfig()):
    return integrate(dynamics.reduced_rhs(n), np.asarray(s0, float), T, cfg, (m2,))


def integrate_cartesian(c: dynamics.CartesianState, T: float, cfg: IntegratorConfig = IntegratorConfig()):
    return integrate(dynamics._cartesian_rhs, c.as_array(), T, cfg, c.masses)
