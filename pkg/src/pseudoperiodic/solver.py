"""Adaptive stochastic black-box equation solver.

Minimizes an error functional ``Err(Z) in [0, +inf]`` by sampling ``N`` candidates
uniformly in an axis-aligned box around the incumbent, keeping the best one if it
strictly improves, and adapting the box radii from the last accepted displacement.

Randomness comes from numpy's PCG64 (``np.random.default_rng(seed)``). Each
iteration draws one ``(N, n)`` block of uniforms in C order, i.e. candidate-major,
coordinate-minor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

__all__ = [
    "SolverParams",
    "SolverState",
    "SolverResult",
    "box_update_improve",
    "box_update_fail",
    "sample_candidates",
    "solve",
]


@dataclass
class SolverParams:
    d0: np.ndarray
    d_min: np.ndarray
    rho: float = 0.9
    c: float = 0.9
    e_g: float = 1e-7
    N: int = 800
    L_max: int = 300
    seed: int = 0

    def __post_init__(self):
        self.d0 = np.atleast_1d(np.asarray(self.d0, dtype=np.float64))
        self.d_min = np.atleast_1d(np.asarray(self.d_min, dtype=np.float64))
        if self.d_min.shape == (1,) and self.d0.shape != (1,):
            self.d_min = np.full_like(self.d0, self.d_min[0])
        if self.d0.shape != self.d_min.shape:
            raise ValueError(f"d0 and d_min shapes differ: {self.d0.shape} vs {self.d_min.shape}")
        if not (np.all(self.d0 > 0) and np.all(self.d_min > 0)):
            raise ValueError("box radii must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must be in (0, 1), got {self.rho}")
        if not self.c > 0:
            raise ValueError(f"c must be > 0, got {self.c}")
        if not self.e_g > 0:
            raise ValueError(f"e_g must be > 0, got {self.e_g}")
        if int(self.N) < 1 or int(self.L_max) < 1:
            raise ValueError("N and L_max must be >= 1")
        self.N = int(self.N)
        self.L_max = int(self.L_max)
        self.seed = int(self.seed)

    @classmethod
    def around(cls, z0, rel_box: float = 0.05, d_min: float = 1e-12, **kwargs) -> "SolverParams":
        """Default box for a starting point: ``rel_box * max(|z0_i|, 1)`` per coordinate."""
        z0 = np.asarray(z0, dtype=np.float64)
        d0 = rel_box * np.maximum(np.abs(z0), 1.0)
        return cls(d0=d0, d_min=np.full_like(d0, d_min), **kwargs)

    def to_dict(self) -> dict[str, Any]:
        return {
            "d0": self.d0.tolist(), "d_min": self.d_min.tolist(), "rho": self.rho, "c": self.c,
            "e_g": self.e_g, "N": self.N, "L_max": self.L_max, "seed": self.seed,
        }


@dataclass
class SolverState:
    z_best: np.ndarray
    e_best: float
    delta_last: np.ndarray
    d: np.ndarray
    iteration: int = 0
    evals: int = 0


@dataclass
class SolverResult:
    z_best: np.ndarray
    e_best: float
    iterations_used: int
    evals_used: int
    converged: bool
    d: np.ndarray
    delta_last: np.ndarray
    trace: list[dict] | None = field(default=None, repr=False)

    def to_dict(self) -> dict[str, Any]:
        out = {
            "z_best": self.z_best.tolist(),
            "e_best": self.e_best if math.isfinite(self.e_best) else None,
            "iterations_used": self.iterations_used,
            "evals_used": self.evals_used,
            "converged": self.converged,
            "d": self.d.tolist(),
        }
        if self.trace is not None:
            out["trace"] = self.trace
        return out


def box_update_improve(d, delta_last, p: SolverParams) -> np.ndarray:
    """Box radii after an accepted move: ``max(d, c * delta_last, d_min)``."""
    return np.maximum(np.maximum(d, p.c * np.asarray(delta_last)), p.d_min)


def box_update_fail(d, delta_last, p: SolverParams) -> np.ndarray:
    """Box radii after a rejected iteration: ``max(rho * d, c * delta_last, d_min)``."""
    return np.maximum(np.maximum(p.rho * np.asarray(d), p.c * np.asarray(delta_last)), p.d_min)


def sample_candidates(z_best, d, N: int, rng: np.random.Generator) -> np.ndarray:
    z_best = np.asarray(z_best, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    xi = rng.uniform(-1.0, 1.0, size=(N, z_best.shape[0])) * d
    return z_best + xi


def _evaluate(objective, zs: np.ndarray) -> np.ndarray:
    batch = getattr(objective, "batch", None)
    if batch is not None:
        e = np.asarray(batch(zs), dtype=np.float64)
    else:
        e = np.array([objective(z) for z in zs], dtype=np.float64)
    # NaN means the evaluation failed
    return np.where(np.isnan(e), np.inf, e)


def solve(objective: Callable[[np.ndarray], float], z0, p: SolverParams, trace: bool = False,
          callback: Callable[[SolverState], None] | None = None) -> SolverResult:
    """Run the adaptive box search from ``z0``.

    ``objective`` may expose a ``batch(zs) -> errors`` method; it is used for
    the ``N`` candidates of each iteration when present. Stops as soon as the
    incumbent error drops below ``p.e_g`` (including at the starting point).
    """
    z0 = np.asarray(z0, dtype=np.float64).copy()
    if z0.shape != p.d0.shape:
        raise ValueError(f"z0 has shape {z0.shape}, box has {p.d0.shape}")
    rng = np.random.default_rng(p.seed)
    e0 = float(_evaluate(objective, z0[None, :])[0])
    state = SolverState(z_best=z0, e_best=e0, delta_last=np.zeros_like(z0),
                        d=np.maximum(p.d0, p.d_min), evals=1)
    log: list[dict] | None = [] if trace else None

    def finish(converged: bool) -> SolverResult:
        return SolverResult(state.z_best.copy(), state.e_best, state.iteration, state.evals,
                            converged, state.d.copy(), state.delta_last.copy(), log)

    if state.e_best < p.e_g:
        return finish(True)

    for ell in range(1, p.L_max + 1):
        state.iteration = ell
        cands = sample_candidates(state.z_best, state.d, p.N, rng)
        errs = _evaluate(objective, cands)
        state.evals += p.N
        j = int(np.argmin(errs))  # first index among ties
        e_s = float(errs[j])
        accepted = e_s < state.e_best
        if accepted:
            state.delta_last = np.abs(cands[j] - state.z_best)
            state.z_best = cands[j].copy()
            state.e_best = e_s
            state.d = box_update_improve(state.d, state.delta_last, p)
        else:
            state.d = box_update_fail(state.d, state.delta_last, p)
        if log is not None:
            log.append({"iteration": ell, "e_best": state.e_best if math.isfinite(state.e_best) else None,
                        "accepted": accepted, "d": state.d.tolist()})
        if callback is not None:
            callback(state)
        if accepted and state.e_best < p.e_g:
            return finish(True)
    return finish(False)
