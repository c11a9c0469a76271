"""Golden-table verification, family continuation and the Cartesian oracle campaign."""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from . import dynamics
from .integrator import IntegratorConfig, IntegrationError, conservation_drift, sample_trajectory
from .shooting import ErrObjective, ReturnSpec, Unknowns, periodicity_check, residual
from .solver import SolverParams, SolverResult, solve

log = logging.getLogger(__name__)

GOLDEN_FILES = {4: "table_n4.txt", 6: "table_n6.txt"}
GOLDEN_SHA256 = {
    4: "67b3cda4a1db65116aaf6232e761342c0af25d951d9b5ef2a9504ed831298b35",
    6: "d3ba5de337da63265845208f816e28d2e632f857076dab49b7fc70c68a715908",
}
GOLDEN_ROW_COUNT = {4: 16, 6: 8}

ERR_THRESHOLD = 1e-5
CROSSCHECK_THRESHOLD = 1e-7
DRIFT_THRESHOLD = 1e-9
MISMATCH_THRESHOLD = 1e-5
ORACLE_THRESHOLD = 1e-7
RK4_STEPS = 200_000

# Solver settings used for the orbit problems unless overridden.
ORBIT_SOLVER_DEFAULTS = dict(N=800, L_max=300, c=0.9, rho=0.9)


class GoldenDataError(ValueError):
    pass


class GoldenRow(NamedTuple):
    theta_deg: float
    z: Unknowns

    @property
    def theta1(self) -> float:
        return math.radians(self.theta_deg)


def parse_table(text: str, source: str = "<table>") -> list[GoldenRow]:
    """Parse ``theta_deg x1 x2 x3 x4 m2 T`` rows; ``#`` starts a comment."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 7:
            raise GoldenDataError(f"{source}:{lineno}: expected 7 fields, got {len(fields)}: {raw!r}")
        try:
            vals = [float(f) for f in fields]
        except ValueError as exc:
            raise GoldenDataError(f"{source}:{lineno}: {exc} in row {raw!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise GoldenDataError(f"{source}:{lineno}: non-finite value in row {raw!r}")
        rows.append(GoldenRow(vals[0], Unknowns(*vals[1:])))
    return rows


def golden_bytes(n: int) -> bytes:
    return resources.files("pseudoperiodic").joinpath("data").joinpath(GOLDEN_FILES[n]).read_bytes()


def load_table(n: int, path: str | Path | None = None, check: bool = True) -> list[GoldenRow]:
    """Load a golden table (packaged by default) and enforce its pinned checksum."""
    if n not in GOLDEN_FILES:
        raise ValueError(f"n must be 4 or 6, got {n!r}")
    data = Path(path).read_bytes() if path is not None else golden_bytes(n)
    source = str(path) if path is not None else GOLDEN_FILES[n]
    rows = parse_table(data.decode("utf-8"), source)
    if len(rows) != GOLDEN_ROW_COUNT[n]:
        raise GoldenDataError(f"{source}: expected {GOLDEN_ROW_COUNT[n]} rows, found {len(rows)}")
    if check:
        digest = hashlib.sha256(data).hexdigest()
        if digest != GOLDEN_SHA256[n]:
            raise GoldenDataError(f"{source}: checksum {digest} does not match pinned {GOLDEN_SHA256[n]}")
    return rows


def golden_row(n: int, theta_deg: float) -> GoldenRow:
    for row in load_table(n):
        if abs(row.theta_deg - theta_deg) < 1e-9:
            return row
    raise KeyError(f"no n={n} golden row at {theta_deg} deg")


def nearest_golden(n: int, theta1: float) -> GoldenRow:
    return min(load_table(n), key=lambda r: abs(r.theta1 - theta1))


# ---------------------------------------------------------------------------
# table verification


@dataclass
class RowReport:
    theta_deg: float
    err: float
    err_rk4: float
    drift_L: float
    drift_E: float
    mismatch: float
    permutation: tuple[int, ...]
    h: list[float] | None = None

    @property
    def crosscheck(self) -> float:
        return abs(self.err - self.err_rk4)

    def checks(self) -> dict[str, bool]:
        return {
            "err": self.err < ERR_THRESHOLD,
            "crosscheck": self.crosscheck < CROSSCHECK_THRESHOLD,
            "drift": max(self.drift_L, self.drift_E) < DRIFT_THRESHOLD,
            "periodicity": self.mismatch < MISMATCH_THRESHOLD,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks().values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "theta_deg": self.theta_deg, "err": _num(self.err), "err_rk4": _num(self.err_rk4),
            "crosscheck": _num(self.crosscheck), "drift_L": self.drift_L, "drift_E": self.drift_E,
            "mismatch": _num(self.mismatch), "permutation": [p + 1 for p in self.permutation],
            "h": self.h, "checks": self.checks(), "passed": self.passed,
        }


@dataclass
class TableReport:
    n: int
    rows: list[RowReport]
    config: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n, "passed": self.passed, "rows": [r.to_dict() for r in self.rows],
            "thresholds": {"err": ERR_THRESHOLD, "crosscheck": CROSSCHECK_THRESHOLD,
                           "drift": DRIFT_THRESHOLD, "periodicity": MISMATCH_THRESHOLD},
            "config": self.config,
        }


def _num(x: float):
    return x if math.isfinite(x) else None


def verify_row(n: int, row: GoldenRow, cfg: IntegratorConfig = IntegratorConfig(),
               rk4_steps: int = RK4_STEPS) -> RowReport:
    spec = ReturnSpec(n, row.theta1)
    res = residual(row.z, spec, cfg)
    err_rk4 = residual(row.z, spec, IntegratorConfig(method="rk4", n_steps=rk4_steps)).err
    try:
        dL, dE = conservation_drift(row.z.initial_state().as_array(), row.z.m2, n, row.z.T, cfg)
    except IntegrationError:
        dL = dE = math.inf
    if res.evaluable:
        per = periodicity_check(row.z, spec, cfg)
        mismatch, perm = per.max_mismatch, per.permutation
    else:
        mismatch, perm = math.inf, ()
    return RowReport(row.theta_deg, res.err, err_rk4, dL, dE, mismatch, perm,
                     res.h.tolist() if res.evaluable else None)


def verify_table(n: int, cfg: IntegratorConfig = IntegratorConfig(), rows: list[GoldenRow] | None = None,
                 rk4_steps: int = RK4_STEPS) -> TableReport:
    """Residual, RK4 cross-check, conservation drift and periodicity for every golden row."""
    rows = load_table(n) if rows is None else rows
    out = []
    for row in rows:
        r = verify_row(n, row, cfg, rk4_steps)
        log.info("n=%d %6.1f deg  Err=%.3e  rk4=%.3e  mismatch=%.3e", n, r.theta_deg, r.err, r.err_rk4, r.mismatch)
        out.append(r)
    return TableReport(n, out, {"integrator": cfg.to_dict(), "rk4_steps": rk4_steps,
                                "golden_sha256": GOLDEN_SHA256[n]})


# ---------------------------------------------------------------------------
# continuation


@dataclass
class FamilyRow:
    theta1: float
    z_best: np.ndarray
    e_best: float
    converged: bool
    drift: tuple[float, float] | None
    mismatch: float | None
    permutation: tuple[int, ...] | None
    seed: int
    result: SolverResult = field(repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "theta1_rad": self.theta1, "theta1_deg": math.degrees(self.theta1),
            "z_best": self.z_best.tolist(), "e_best": _num(self.e_best), "converged": self.converged,
            "drift": list(self.drift) if self.drift else None, "mismatch": self.mismatch,
            "permutation": [p + 1 for p in self.permutation] if self.permutation else None,
            "seed": self.seed, "iterations": self.result.iterations_used,
            "evals": self.result.evals_used,
        }


@dataclass
class FamilyResult:
    n: int
    rows: list[FamilyRow]
    config: dict = field(default_factory=dict)

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.rows)

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "all_converged": self.all_converged,
                "rows": [r.to_dict() for r in self.rows], "config": self.config}


def point_seed(master_seed: int, theta1: float) -> int:
    """Per-grid-point seed that depends only on ``(master_seed, theta1)``."""
    key = int(round(math.degrees(theta1) * 1e6))
    ss = np.random.SeedSequence([int(master_seed) & (2**63 - 1), key & (2**63 - 1)])
    return int(ss.generate_state(1, np.uint64)[0])


def solve_point(n: int, theta1: float, z0, cfg: IntegratorConfig = IntegratorConfig(), seed: int = 0,
                rel_box: float = 0.05, d_min: float = 1e-12, trace: bool = False, **solver_kw) -> SolverResult:
    opts = {**ORBIT_SOLVER_DEFAULTS, **solver_kw}
    params = SolverParams.around(z0, rel_box=rel_box, d_min=d_min, seed=seed, **opts)
    return solve(ErrObjective(ReturnSpec(n, theta1), cfg), z0, params, trace=trace)


def run_family(n: int, grid: Iterable[float], cfg: IntegratorConfig = IntegratorConfig(), z0=None,
               master_seed: int = 0, descending: bool = False, diagnostics: bool = True,
               **solver_kw) -> FamilyResult:
    """Continuation over ``theta1`` (radians), warm-starting each point from the last converged one.

    The first point starts from ``z0`` when given, otherwise from the nearest golden row.
    """
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ValueError("empty grid")
    order = list(reversed(grid)) if descending else grid
    warm = np.asarray(z0, float) if z0 is not None else np.array(nearest_golden(n, order[0]).z)
    rows = []
    for theta1 in order:
        seed = point_seed(master_seed, theta1)
        res = solve_point(n, theta1, warm, cfg, seed=seed, **solver_kw)
        drift = mismatch = perm = None
        if diagnostics and math.isfinite(res.e_best):
            z = Unknowns(*res.z_best)
            try:
                drift = conservation_drift(z.initial_state().as_array(), z.m2, n, z.T, cfg)
            except IntegrationError:
                drift = None
            per = periodicity_check(res.z_best, ReturnSpec(n, theta1), cfg)
            mismatch, perm = per.max_mismatch, per.permutation
        rows.append(FamilyRow(theta1, res.z_best, res.e_best, res.converged, drift, mismatch, perm, seed, res))
        log.info("n=%d theta1=%.2f deg  e_best=%.3e  converged=%s", n, math.degrees(theta1), res.e_best, res.converged)
        if res.converged:
            warm = res.z_best
    rows.sort(key=lambda r: r.theta1)
    return FamilyResult(n, rows, {"integrator": cfg.to_dict(), "master_seed": master_seed,
                                  "solver": {**ORBIT_SOLVER_DEFAULTS, **solver_kw}, "descending": descending})


# ---------------------------------------------------------------------------
# trajectories and the Cartesian oracle


def body_paths(n: int, z, t_end: float, samples: int, cfg: IntegratorConfig = IntegratorConfig()):
    """Cartesian positions of all bodies, shape ``(samples, n, 2)``, plus sample times."""
    z = Unknowns(*(float(v) for v in z))
    traj = sample_trajectory(dynamics.reduced_rhs(n), z.initial_state().as_array(), t_end, cfg,
                             samples, (z.m2,))
    pos = np.array([dynamics.embed_cartesian(s, n, z.m2).positions for s in traj.states])
    return traj.times, pos, traj.states


def cartesian_paths(n: int, z, t_end: float, samples: int, cfg: IntegratorConfig = IntegratorConfig()):
    """Same as :func:`body_paths` but integrating the full N-body system."""
    z = Unknowns(*(float(v) for v in z))
    c0 = dynamics.embed_cartesian(z.initial_state(), n, z.m2)
    traj = sample_trajectory(dynamics._cartesian_rhs, c0.as_array(), t_end, cfg, samples, c0.masses)
    pos = traj.states[:, : 2 * n].reshape(samples, n, 2)
    return traj.times, pos


@dataclass
class OracleRow:
    theta_deg: float
    max_discrepancy: float
    failure: str | None = None

    def to_dict(self):
        return {"theta_deg": self.theta_deg, "max_discrepancy": _num(self.max_discrepancy),
                "failure": self.failure}


def oracle_campaign(n: int, cfg: IntegratorConfig = IntegratorConfig(), rows: list[GoldenRow] | None = None,
                    samples: int = 101) -> list[OracleRow]:
    """Reduced vs full Cartesian integration from the embedded initial state of each row."""
    rows = load_table(n) if rows is None else rows
    out = []
    for row in rows:
        try:
            _, reduced = body_paths(n, row.z, row.z.T, samples, cfg)[:2]
            _, full = cartesian_paths(n, row.z, row.z.T, samples, cfg)
        except IntegrationError as exc:
            out.append(OracleRow(row.theta_deg, math.inf, exc.reason))
            continue
        out.append(OracleRow(row.theta_deg, float(np.max(np.abs(reduced - full)))))
    return out


def _directed_polyline(a: np.ndarray, b: np.ndarray, k: int = 4) -> float:
    # distance from each point of a to the polyline through b, via the segments around the k nearest vertices
    _, idx = cKDTree(b).query(a, k=min(k, len(b)))
    idx = np.atleast_2d(idx.T).T
    best = np.full(len(a), np.inf)
    for col in range(idx.shape[1]):
        for shift in (0, -1):
            i = np.clip(idx[:, col] + shift, 0, len(b) - 2)
            p, v = b[i], b[i + 1] - b[i]
            vv = np.einsum("ij,ij->i", v, v)
            t = np.clip(np.einsum("ij,ij->i", a - p, v) / np.where(vv > 0, vv, 1.0), 0.0, 1.0)
            best = np.minimum(best, np.linalg.norm(a - (p + t[:, None] * v), axis=1))
    return float(best.max())


def polyline_hausdorff(a, b) -> float:
    """Symmetric Hausdorff distance between two sampled planar curves (points to segments)."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    return max(_directed_polyline(a, b), _directed_polyline(b, a))
