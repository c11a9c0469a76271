"""Command-line front end.

Exit codes: 0 success, 1 quantitative failure (verification or convergence),
2 usage, configuration or I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__, harness
from .export import atomic_write, trajectory_csv, trajectory_svg, write_json
from .integrator import IntegratorConfig, IntegrationError
from .shooting import ReturnSpec

log = logging.getLogger("pseudoperiodic")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

_ANGLE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(deg|rad)\s*$")

INTEGRATOR_KEYS = ("method", "step", "n_steps", "abs_tol", "rel_tol", "max_steps", "collision_floor")
SOLVER_KEYS = ("N", "L_max", "rho", "c", "e_g", "rel_box", "d_min")


class UsageError(Exception):
    pass


def parse_angle(text) -> float:
    """``"60deg"`` or ``"1.047rad"`` to radians; the unit suffix is mandatory."""
    if isinstance(text, (int, float)):
        raise UsageError(f"angle {text!r} needs a unit suffix (deg or rad)")
    m = _ANGLE.match(str(text))
    if not m:
        raise UsageError(f"cannot parse angle {text!r}; a unit suffix is required, e.g. 60deg or 1.047rad")
    value = float(m.group(1))
    return math.radians(value) if m.group(2) == "deg" else value


def parse_grid(text: str) -> list[float]:
    """``start:step:end`` in degrees (optional ``deg``/``rad`` suffix), end inclusive."""
    unit = "deg"
    s = text.strip()
    for suffix in ("deg", "rad"):
        if s.endswith(suffix):
            unit, s = suffix, s[: -len(suffix)]
    parts = s.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must be start:step:end, got {text!r}")
    try:
        start, step, end = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"grid must be numeric, got {text!r}") from None
    if step <= 0:
        raise UsageError("grid step must be > 0")
    count = int(math.floor((end - start) / step + 1e-9)) + 1
    values = [start + i * step for i in range(max(count, 0))]
    return [math.radians(v) if unit == "deg" else v for v in values]


def _fmt_deg(theta: float) -> str:
    return f"{math.degrees(theta):g}deg"


# ---------------------------------------------------------------------------
# configuration


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must be a JSON object")
    return cfg


def effective(args, file_cfg: dict, key: str, section: str | None = None, default=None):
    """CLI flag, else config file, else default."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    src = file_cfg.get(section, {}) if section else file_cfg
    return src.get(key, default)


def integrator_config(args, file_cfg: dict) -> IntegratorConfig:
    kw = {}
    for k in INTEGRATOR_KEYS:
        v = effective(args, file_cfg, k, "integrator")
        if v is not None:
            kw[k] = v
    try:
        return IntegratorConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad integrator configuration: {exc}") from None


def solver_options(args, file_cfg: dict) -> dict:
    out = {}
    for k in SOLVER_KEYS:
        v = effective(args, file_cfg, k, "solver")
        if v is not None:
            out[k] = v
    return out


def _add_integrator_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("integrator")
    g.add_argument("--method", choices=["dopri5", "rk4"])
    g.add_argument("--step", type=float, help="initial (dopri5) or fixed (rk4) step")
    g.add_argument("--n-steps", dest="n_steps", type=int, help="rk4 steps over [0, T]")
    g.add_argument("--abs-tol", dest="abs_tol", type=float)
    g.add_argument("--rel-tol", dest="rel_tol", type=float)
    g.add_argument("--max-steps", dest="max_steps", type=int)
    g.add_argument("--collision-floor", dest="collision_floor", type=float)


def _add_solver_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("solver")
    g.add_argument("--N", dest="N", type=int, help="samples per iteration (default 800)")
    g.add_argument("--L-max", dest="L_max", type=int, help="iteration cap (default 300)")
    g.add_argument("--rho", type=float, help="shrink factor (default 0.9)")
    g.add_argument("--c", dest="c", type=float, help="learning-term scale (default 0.9)")
    g.add_argument("--e-g", dest="e_g", type=float, help="target error (default 1e-7)")
    g.add_argument("--rel-box", dest="rel_box", type=float,
                   help="initial box as a fraction of max(|z0_i|, 1) (default 0.05)")
    g.add_argument("--d-min", dest="d_min", type=float, help="minimum box radius (default 1e-12)")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--output-dir", dest="output_dir", help="directory for output files (default .)")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pseudoperiodic", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON run configuration; flags override it")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check a golden table")
    p.add_argument("--table", choices=["n4", "n6"], required=True)
    p.add_argument("--golden", help="alternative golden file (checksum still enforced)")
    p.add_argument("--rk4-steps", dest="rk4_steps", type=int, default=harness.RK4_STEPS)
    _common(p)
    _add_integrator_flags(p)

    p = sub.add_parser("solve", help="solve the return conditions for one theta1")
    p.add_argument("--problem", type=int, choices=[4, 6])
    p.add_argument("--theta1", help="target angle with unit, e.g. 60deg")
    start = p.add_mutually_exclusive_group()
    start.add_argument("--z0", nargs=6, type=float, metavar=("X1", "X2", "X3", "X4", "M2", "T"))
    start.add_argument("--warm-from-table", action="store_true", help="start from the nearest golden row")
    p.add_argument("--perturb", type=float, default=0.0, help="relative +/- perturbation of the start")
    p.add_argument("--no-trace", dest="trace", action="store_false")
    _common(p)
    _add_integrator_flags(p)
    _add_solver_flags(p)

    p = sub.add_parser("trajectory", help="export body paths")
    p.add_argument("--problem", type=int, choices=[4, 6])
    row = p.add_mutually_exclusive_group()
    row.add_argument("--row", help="golden row angle, e.g. 60deg")
    row.add_argument("--z0", nargs=6, type=float, metavar=("X1", "X2", "X3", "X4", "M2", "T"))
    p.add_argument("--samples", type=int, default=2001)
    p.add_argument("--multiples", type=float, default=1.0, help="integrate over [0, m*T]")
    p.add_argument("--format", choices=["csv", "json", "svg"])
    _common(p)
    _add_integrator_flags(p)

    p = sub.add_parser("family", help="continuation over a theta1 grid")
    p.add_argument("--problem", type=int, choices=[4, 6])
    p.add_argument("--grid", required=True, help="start:step:end in degrees, e.g. 30:15:90")
    p.add_argument("--z0", nargs=6, type=float, metavar=("X1", "X2", "X3", "X4", "M2", "T"))
    p.add_argument("--cold", action="store_true", help="do not warm-start from the golden table (needs --z0)")
    p.add_argument("--descending", action="store_true")
    _common(p)
    _add_integrator_flags(p)
    _add_solver_flags(p)
    return parser


# ---------------------------------------------------------------------------
# commands


def _problem(args, file_cfg) -> int:
    n = effective(args, file_cfg, "problem")
    if n not in (4, 6):
        raise UsageError("--problem must be 4 or 6")
    return int(n)


def _output_dir(args, file_cfg) -> Path:
    return Path(effective(args, file_cfg, "output_dir", default="."))


def _provenance(cfg: IntegratorConfig, n: int, seed=None, solver=None) -> dict:
    return {"integrator": cfg.to_dict(), "solver": solver, "seed": seed,
            "golden_sha256": harness.GOLDEN_SHA256[n], "version": __version__}


def cmd_verify(args, file_cfg) -> int:
    n = 4 if args.table == "n4" else 6
    cfg = integrator_config(args, file_cfg)
    try:
        rows = harness.load_table(n, args.golden)
    except OSError as exc:
        raise UsageError(f"cannot read golden file: {exc}") from None
    report = harness.verify_table(n, cfg, rows, rk4_steps=args.rk4_steps)
    payload = report.to_dict()
    payload["provenance"] = _provenance(cfg, n)
    path = write_json(_output_dir(args, file_cfg) / f"verify_{args.table}.json", payload)
    for r in report.rows:
        print(f"n={n} {r.theta_deg:6.1f} deg  Err={r.err:.3e}  rk4={r.err_rk4:.3e}  "
              f"drift={max(r.drift_L, r.drift_E):.1e}  mismatch={r.mismatch:.2e}  "
              f"{'PASS' if r.passed else 'FAIL'}")
    print(f"report: {path}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_solve(args, file_cfg) -> int:
    n = _problem(args, file_cfg)
    theta = effective(args, file_cfg, "theta1")
    if theta is None:
        raise UsageError("--theta1 is required")
    theta1 = parse_angle(theta)
    spec = ReturnSpec(n, theta1)
    cfg = integrator_config(args, file_cfg)
    seed = int(effective(args, file_cfg, "seed", default=0))
    z0 = args.z0 if args.z0 is not None else file_cfg.get("z0")
    if z0 is None and not args.warm_from_table:
        raise UsageError("give --z0 or --warm-from-table")
    z0 = np.array(z0 if z0 is not None else harness.nearest_golden(n, theta1).z, dtype=float)
    if args.perturb:
        signs = np.random.default_rng(seed).choice([-1.0, 1.0], size=z0.shape)
        z0 = z0 * (1.0 + args.perturb * signs)
    opts = solver_options(args, file_cfg)
    res = harness.solve_point(n, spec.theta1, z0, cfg, seed=seed, trace=args.trace, **opts)
    payload = {"problem": n, "theta1_rad": theta1, "z0": z0, **res.to_dict(),
               "provenance": _provenance(cfg, n, seed, {**harness.ORBIT_SOLVER_DEFAULTS, **opts})}
    path = write_json(_output_dir(args, file_cfg) / f"solution_n{n}_{_fmt_deg(theta1)}.json", payload)
    print(f"e_best={res.e_best:.3e} converged={res.converged} iterations={res.iterations_used} "
          f"evals={res.evals_used}")
    print(f"solution: {path}")
    return EXIT_OK if res.converged else EXIT_FAIL


def cmd_trajectory(args, file_cfg) -> int:
    n = _problem(args, file_cfg)
    cfg = integrator_config(args, file_cfg)
    fmt = effective(args, file_cfg, "format", default="csv")
    if fmt not in ("csv", "json", "svg"):
        raise UsageError(f"unknown format {fmt!r}")
    if args.samples < 2:
        raise UsageError("--samples must be >= 2")
    if args.z0 is not None:
        z, label = np.array(args.z0, float), "custom"
    elif args.row is not None:
        deg = math.degrees(parse_angle(args.row))
        try:
            z, label = np.array(harness.golden_row(n, round(deg, 9)).z), _fmt_deg(math.radians(deg))
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
    else:
        raise UsageError("give --row or --z0")
    times, pos, _ = harness.body_paths(n, z, args.multiples * z[5], args.samples, cfg)
    path = _output_dir(args, file_cfg) / f"trajectory_n{n}_{label}.{fmt}"
    if fmt == "csv":
        atomic_write(path, trajectory_csv(times, pos))
    elif fmt == "svg":
        atomic_write(path, trajectory_svg(pos))
    else:
        write_json(path, {"problem": n, "z": z, "multiples": args.multiples, "times": times,
                          "positions": pos, "provenance": _provenance(cfg, n)})
    print(f"trajectory: {path}")
    return EXIT_OK


def cmd_family(args, file_cfg) -> int:
    n = _problem(args, file_cfg)
    grid = parse_grid(args.grid)
    if not grid:
        raise UsageError(f"grid {args.grid!r} is empty")
    if args.cold and args.z0 is None:
        raise UsageError("--cold needs --z0")
    cfg = integrator_config(args, file_cfg)
    seed = int(effective(args, file_cfg, "seed", default=0))
    opts = solver_options(args, file_cfg)
    fam = harness.run_family(n, grid, cfg, z0=args.z0, master_seed=seed, descending=args.descending, **opts)
    out = _output_dir(args, file_cfg)
    for row in fam.rows:
        write_json(out / f"family_n{n}_{_fmt_deg(row.theta1)}.json",
                   {**row.to_dict(), "provenance": _provenance(cfg, n, row.seed, fam.config["solver"])})
    summary = fam.to_dict()
    summary["provenance"] = _provenance(cfg, n, seed, fam.config["solver"])
    path = write_json(out / f"family_n{n}_summary.json", summary)
    for row in fam.rows:
        print(f"{math.degrees(row.theta1):7.2f} deg  e_best={row.e_best:.3e}  converged={row.converged}")
    print(f"summary: {path}")
    return EXIT_OK if fam.all_converged else EXIT_FAIL


COMMANDS = {"verify": cmd_verify, "solve": cmd_solve, "trajectory": cmd_trajectory, "family": cmd_family}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        file_cfg = load_config(args.config)
        return COMMANDS[args.command](args, file_cfg)
    except (UsageError, harness.GoldenDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
