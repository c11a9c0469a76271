import hashlib
import math

import numpy as np
import pytest

from pseudoperiodic import harness
from pseudoperiodic.harness import GoldenDataError, GoldenRow, parse_table
from pseudoperiodic.shooting import Unknowns

from conftest import TABLE_60_N4, TABLE_90_N6


# ---------------------------------------------------------------------------
# golden data


@pytest.mark.parametrize("n", [4, 6])
def test_golden_checksum_and_count(n):
    data = harness.golden_bytes(n)
    assert hashlib.sha256(data).hexdigest() == harness.GOLDEN_SHA256[n]
    assert len(harness.load_table(n)) == harness.GOLDEN_ROW_COUNT[n]


def test_golden_rows_verbatim():
    assert tuple(harness.golden_row(4, 60).z) == TABLE_60_N4
    assert tuple(harness.golden_row(6, 90).z) == TABLE_90_N6
    assert harness.golden_row(6, 180).z.x4 == 0.3489664357460


def test_golden_angles():
    assert [r.theta_deg for r in harness.load_table(6)] == [30, 45, 60, 90, 120, 135, 150, 180]
    n4 = [r.theta_deg for r in harness.load_table(4)]
    assert n4 == sorted(n4) and n4[0] == 30 and n4[-1] == 360


def test_unknown_row():
    with pytest.raises(KeyError):
        harness.golden_row(6, 91)


def test_nearest_golden():
    assert harness.nearest_golden(6, math.radians(95)).theta_deg == 90


def test_parse_comments_and_blank_lines():
    rows = parse_table("# header\n\n30 1 2 3 4 5 6  # trailing\n")
    assert rows == [GoldenRow(30.0, Unknowns(1.0, 2.0, 3.0, 4.0, 5.0, 6.0))]


@pytest.mark.parametrize("text, fragment", [
    ("30 1 2 3 4 5\n", "expected 7 fields"),
    ("30 1 2 3 4 5 6\n45 1 2 x 4 5 6\n", ":2:"),
    ("30 1 2 3 4 5 nan\n", "non-finite"),
])
def test_parse_errors_name_the_row(text, fragment):
    with pytest.raises(GoldenDataError, match=fragment):
        parse_table(text, "t.txt")


def test_load_detects_edit(tmp_path):
    text = harness.golden_bytes(6).decode().replace("0.4679424440000", "0.4679424440001")
    path = tmp_path / "edited.txt"
    path.write_text(text)
    with pytest.raises(GoldenDataError, match="checksum"):
        harness.load_table(6, path)
    assert len(harness.load_table(6, path, check=False)) == 8


def test_load_detects_missing_row(tmp_path):
    lines = harness.golden_bytes(6).decode().splitlines()
    path = tmp_path / "short.txt"
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(GoldenDataError, match="expected 8 rows"):
        harness.load_table(6, path)


# ---------------------------------------------------------------------------
# verification


def test_verify_n6_table(cfg):
    rep = harness.verify_table(6, cfg)
    assert rep.passed
    d = rep.to_dict()
    assert len(d["rows"]) == 8
    assert d["rows"][3]["permutation"] == [1, 2, 3, 5, 6, 4]
    assert d["config"]["golden_sha256"] == harness.GOLDEN_SHA256[6]


def test_verify_row_unevaluable(cfg):
    row = GoldenRow(180.0, Unknowns(1.0, 1.0, 0.0, 0.0, 1.0, 10.0))
    rep = harness.verify_row(4, row, cfg, rk4_steps=1000)
    assert rep.err == math.inf and not rep.passed
    assert rep.to_dict()["err"] is None


# ---------------------------------------------------------------------------
# continuation


def test_point_seed_stable():
    a = harness.point_seed(0, math.radians(60))
    assert a == harness.point_seed(0, math.radians(60))
    assert a != harness.point_seed(1, math.radians(60))
    assert a != harness.point_seed(0, math.radians(75))


def test_family_converged_row_returns_at_iteration_zero(cfg):
    fam = harness.run_family(6, [math.pi / 2], cfg, e_g=1e-5)
    (row,) = fam.rows
    assert row.converged and row.result.iterations_used == 0
    assert np.array_equal(row.z_best, TABLE_90_N6)
    assert row.mismatch <= 10 * row.e_best + 1e-9


def test_family_rows_sorted_and_reproducible(cfg):
    grid = [math.radians(120), math.radians(90)]
    kw = dict(e_g=1e-5, N=4, L_max=2)
    a = harness.run_family(6, grid, cfg, descending=True, diagnostics=False, **kw)
    b = harness.run_family(6, grid, cfg, descending=True, diagnostics=False, **kw)
    assert [r.theta1 for r in a.rows] == sorted(grid)
    assert a.to_dict() == b.to_dict()
    assert a.config["descending"] is True


def test_family_empty_grid(cfg):
    with pytest.raises(ValueError):
        harness.run_family(6, [], cfg)


def test_family_records_unconverged(cfg):
    fam = harness.run_family(6, [math.radians(100)], cfg, e_g=1e-12, N=2, L_max=1, diagnostics=False)
    assert not fam.all_converged
    assert len(fam.rows) == 1


# ---------------------------------------------------------------------------
# oracle and trajectories


def test_oracle_golden_rows(cfg):
    rows = [harness.golden_row(4, 60), harness.golden_row(6, 180)]
    for n, row in zip((4, 6), rows):
        (rep,) = harness.oracle_campaign(n, cfg, [row], samples=21)
        assert rep.max_discrepancy < 1e-7


def test_oracle_decoupled_circle(cfg):
    row = GoldenRow(0.0, Unknowns(1.0, 10.0, 0.5, 0.0, 1e-300, 10.0))
    (rep,) = harness.oracle_campaign(4, cfg, [row], samples=11)
    assert rep.max_discrepancy < 1e-10


def test_oracle_reports_failure(cfg):
    row = GoldenRow(0.0, Unknowns(1.0, 1.0, 0.0, 0.0, 1.0, 10.0))
    (rep,) = harness.oracle_campaign(4, cfg, [row], samples=5)
    assert rep.failure == "collision" and rep.max_discrepancy == math.inf


def test_body_paths_shape(cfg):
    times, pos, states = harness.body_paths(4, TABLE_60_N4, TABLE_60_N4[5], 7, cfg)
    assert pos.shape == (7, 4, 2) and states.shape == (7, 8)
    assert times[0] == 0.0 and times[-1] == TABLE_60_N4[5]


def test_hausdorff_basics():
    t = np.linspace(0, 2 * np.pi, 400)
    circle = np.column_stack([np.cos(t), np.sin(t)])
    assert harness.polyline_hausdorff(circle, circle) < 1e-15
    # same curve, sampled differently
    s = np.linspace(0, 2 * np.pi, 997)
    assert harness.polyline_hausdorff(circle, np.column_stack([np.cos(s), np.sin(s)])) < 1e-4
    assert harness.polyline_hausdorff(circle, 1.5 * circle) == pytest.approx(0.5, abs=1e-3)
    u = np.linspace(0, np.pi, 200)
    half = np.column_stack([np.cos(u), np.sin(u)])
    # (0, -1) is farthest from the upper arc, sqrt(2) from its endpoints
    assert harness.polyline_hausdorff(circle, half) == pytest.approx(math.sqrt(2), abs=1e-2)
