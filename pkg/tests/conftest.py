import numpy as np
import pytest
from hypothesis import settings

from pseudoperiodic import dynamics, harness
from pseudoperiodic.integrator import IntegratorConfig

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

TABLE_60_N4 = (2.723220323279, 0.857428317284, 0.462255493028, -0.754455893701, 2.016567156421, 2.240112525938)
TABLE_90_N6 = (1.921530148592, 1.120852152518, 0.467942444000, 0.040593915087, 0.321032820959, 3.290981986838)


@pytest.fixture(scope="session")
def cfg():
    return IntegratorConfig()


@pytest.fixture(scope="session")
def table_n4():
    return harness.load_table(4)


@pytest.fixture(scope="session")
def table_n6():
    return harness.load_table(6)


def projected_accelerations(s, n: int, m2: float) -> np.ndarray:
    """(r1'', r2'', theta'', beta'') recovered from the Cartesian force on bodies 1 and n/2+1."""
    s = dynamics.ReducedState.from_array(s)
    c = dynamics.embed_cartesian(s, n, m2)
    acc = dynamics.cartesian_rhs(c).velocities
    out = []
    for body, r, dr, w in ((0, s.r1, s.dr1, s.dtheta), (n // 2, s.r2, s.dr2, s.dbeta)):
        p = c.positions[body] / r
        t = np.array([-p[1], p[0]])
        a = acc[body]
        out.append((a @ p + r * w * w, (a @ t - 2.0 * dr * w) / r))
    (r1dd, thdd), (r2dd, bdd) = out
    return np.array([r1dd, r2dd, thdd, bdd])


def random_state(rng: np.random.Generator, n: int):
    """A random reduced state away from collisions, plus a mass."""
    while True:
        r1, r2 = rng.uniform(0.3, 3.0, 2)
        th, be = rng.uniform(-np.pi, np.pi, 2)
        rates = rng.normal(0.0, 0.7, 4)
        s = np.array([r1, r2, th, be, *rates])
        m2 = float(rng.uniform(0.05, 3.0))
        d = (dynamics.distances4 if n == 4 else dynamics.distances6)(r1, r2, th - be)
        if min(d) > 0.1:
            return s, m2


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(mod.NAMES):
        parts = mod.RESULTS.get(k)
        if not parts:
            tr.write_line(f"criterion {k} ({mod.NAMES[k]}): NOT RUN")
            continue
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        tr.write_line(f"criterion {k} ({mod.NAMES[k]}): {status}")
        for part, ok, detail in parts:
            tr.write_line(f"    {part}: {'pass' if ok else 'FAIL'}  {detail}")
    for note in mod.NOTES:
        tr.write_line(f"note: {note}")
