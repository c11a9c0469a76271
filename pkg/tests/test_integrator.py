import math

import numpy as np
import pytest

from pseudoperiodic import dynamics
from pseudoperiodic.integrator import (
    IntegrationError,
    IntegratorConfig,
    conservation_drift,
    integrate,
    integrate_cartesian,
    integrate_reduced,
    sample_trajectory,
)
from pseudoperiodic.shooting import Unknowns

from conftest import TABLE_60_N4, TABLE_90_N6


def zero_rhs(y, params, floor, out):
    for i in range(y.shape[0]):
        out[i] = 0.0
    return 0


def oscillator(y, params, floor, out):
    out[0] = y[1]
    out[1] = -y[0]
    return 0


def blowup(y, params, floor, out):
    # y' = y^2 reaches infinity at t = 1 / y0
    out[0] = y[0] * y[0]
    return 0


RK4 = dict(method="rk4")


def rk4_error(n_steps: int, T: float = 5.0) -> float:
    """Max-norm global error of fixed-step RK4 on x'' = -x from (1, 0)."""
    out = integrate(oscillator, np.array([1.0, 0.0]), T, IntegratorConfig(n_steps=n_steps, **RK4))
    return float(np.max(np.abs(out.final_state - [math.cos(T), -math.sin(T)])))


# ---------------------------------------------------------------------------
# configuration


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")
    with pytest.raises(ValueError):
        IntegratorConfig(method="rk4")
    with pytest.raises(ValueError):
        IntegratorConfig(abs_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(step=-1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(max_steps=0)
    assert IntegratorConfig(n_steps=10, **RK4).fixed_step(2.0) == 0.2


def test_config_roundtrip():
    cfg = IntegratorConfig(abs_tol=1e-10)
    assert IntegratorConfig(**cfg.to_dict()) == cfg


# ---------------------------------------------------------------------------
# analytic cases


@pytest.mark.parametrize("cfg", [IntegratorConfig(), IntegratorConfig(n_steps=37, **RK4)])
def test_zero_rhs_is_identity(cfg):
    y0 = np.array([1.5, -2.0, 3.25])
    out = integrate(zero_rhs, y0, 7.3, cfg)
    assert out.completed
    assert np.array_equal(out.final_state, y0)


def test_harmonic_oscillator_adaptive():
    out = integrate(oscillator, np.array([1.0, 0.0]), 2 * math.pi)
    assert out.completed
    assert abs(out.final_state[0] - 1.0) < 1e-10
    assert abs(out.final_state[1]) < 1e-10


def test_decoupled_circle_stays_circular():
    s0 = [1.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0]
    out = integrate_reduced(s0, 0.0, 4, 10.0)
    assert out.completed
    assert abs(out.final_state[0] - 1.0) < 1e-9
    assert out.final_state[2] == pytest.approx(5.0, abs=1e-9)


def test_decoupled_circle_drift():
    dL, dE = conservation_drift([1.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0], 0.0, 4, 10.0)
    assert dL < 1e-12 and dE < 1e-12


def test_rk4_order_exponent():
    steps = [50, 100, 200, 400, 800]
    errs = [rk4_error(n) for n in steps]
    p = -np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert 3.7 <= p <= 4.3


def test_rk4_drift_richardson():
    # halving the step cuts the energy drift by about 2^4
    z = Unknowns(*TABLE_60_N4)
    s0 = z.initial_state().as_array()
    coarse = conservation_drift(s0, z.m2, 4, z.T, IntegratorConfig(n_steps=200, **RK4), k=2)
    fine = conservation_drift(s0, z.m2, 4, z.T, IntegratorConfig(n_steps=400, **RK4), k=2)
    assert 12.0 < coarse[1] / fine[1] < 20.0


# ---------------------------------------------------------------------------
# sampling


def test_sample_endpoints_match_integrate():
    y0 = np.array([1.0, 0.0])
    traj = sample_trajectory(oscillator, y0, 3.0, k=2)
    assert np.array_equal(traj.times, [0.0, 3.0])
    assert np.array_equal(traj.states[-1], integrate(oscillator, y0, 3.0).final_state)


def test_restart_consistency():
    z = Unknowns(*TABLE_60_N4)
    s0 = z.initial_state().as_array()
    rhs = dynamics.reduced_rhs(4)
    half = integrate(rhs, s0, z.T / 2, params=(z.m2,)).final_state
    restarted = integrate(rhs, half, z.T / 2, params=(z.m2,)).final_state
    direct = integrate(rhs, s0, z.T, params=(z.m2,)).final_state
    assert np.max(np.abs(restarted - direct)) < 1e-9


def test_trajectory_shape_and_bounds():
    z = Unknowns(*TABLE_60_N4)
    traj = sample_trajectory(dynamics.reduced_rhs(4), z.initial_state().as_array(), z.T, k=51, params=(z.m2,))
    assert traj.states.shape == (51, 8)
    assert np.all(np.diff(traj.times) > 0)
    assert traj.times[-1] == z.T
    r = traj.states[:, :2]
    assert np.all(r > 0.1) and np.all(r < 10.0)


def test_sample_requires_two_points():
    with pytest.raises(ValueError):
        sample_trajectory(oscillator, np.array([1.0, 0.0]), 1.0, k=1)


# ---------------------------------------------------------------------------
# determinism and failures


def test_determinism_bitwise():
    z = Unknowns(*TABLE_90_N6)
    a = integrate_reduced(z.initial_state().as_array(), z.m2, 6, z.T)
    b = integrate_reduced(z.initial_state().as_array(), z.m2, 6, z.T)
    assert np.array_equal(a.final_state, b.final_state)
    assert a.steps_taken == b.steps_taken


def test_collapse_is_a_collision():
    z = Unknowns(1.0, 1.0, 0.0, 0.0, 1.0, 10.0)
    out = integrate_reduced(z.initial_state().as_array(), z.m2, 4, z.T)
    assert not out.completed
    assert out.failure == "collision"
    assert 0.0 < out.failure_time < 10.0
    assert out.final_state is None


def test_cartesian_collapse_breaches_floor():
    # the same initial state integrated as a full N-body system
    z = Unknowns(1.0, 1.0, 0.0, 0.0, 1.0, 10.0)
    c = dynamics.embed_cartesian(z.initial_state(), 4, z.m2)
    out = integrate_cartesian(c, z.T)
    assert out.failure == "collision"


def test_failure_monotonicity():
    s0 = Unknowns(1.0, 1.0, 0.0, 0.0, 1.0, 10.0).initial_state().as_array()
    t_star = integrate_reduced(s0, 1.0, 4, 10.0).failure_time
    for T in (t_star * 1.001, 20.0, 100.0):
        out = integrate_reduced(s0, 1.0, 4, T)
        assert not out.completed
        assert out.failure_time == pytest.approx(t_star, abs=1e-3)


def test_blowup_fails_before_singularity():
    out = integrate(blowup, np.array([1.0]), 2.0)
    assert not out.completed
    assert out.failure_time == pytest.approx(1.0, abs=1e-3)


def test_step_budget():
    out = integrate(oscillator, np.array([1.0, 0.0]), 100.0, IntegratorConfig(max_steps=5))
    assert out.failure == "step-budget"
    assert out.steps_taken <= 5


def test_sample_trajectory_raises_on_failure():
    s0 = Unknowns(1.0, 1.0, 0.0, 0.0, 1.0, 10.0).initial_state().as_array()
    with pytest.raises(IntegrationError) as info:
        sample_trajectory(dynamics.reduced_rhs(4), s0, 10.0, k=11, params=(1.0,))
    assert info.value.reason == "collision"


def test_rejects_nonpositive_horizon():
    with pytest.raises(ValueError):
        integrate(oscillator, np.array([1.0, 0.0]), 0.0)


def test_golden_row_drift(cfg):
    z = Unknowns(*TABLE_90_N6)
    dL, dE = conservation_drift(z.initial_state().as_array(), z.m2, 6, z.T, cfg)
    assert dL < 1e-9 and dE < 1e-9
