import numpy as np
import pytest

from multistop.fixtures import SPSA_GAINS_SYNTHETIC, synthetic_low
from multistop.linear import check_feasible, from_spherical
from multistop.spsa import (SpsaConfig, TrainingError, estimate_gradient, gain_schedule, spsa_maximize,
                            train)
from multistop.vi import solve_value_iteration


def test_gain_schedule_values():
    cfg = SpsaConfig.from_gains(SPSA_GAINS_SYNTHETIC)
    a, c = gain_schedule(cfg, 0)
    assert a == pytest.approx(0.7 * 1.1**-0.6, abs=1e-15)
    assert c == pytest.approx(0.1, abs=1e-15)
    a, c = gain_schedule(cfg, 99)
    assert a == pytest.approx(0.7 * (100.1) ** -0.6, rel=1e-12)
    assert c == pytest.approx(0.1 * 100**-0.6, rel=1e-12)
    assert gain_schedule(SpsaConfig(epsilon=1, varsigma=1e-300, kappa=1), 0)[0] == pytest.approx(1.0)


def test_config_rejects_bad_exponents():
    with pytest.raises(ValueError):
        SpsaConfig(kappa=0.5)
    with pytest.raises(ValueError):
        SpsaConfig(psi=0)


def test_maximizes_quadratic():
    target = np.array([1.0, -2.0, 0.5])

    def ev(xp, xm, seed):
        return -np.sum((xp - target) ** 2), -np.sum((xm - target) ** 2)

    cfg = SpsaConfig(epsilon=0.5, num_iterations=500, seed=1)
    x, trace = spsa_maximize(ev, np.zeros(3), cfg)
    np.testing.assert_allclose(x, target, atol=0.05)
    assert len(trace) == 500


def test_non_finite_aborts_with_trace():
    def ev(xp, xm, seed):
        return float("nan"), 0.0

    with pytest.raises(TrainingError) as err:
        spsa_maximize(ev, np.zeros(2), SpsaConfig(num_iterations=5))
    assert len(err.value.trace) == 1


def test_flat_objective_zero_gradient():
    m = synthetic_low().replace(reward_mine=[0, 0, 0])
    g = estimate_gradient(m, np.ones((3, 2)), 0.1, 200, np.random.default_rng(0))
    np.testing.assert_array_equal(g, 0)


def test_gradient_reproducible():
    m = synthetic_low()
    g1 = estimate_gradient(m, np.ones((3, 2)), 0.1, 300, np.random.default_rng(5))
    g2 = estimate_gradient(m, np.ones((3, 2)), 0.1, 300, np.random.default_rng(5))
    np.testing.assert_array_equal(g1, g2)


def test_zero_iterations_is_identity():
    phi = np.random.default_rng(0).normal(size=(3, 2))
    pol, trace = train(synthetic_low(), SpsaConfig(num_iterations=0), phi)
    np.testing.assert_array_equal(pol.theta, from_spherical(phi).theta)
    assert len(trace) == 0


def test_short_training_feasible_and_trace_text():
    pol, trace = train(synthetic_low(), SpsaConfig(num_iterations=20, rollouts_per_eval=200, seed=3))
    assert check_feasible(pol).ok
    text = trace.to_text().splitlines()
    assert text[0] == "iteration,a_n,c_n,J" and len(text) == 21
    assert trace.smoothed().shape == (20,)


def test_trained_policy_agrees_with_vi_at_start():
    m = synthetic_low()
    pol, _ = train(m, SpsaConfig.from_gains(SPSA_GAINS_SYNTHETIC, num_iterations=100, seed=0))
    table = solve_value_iteration(m)
    assert pol.decide(m.initial_belief, 1) == table.as_policy().decide(m.initial_belief, 1)
