from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multistop.fixtures import bitcoin, raw_observation_matrix, synthetic_low
from multistop.model import (CONTINUE, MINE, MLR, DimensionError, ImpossibleObservationError,
                             InvalidInputError, PomdpModel, as_belief, belief_update,
                             build_augmented_model, filter_sequence, filter_step, is_tp2,
                             load_model, mlr_compare, mlr_geq, model_from_dict, model_to_dict,
                             predictive_update, reward_of_belief, save_model, tp2_violations,
                             validate_model)

from oracles import brute_minors, enumerate_posterior, random_model, random_tp2_model


def test_table1_validates():
    rep = validate_model(synthetic_low())
    assert rep.ok, str(rep)


def test_identity_transition_is_tp2():
    assert is_tp2(np.eye(4))


def test_anti_diagonal_not_tp2():
    assert not is_tp2([[0, 1], [1, 0]])
    assert tp2_violations([[0, 1], [1, 0]]) == [(1, 2, 1, 2)]


def test_table4_transition_tp2():
    assert is_tp2(bitcoin().transition)


def test_raw_observation_tp2():
    assert is_tp2(raw_observation_matrix())
    assert is_tp2(synthetic_low().observation)


def test_is_tp2_empty_raises():
    with pytest.raises(InvalidInputError):
        is_tp2(np.zeros((0, 0)))


@pytest.mark.parametrize("seed", range(20))
def test_is_tp2_matches_brute_minors(seed):
    rng = np.random.default_rng(seed)
    A = rng.dirichlet(np.ones(4), size=4)
    assert is_tp2(A) == (min(brute_minors(A)) >= -1e-12)


def test_mlr_examples():
    e1, e3 = np.eye(3)[0], np.eye(3)[2]
    assert mlr_compare(e3, e1) is MLR.GREATER
    assert mlr_compare([0.2, 0.3, 0.5], [0.5, 0.3, 0.2]) is MLR.GREATER
    assert mlr_compare([0.5, 0, 0.5], [0, 1, 0]) is MLR.INCOMPARABLE
    assert mlr_compare([0.2, 0.8], [0.2, 0.8]) is MLR.EQUAL
    with pytest.raises(DimensionError):
        mlr_geq([0.5, 0.5], [1, 0, 0])


def test_belief_update_raw_matrix():
    # the raw matrix, state distributions not renormalized
    m = synthetic_low()
    un, sigma = filter_step(m.transition, raw_observation_matrix(), np.full(3, 1 / 3), 0)
    # exact rational arithmetic as the reference
    F = Fraction
    P = [[F(str(v)) for v in row] for row in m.transition.tolist()]
    col = [F(str(v)) for v in raw_observation_matrix()[:, 0].tolist()]
    pred = [sum(F(1, 3) * P[i][j] for i in range(3)) for j in range(3)]
    exact = [col[j] * pred[j] for j in range(3)]
    s = sum(exact)
    assert sigma == pytest.approx(float(s), abs=1e-15)
    np.testing.assert_allclose(un / sigma, [float(e / s) for e in exact], atol=1e-15)
    # quoted to four places
    np.testing.assert_allclose(un / sigma, [0.3988, 0.5640, 0.0370], atol=5e-4)
    assert sigma == pytest.approx(0.1495, abs=1e-4)  # exact value 0.149425


def test_belief_update_identity_vertex():
    m = synthetic_low().replace(transition=np.eye(3))
    for y in range(1, 6):
        post, _ = belief_update(m, [0, 1, 0], y)
        np.testing.assert_array_equal(post, [0, 1, 0])


def test_belief_update_errors():
    m = synthetic_low()
    with pytest.raises(InvalidInputError):
        belief_update(m, [0.5, 0.5, 0.0], 6)
    with pytest.raises(DimensionError):
        belief_update(m, [0.5, 0.5], 1)
    with pytest.raises(InvalidInputError):
        belief_update(m, [0.5, 0.6, 0.0], 1)
    B = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    m2 = PomdpModel(np.eye(3), B, [1, 0.5, 0], 0.9, 1, [1, 0, 0])
    with pytest.raises(ImpossibleObservationError):
        belief_update(m2, [1, 0, 0], 2)


@pytest.mark.parametrize("seed", range(10))
def test_filter_sequence_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    ys = rng.integers(1, m.num_observations + 1, size=4)
    post = filter_sequence(m, ys)[-1]
    ref = enumerate_posterior(m.transition, m.observation, m.initial_belief, ys - 1)
    np.testing.assert_allclose(post, ref, atol=1e-12)


def test_predictive_update_matches_single_updates():
    m = synthetic_low()
    beliefs = np.random.default_rng(0).dirichlet(np.ones(3), size=7)
    post, sigma = predictive_update(m, beliefs)
    for i, b in enumerate(beliefs):
        for y in range(1, m.num_observations + 1):
            p, s = belief_update(m, b, y)
            np.testing.assert_allclose(post[i, y - 1], p, atol=1e-14)
            assert sigma[i, y - 1] == pytest.approx(s, abs=1e-15)
    np.testing.assert_allclose(sigma.sum(axis=1), 1.0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_filter_preserves_mlr(seed):
    rng = np.random.default_rng(seed)
    m = random_tp2_model(rng)
    a = rng.dirichlet(np.ones(3))
    ratio = np.cumprod(rng.uniform(1.0, 3.0, 3))  # increasing likelihood ratio
    b = a * ratio / (a * ratio).sum()  # b >=_r a by construction
    assert mlr_geq(b, a)
    post_a, _ = predictive_update(m, a[None])
    post_b, _ = predictive_update(m, b[None])
    for y in range(m.num_observations):
        assert mlr_geq(post_b[0, y], post_a[0, y], tol=1e-10)
        if y:
            assert mlr_geq(post_a[0, y], post_a[0, y - 1], tol=1e-10)


def test_reward_of_belief():
    assert reward_of_belief(synthetic_low(), [1, 0, 0], MINE) == pytest.approx(0.1)
    assert reward_of_belief(synthetic_low(), [0.2, 0.3, 0.5], CONTINUE) == 0.0
    assert reward_of_belief(bitcoin(), [0.5, 0.5, 0], MINE) == pytest.approx(0.5625)
    with pytest.raises(InvalidInputError):
        reward_of_belief(bitcoin(), [1, 0, 0], 3)


def test_augmented_single_stop():
    m = PomdpModel([[0.7, 0.3], [0.4, 0.6]], [[0.9, 0.1], [0.2, 0.8]], [1, 0], 0.9, 1, [1, 0])
    aug = build_augmented_model(m)
    assert aug.transition_mine.shape == (3, 3)
    np.testing.assert_array_equal(aug.transition_mine[:2], [[0, 0, 1], [0, 0, 1]])


def test_augmented_table1_stochastic():
    aug = build_augmented_model(synthetic_low())
    for M in (aug.transition_continue, aug.transition_mine):
        assert M.shape == (10, 10)
        np.testing.assert_allclose(M.sum(axis=1), 1.0, atol=1e-12)
    assert aug.index(2, 3) == 5 and aug.absorbing == 9


@pytest.mark.parametrize("seed", range(5))
def test_augmented_random_row_sums(seed):
    m = random_model(np.random.default_rng(seed), num_states=4).replace(num_stops=3)
    aug = build_augmented_model(m)
    for M in (aug.transition_continue, aug.transition_mine):
        np.testing.assert_allclose(M.sum(axis=1), 1.0, atol=1e-12)


def test_validate_reports_negative_entry_and_non_tp2():
    m = synthetic_low()
    P = m.transition.copy()
    P[0] = [1.2, -0.2, 0.0]
    rep = validate_model(m.replace(transition=P))
    assert not rep.ok and not rep.checks["transition row-stochastic"]
    B = m.observation[:, ::-1].copy()
    rep = validate_model(m.replace(observation=B))
    assert not rep.checks["observation TP2"]
    assert "(1, 2, 1, 2)" in rep.details["observation TP2"]


def test_dimension_mismatch():
    m = synthetic_low()
    with pytest.raises(DimensionError):
        m.replace(observation=np.ones((2, 5)) / 5)
    with pytest.raises(DimensionError):
        m.replace(reward_mine=[1, 2])


def test_model_round_trip(tmp_path):
    m = bitcoin()
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert back == m
    d = model_to_dict(m)
    d["transition"] = np.asarray(d["transition"]).ravel().tolist()
    assert model_from_dict(d) == m


def test_as_belief():
    np.testing.assert_array_equal(as_belief([0, 1]), [0, 1])
    with pytest.raises(InvalidInputError):
        as_belief([0.2, 0.2])
