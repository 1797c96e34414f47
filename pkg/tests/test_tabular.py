"""
Tests for tabular operators and sample updates.
"""

import numpy as np
import pytest

from cramerlab.core import Support
from cramerlab.coupling.propositions import pmf_counterexample_table
from cramerlab.envs import TabularPolicy, TransitionSample, chain3, random_finite_mdp
from cramerlab.errors import BracketError
from cramerlab.learners.tabular import (
    CategoricalZTable,
    ExactZTable,
    QTable,
    bellman_dist,
    bellman_dist_projected,
    bellman_expected,
    cdf_gradient_update,
    check_bracket,
    mixture_update,
    pmf_gradient_update,
    projected_sample_target,
    sarsa_update,
    sup_cramer_distance,
)

SUPPORT = Support.uniform(-10.0, 10.0, 51)


def _random_setting(seed, gamma=0.9):
    mdp = random_finite_mdp(4, 2, seed=seed, gamma=gamma)
    rng = np.random.default_rng(seed)
    q0 = QTable(rng.uniform(-1.0, 1.0, size=(4, 2)))
    policy = TabularPolicy.random(4, 2, rng)
    return mdp, q0, policy


def test_expected_operator_on_chain():
    """One application to zeros gives the expected rewards."""
    mdp = chain3()
    q = bellman_expected(QTable.zeros(3, 2), mdp, TabularPolicy.uniform(3, 2))
    np.testing.assert_allclose(q.values, [[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_expected_operator_fixed_point_is_the_linear_solve(seed):
    """Q = (I - gamma P_pi)^-1 r is fixed by T and reached by iterating it."""
    mdp, _, policy = _random_setting(seed)
    n = mdp.n_states * mdp.n_actions
    p_pi = np.einsum("xay,yb->xayb", mdp.transition, policy.probs).reshape(n, n)
    solved = np.linalg.solve(np.eye(n) - mdp.gamma * p_pi, mdp.expected_reward().ravel())
    solved = solved.reshape(mdp.n_states, mdp.n_actions)

    np.testing.assert_allclose(
        bellman_expected(QTable(solved), mdp, policy).values, solved, atol=1e-12
    )
    q = QTable.zeros(mdp.n_states, mdp.n_actions)
    for _ in range(400):
        q = bellman_expected(q, mdp, policy)
    np.testing.assert_allclose(q.values, solved, atol=1e-10)


def test_from_values_matches_q():
    q = QTable(np.array([[0.3, -2.25], [9.9, -10.0]]))
    z = CategoricalZTable.from_values(q, SUPPORT)
    np.testing.assert_allclose(z.expectations(), q.values, atol=1e-12)
    np.testing.assert_allclose(z.total_mass(), 1.0, atol=1e-12)


@pytest.mark.parametrize("mode", ["evaluation", "optimality"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_projected_operator_tracks_expected_operator(mode, seed):
    """Iterating Pi_C T_D keeps E[Z] equal to the iterates of T on Q."""
    mdp, q, policy = _random_setting(seed)
    z = CategoricalZTable.from_values(q, SUPPORT)

    for iteration in range(25):
        q = bellman_expected(q, mdp, policy, mode)
        z = bellman_dist_projected(z, mdp, policy, mode)
        gap = np.max(np.abs(z.expectations() - q.values))
        assert gap < 1e-10, f"iteration {iteration}: gap {gap}"


def test_exact_operator_tracks_expected_operator():
    """The unprojected operator on dyadic rewards matches T exactly."""
    mdp = random_finite_mdp(3, 2, seed=5, gamma=0.5, reward_grid=(-1.0, 0.0, 1.0))
    policy = TabularPolicy.uniform(3, 2)
    q = QTable.zeros(3, 2)
    z = ExactZTable.from_values(q)

    for _ in range(6):
        q = bellman_expected(q, mdp, policy)
        z = bellman_dist(z, mdp, policy)
    np.testing.assert_allclose(z.expectations(), q.values, atol=1e-12)
    assert z.max_support_size() > 1


def test_projected_operator_refuses_narrow_support():
    mdp, q, policy = _random_setting(0)
    narrow = Support.uniform(-1.0, 1.0, 11)
    with pytest.raises(BracketError):
        check_bracket(narrow, mdp)
    with pytest.raises(BracketError):
        bellman_dist_projected(CategoricalZTable.from_values(q, narrow), mdp, policy)


def test_narrow_support_drifts_without_the_bracket_check():
    """Returns of at least 5 on a [-2, 2] grid get clamped; a bracketing grid stays exact."""
    mdp = random_finite_mdp(4, 2, seed=3, gamma=0.9, reward_range=(0.5, 1.0))
    policy = TabularPolicy.uniform(4, 2)
    q = QTable.zeros(4, 2)
    narrow = CategoricalZTable.from_values(q, Support.uniform(-2.0, 2.0, 41))
    wide = CategoricalZTable.from_values(q, SUPPORT)

    for _ in range(100):
        q = bellman_expected(q, mdp, policy)
        narrow = bellman_dist_projected(narrow, mdp, policy, enforce_bracket=False)
        wide = bellman_dist_projected(wide, mdp, policy)

    assert np.max(np.abs(wide.expectations() - q.values)) < 1e-10
    assert np.max(np.abs(narrow.expectations() - q.values)) > 1.0
    assert np.all(narrow.expectations() <= 2.0 + 1e-12)


def test_projected_operator_does_not_expand():
    """Evaluation-mode iterates of two tables never move further apart."""
    mdp, q, policy = _random_setting(3)
    z1 = CategoricalZTable.from_values(q, SUPPORT)
    z2 = CategoricalZTable.from_values(QTable(-q.values), SUPPORT)

    distance = sup_cramer_distance(z1, z2)
    for _ in range(10):
        z1 = bellman_dist_projected(z1, mdp, policy)
        z2 = bellman_dist_projected(z2, mdp, policy)
        new_distance = sup_cramer_distance(z1, z2)
        assert new_distance <= distance + 1e-12
        distance = new_distance


def test_sample_updates_touch_one_entry():
    """Only Z(x, a) changes; every other entry stays bit-identical."""
    mdp, q, _ = _random_setting(1)
    z = CategoricalZTable.from_values(q, SUPPORT)
    t = TransitionSample(2, 1, 0.5, 3, 0, gamma=0.9)

    updated_q = sarsa_update(q, t, 0.3)
    updated_z = mixture_update(z, t, 0.3, projected=True)

    mask = np.ones((4, 2), dtype=bool)
    mask[2, 1] = False
    np.testing.assert_array_equal(updated_q.values[mask], q.values[mask])
    np.testing.assert_array_equal(updated_z.mass[mask], z.mass[mask])
    expected = 0.7 * q.values[2, 1] + 0.3 * (0.5 + 0.9 * q.values[3, 0])
    assert updated_q.values[2, 1] == pytest.approx(expected)


def test_projected_mixture_matches_sarsa():
    mdp, q, _ = _random_setting(4)
    z = CategoricalZTable.from_values(q, SUPPORT)
    samples = [
        TransitionSample(0, 1, -0.25, 1, 1, gamma=0.9),
        TransitionSample(1, 1, 0.75, 3, 0, gamma=0.9),
        TransitionSample(3, 0, 0.1, 0, 1, terminal=True, gamma=0.9),
    ]
    for t in samples:
        q = sarsa_update(q, t, 0.5)
        z = mixture_update(z, t, 0.5, projected=True)
    np.testing.assert_allclose(z.expectations(), q.values, atol=1e-12)


def test_unprojected_mixture_matches_sarsa():
    q = QTable(np.array([[0.5, -0.5], [1.0, 0.0]]))
    z = ExactZTable.from_values(q)
    for t in (
        TransitionSample(0, 0, 1.0, 1, 0, gamma=0.5),
        TransitionSample(1, 1, -1.0, 0, 1, gamma=0.5),
        TransitionSample(0, 0, 0.0, 1, 1, gamma=0.5),
    ):
        q = sarsa_update(q, t, 0.25)
        z = mixture_update(z, t, 0.25, projected=False)
    np.testing.assert_allclose(z.expectations(), q.values, atol=1e-12)


def test_mixture_table_kind_mismatch():
    q = QTable.zeros(2, 2)
    t = TransitionSample(0, 0, 0.0, 1, 0, gamma=0.5)
    with pytest.raises(TypeError):
        mixture_update(ExactZTable.from_values(q), t, 0.1, projected=True)
    with pytest.raises(TypeError):
        mixture_update(CategoricalZTable.from_values(q, SUPPORT), t, 0.1, projected=False)


def test_cdf_gradient_equals_projected_mixture():
    """A CDF gradient step of alpha / 2c is the projected mixture step alpha."""
    _, q, _ = _random_setting(6)
    z = CategoricalZTable.from_values(q, SUPPORT)
    t = TransitionSample(1, 0, 0.3, 2, 1, gamma=0.9)
    alpha = 0.4
    c = SUPPORT.require_spacing()

    by_gradient = cdf_gradient_update(z, t, alpha / (2.0 * c))
    by_mixture = mixture_update(z, t, alpha, projected=True)
    np.testing.assert_allclose(by_gradient.mass, by_mixture.mass, atol=1e-12)


def test_q_learning_bootstraps_from_greedy_action():
    q = QTable(np.array([[0.0, 0.0], [1.0, 3.0]]))
    t = TransitionSample(0, 0, 0.0, 1, 0, gamma=0.5)
    assert sarsa_update(q, t, 1.0).values[0, 0] == pytest.approx(0.5)
    assert sarsa_update(q, t, 1.0, q_learning=True).values[0, 0] == pytest.approx(1.5)

    z = CategoricalZTable.from_values(q, SUPPORT)
    target = projected_sample_target(z, t, q_learning=True)
    assert target.expectation() == pytest.approx(1.5, abs=1e-12)


def test_step_size_must_be_a_probability():
    with pytest.raises(ValueError):
        sarsa_update(QTable.zeros(1, 1), TransitionSample(0, 0, 0.0, 0, 0, gamma=0.5), 1.5)


def test_pmf_gradient_breaks_expectation():
    """On the signed counterexample table the PMF step moves E[Z] while Q stays put."""
    z = pmf_counterexample_table()
    q = QTable(z.expectations())
    t = TransitionSample(0, 0, 0.0, 1, 0, gamma=0.75)
    alpha = 0.3

    assert z.expectations()[0, 0] == pytest.approx(1.0)
    assert projected_sample_target(z, t).expectation() == pytest.approx(1.0)
    np.testing.assert_allclose(projected_sample_target(z, t).mass, [0.5, 0.0, 0.5], atol=1e-12)

    assert sarsa_update(q, t, alpha).values[0, 0] == pytest.approx(1.0)
    after = pmf_gradient_update(z, t, alpha)
    assert after.expectations()[0, 0] == pytest.approx(1.0 - alpha / 3.0, abs=1e-12)
    np.testing.assert_allclose(
        after.mass[0, 0], [1 / 3, 1 / 3 - alpha / 3, 1 / 3], atol=1e-12
    )
