"""
Tests for environments, sample streams, policies and feature maps.
"""

import numpy as np
import pytest

from cramerlab.envs import (
    Acrobot,
    CartPole,
    EpsilonGreedyPolicy,
    FourierBasis,
    SampleSource,
    TabularPolicy,
    TransitionSample,
    begin_episode,
    chain3,
    draws_per_transition,
    epsilon_greedy,
    fourier_feature_count,
    greedy_action,
    gridworld,
    linear_epsilon,
    make_env,
    one_hot_features,
    random_features,
    random_finite_mdp,
    sample_transition,
)
from cramerlab.errors import DimensionError, DivergenceError, TerminalStateError


def test_sample_source_is_deterministic():
    """Equal (seed, stream, counter) gives equal draws."""
    a = SampleSource(7)
    b = SampleSource(7)
    np.testing.assert_array_equal(a.uniforms(20), b.uniforms(20))
    assert a.counter == 20

    other = SampleSource(8)
    assert not np.array_equal(SampleSource(7).uniforms(5), other.uniforms(5))


def test_sample_source_jumps_and_clones():
    """at() and clone() resume exactly where a stream stands."""
    source = SampleSource(3)
    source.uniforms(10)
    clone = source.clone()
    jumped = SampleSource.at(3, 10)

    expected = source.uniforms(5)
    np.testing.assert_array_equal(clone.uniforms(5), expected)
    np.testing.assert_array_equal(jumped.uniforms(5), expected)


def test_spawned_streams_differ_from_parent():
    parent = SampleSource(1)
    child = parent.spawn(2)
    assert child.stream == (2,)
    assert not np.array_equal(SampleSource(1).uniforms(5), child.uniforms(5))


def test_sample_source_rejects_negative_seed():
    with pytest.raises(ValueError):
        SampleSource(-1)


def test_finite_mdp_draw_counts():
    """Reset plus first action uses 2 draws, each transition uses 3."""
    env = chain3()
    policy = TabularPolicy.uniform(3, 2)
    source = SampleSource(0)

    begin_episode(env, policy, source)
    assert source.counter == env.DRAWS_PER_RESET + policy.DRAWS == 2

    for step in range(1, 6):
        sample_transition(env, policy, source)
        assert source.counter == 2 + 3 * step, "each transition consumes a fixed number of draws"
    assert draws_per_transition(env, policy) == 3


def test_control_env_draw_counts():
    """CartPole steps draw nothing; the epsilon-greedy policy draws twice."""
    env = CartPole()
    policy = EpsilonGreedyPolicy(lambda obs: np.zeros(2), epsilon=0.5)
    source = SampleSource(0)

    begin_episode(env, policy, source)
    assert source.counter == 6
    sample_transition(env, policy, source)
    assert source.counter == 8


def test_coupled_streams_give_identical_transitions():
    """Two environments driven by equal sources produce equal samples."""
    policy = TabularPolicy.uniform(144, 4)
    env_a, env_b = gridworld(), gridworld()
    source_a, source_b = SampleSource(5), SampleSource(5)
    begin_episode(env_a, policy, source_a)
    begin_episode(env_b, policy, source_b)

    for _ in range(30):
        assert sample_transition(env_a, policy, source_a) == sample_transition(
            env_b, policy, source_b
        )


def test_chain3_dynamics():
    """Moving right from the middle reaches the right end, which then pays +1."""
    env = chain3()
    policy = TabularPolicy.deterministic([1, 1, 1], 2)
    source = SampleSource(0)
    assert begin_episode(env, policy, source) == 1

    first = sample_transition(env, policy, source)
    second = sample_transition(env, policy, source)

    assert (first.x, first.x_next, first.r) == (1, 2, 0.0)
    assert (second.x, second.x_next, second.r) == (2, 2, 1.0)
    assert env.value_bound == pytest.approx(10.0)


def test_chain3_truncates_at_step_cap():
    env = chain3(max_steps=4)
    policy = TabularPolicy.uniform(3, 2)
    source = SampleSource(2)
    begin_episode(env, policy, source)

    samples = [sample_transition(env, policy, source) for _ in range(4)]
    assert samples[-1].truncated and not samples[-1].terminal
    assert env.done
    with pytest.raises(TerminalStateError):
        sample_transition(env, policy, source)


def test_gridworld_shortest_path():
    """Right along the top row, then down the last column: 22 steps to the goal."""
    size = 12
    actions = [0 if col < size - 1 else 1 for row in range(size) for col in range(size)]
    env = gridworld(size=size)
    policy = TabularPolicy.deterministic(actions, 4)
    source = SampleSource(0)
    begin_episode(env, policy, source)

    rewards = []
    while not env.done:
        t = sample_transition(env, policy, source)
        rewards.append(t.r)

    assert len(rewards) == 22
    assert rewards[-1] == 1.0 and sum(rewards) == 1.0
    assert t.terminal and t.discount == 0.0
    assert t.x_next == size * size - 1


def test_gridworld_walls_keep_agent_in_place():
    env = gridworld()
    up_from_start = np.flatnonzero(env.transition[0, 3])
    assert list(up_from_start) == [0]


def test_transition_discount():
    t = TransitionSample(0, 0, 1.0, 1, 0, terminal=False, gamma=0.9)
    assert t.discount == 0.9
    assert TransitionSample(0, 0, 1.0, 1, 0, terminal=True, gamma=0.9).discount == 0.0


def test_random_mdp_is_seeded():
    a = random_finite_mdp(5, 3, seed=4)
    b = random_finite_mdp(5, 3, seed=4)
    np.testing.assert_array_equal(a.transition, b.transition)
    np.testing.assert_array_equal(a.reward_values, b.reward_values)
    np.testing.assert_allclose(a.transition.sum(axis=2), 1.0)

    with pytest.raises(ValueError):
        random_finite_mdp(100, 2)


def test_greedy_action_breaks_ties_low():
    """Values within the tie tolerance of the max go to the lowest index."""
    assert greedy_action([1.0, 1.0 + 1e-12, 0.5]) == 0
    assert greedy_action([0.0, 2.0, 2.0]) == 1
    with pytest.raises(ValueError):
        greedy_action([])


def test_epsilon_greedy_always_draws_twice():
    for epsilon in (0.0, 1.0):
        source = SampleSource(9)
        epsilon_greedy(np.array([0.0, 1.0]), epsilon, source)
        assert source.counter == 2, f"epsilon={epsilon} consumed {source.counter} draws"

    assert epsilon_greedy(np.array([0.0, 1.0]), 0.0, SampleSource(9)) == 1
    with pytest.raises(ValueError):
        epsilon_greedy(np.array([0.0]), 1.5, SampleSource(0))


def test_action_selection_rejects_non_finite_values():
    with pytest.raises(DivergenceError):
        greedy_action([np.nan, 1.0])
    with pytest.raises(DivergenceError):
        epsilon_greedy(np.array([0.0, np.inf]), 0.5, SampleSource(0))
    with pytest.raises(RuntimeError):
        greedy_action([-np.inf, 0.0])


def test_full_exploration_is_uniform():
    source = SampleSource(5)
    values = np.array([3.0, 1.0, 2.0, 0.0])
    counts = np.zeros(4)
    for _ in range(100_000):
        counts[epsilon_greedy(values, 1.0, source)] += 1
    np.testing.assert_allclose(counts / counts.sum(), 0.25, atol=0.01)


def test_sampled_transitions_follow_the_kernel():
    """Empirical next-state frequencies match P(.|x, a) within five standard errors."""
    mdp = random_finite_mdp(3, 2, seed=0)
    policy = TabularPolicy.uniform(3, 2)
    source = SampleSource(11)
    counts = np.zeros_like(mdp.transition)
    begin_episode(mdp, policy, source)
    for _ in range(100_000):
        t = sample_transition(mdp, policy, source)
        counts[t.x, t.a, t.x_next] += 1

    visits = counts.sum(axis=2, keepdims=True)
    assert visits.min() > 1_000
    p = mdp.transition
    tolerance = 5.0 * np.sqrt(p * (1.0 - p) / visits) + 1e-3
    assert np.all(np.abs(counts / visits - p) <= tolerance)


def test_linear_epsilon_schedule():
    assert linear_epsilon(1.0, 0.1, 100, 0) == 1.0
    assert linear_epsilon(1.0, 0.1, 100, 50) == pytest.approx(0.55)
    assert linear_epsilon(1.0, 0.1, 100, 500) == pytest.approx(0.1)


@pytest.mark.parametrize(
    "order,state_dim,expected", [(1, 4, 15), (2, 4, 80), (3, 4, 255), (4, 4, 624)]
)
def test_fourier_feature_counts(order, state_dim, expected):
    """(order + 1)^d - 1 features, the constant term dropped."""
    basis = FourierBasis(order, CartPole.bounds)
    assert fourier_feature_count(order, state_dim) == expected
    assert basis.n_features == expected
    assert basis(np.zeros(4)).shape == (expected,)


def test_fourier_features_are_bounded_cosines():
    basis = FourierBasis(2, Acrobot.bounds)
    phi = basis(np.full(6, 100.0))
    assert np.all(np.abs(phi) <= 1.0)
    with pytest.raises(DimensionError):
        basis(np.zeros(4))


def test_table_features():
    one_hot = one_hot_features(3, 2)
    assert one_hot.dim == 6
    np.testing.assert_array_equal(one_hot(1, 1), np.eye(6)[3])

    features = random_features(4, 2, 3, np.random.default_rng(0))
    assert np.all(features.all_features()[:, 0] == 1.0)
    assert features.all_features().shape == (8, 3)


def test_make_env():
    assert make_env("cartpole").state_dim == 4
    assert make_env("acrobot").state_dim == 6
    assert make_env("gridworld12").n_states == 144
    with pytest.raises(ValueError, match="Unknown environment"):
        make_env("pong")
    with pytest.raises(ValueError):
        make_env("chain3", bogus=1)


def test_env_copy_is_independent():
    env = CartPole()
    policy = EpsilonGreedyPolicy(lambda obs: np.zeros(2), epsilon=0.0)
    source = SampleSource(1)
    begin_episode(env, policy, source)
    twin = env.copy()

    sample_transition(env, policy, source)
    assert twin.steps == 0 and env.steps == 1
