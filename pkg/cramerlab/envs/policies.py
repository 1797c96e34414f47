"""
Action-selection policies.

Every policy draws a fixed number of uniforms per action (DRAWS) no matter
which branch it takes, so coupled learners stay aligned on the stream even
when one explores and the other does not.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np

from cramerlab.envs.sampling import SampleSource
from cramerlab.errors import DivergenceError

TIE_TOL = 1e-9


def _require_finite(values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise DivergenceError(f"action values are not finite: {values}")


def greedy_action(values: Sequence[float] | np.ndarray, tie_tol: float = TIE_TOL) -> int:
    """
    Index of the largest value; values within tie_tol of the max tie and the
    lowest index among them wins.

    Learners whose expectations agree up to rounding pick the same action.

    Raises:
        ValueError: If values is empty
        DivergenceError: If any value is NaN or infinite
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("greedy_action needs at least one action")
    _require_finite(values)
    return int(np.flatnonzero(values >= values.max() - tie_tol)[0])


def epsilon_greedy(
    values: Sequence[float] | np.ndarray,
    epsilon: float,
    source: SampleSource,
    tie_tol: float = TIE_TOL,
) -> int:
    """
    Epsilon-greedy choice consuming exactly two draws.

    The first draw decides exploration, the second picks the uniform action.

    Raises:
        ValueError: If values is empty or epsilon is outside [0, 1]
        DivergenceError: If any value is NaN or infinite
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("epsilon_greedy needs at least one action")
    _require_finite(values)
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")

    explore = source.uniform() < epsilon
    u_action = source.uniform()
    if explore:
        return min(int(u_action * values.size), values.size - 1)
    return greedy_action(values, tie_tol)


class Policy(ABC):
    """Maps an observation to an action using draws from a SampleSource."""

    DRAWS: int = 1

    @abstractmethod
    def sample(self, observation: Any, source: SampleSource) -> int:
        """Draw an action for observation."""


@dataclass
class TabularPolicy(Policy):
    """
    Stationary stochastic policy over a finite state space.

    Attributes:
        probs: Array (n_states, n_actions) of action probabilities
    """

    probs: np.ndarray
    DRAWS = 1

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.ndim != 2:
            raise ValueError(f"policy table must be 2-d, got shape {self.probs.shape}")
        if np.any(self.probs < 0) or not np.allclose(self.probs.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("policy rows must be probability vectors")

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> TabularPolicy:
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def deterministic(cls, actions: Sequence[int], n_actions: int) -> TabularPolicy:
        probs = np.zeros((len(actions), n_actions))
        probs[np.arange(len(actions)), actions] = 1.0
        return cls(probs)

    @classmethod
    def random(cls, n_states: int, n_actions: int, rng: np.random.Generator) -> TabularPolicy:
        return cls(rng.dirichlet(np.ones(n_actions), size=n_states))

    @property
    def n_states(self) -> int:
        return int(self.probs.shape[0])

    @property
    def n_actions(self) -> int:
        return int(self.probs.shape[1])

    def action_probs(self, x: int) -> np.ndarray:
        return self.probs[x]

    def sample(self, observation: Any, source: SampleSource) -> int:
        return source.choice(self.probs[int(observation)])


class EpsilonGreedyPolicy(Policy):
    """
    Epsilon-greedy over a live value function.

    Args:
        values: Callable returning per-action values for an observation
        epsilon: Exploration rate, or a zero-argument callable giving the current rate
        tie_tol: Tolerance under which values count as tied
    """

    DRAWS = 2

    def __init__(
        self,
        values: Callable[[Any], np.ndarray],
        epsilon: Union[float, Callable[[], float]],
        tie_tol: float = TIE_TOL,
    ) -> None:
        self.values = values
        self.epsilon = epsilon
        self.tie_tol = tie_tol

    def current_epsilon(self) -> float:
        return float(self.epsilon() if callable(self.epsilon) else self.epsilon)

    def sample(self, observation: Any, source: SampleSource) -> int:
        values = self.values(observation)
        return epsilon_greedy(values, self.current_epsilon(), source, self.tie_tol)


def linear_epsilon(start: float, end: float, decay_steps: int, step: int) -> float:
    """Linear schedule from start to end over decay_steps, then flat."""
    if decay_steps <= 0:
        return end
    fraction = min(max(step, 0) / decay_steps, 1.0)
    return start + fraction * (end - start)


def action_probabilities(policy: Optional[Policy], n_states: int, n_actions: int) -> np.ndarray:
    """Probability table of a TabularPolicy, for model-based operators."""
    if not isinstance(policy, TabularPolicy):
        raise TypeError("policy evaluation needs a TabularPolicy")
    if policy.probs.shape != (n_states, n_actions):
        raise ValueError(f"policy shape {policy.probs.shape} != ({n_states}, {n_actions})")
    return policy.probs
