"""
Seeded sample streams and the transition generator.

SampleSource is the coupling device: two learners that read from sources
with the same (seed, stream, counter) receive bit-identical samples. The
bit generator is numpy's PCG64 seeded through a SeedSequence; every
uniform draw consumes exactly one 64-bit output, so a source can jump to
any counter with PCG64.advance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Sequence, Tuple

import numpy as np

from cramerlab.envs.base import Environment
from cramerlab.errors import TerminalStateError

if TYPE_CHECKING:
    from cramerlab.envs.policies import Policy

_INV_2_53 = 1.0 / 9007199254740992.0


class SampleSource:
    """
    Deterministic uniform stream identified by (seed, stream, counter).

    Child streams from spawn never overlap their parent, so parallel seeds
    and independent consumers cannot share draws by accident.
    """

    ALGORITHM = "PCG64"

    def __init__(self, seed: int, stream: Sequence[int] = (), counter: int = 0) -> None:
        if seed < 0:
            raise ValueError(f"seed must be nonnegative, got {seed}")
        self.seed = int(seed)
        self.stream: Tuple[int, ...] = tuple(int(key) for key in stream)
        self._bit_generator = np.random.PCG64(
            np.random.SeedSequence(self.seed, spawn_key=self.stream)
        )
        self.counter = 0
        if counter:
            self._bit_generator.advance(int(counter))
            self.counter = int(counter)

    @classmethod
    def at(cls, seed: int, counter: int, stream: Sequence[int] = ()) -> SampleSource:
        """Source positioned after counter draws."""
        return cls(seed, stream, counter)

    def clone(self) -> SampleSource:
        """Independent source that will replay this source's suffix."""
        return SampleSource(self.seed, self.stream, self.counter)

    def spawn(self, key: int) -> SampleSource:
        """Child stream keyed by key, starting at counter 0."""
        return SampleSource(self.seed, self.stream + (int(key),))

    def uniform(self) -> float:
        """One draw in [0, 1)."""
        raw = int(self._bit_generator.random_raw())
        self.counter += 1
        return (raw >> 11) * _INV_2_53

    def uniforms(self, n: int) -> np.ndarray:
        """n draws in [0, 1)."""
        raw = self._bit_generator.random_raw(int(n))
        self.counter += int(n)
        return (raw >> np.uint64(11)).astype(float) * _INV_2_53

    def uniform_range(self, low: float, high: float, size: int) -> np.ndarray:
        return low + (high - low) * self.uniforms(size)

    def integer(self, n: int) -> int:
        """Uniform integer in [0, n) from one draw."""
        return min(int(self.uniform() * n), n - 1)

    def choice(self, probs: Sequence[float] | np.ndarray) -> int:
        """Index drawn from probs by inverse CDF, one draw."""
        cdf = np.cumsum(probs)
        index = int(np.searchsorted(cdf, self.uniform() * cdf[-1], side="right"))
        return min(index, len(cdf) - 1)

    def __repr__(self) -> str:
        return f"SampleSource(seed={self.seed}, stream={self.stream}, counter={self.counter})"


@dataclass(frozen=True, eq=False)
class TransitionSample:
    """
    One sampled transition (x, a, r, x', a').

    Attributes:
        x: State (index or observation vector)
        a: Action taken in x
        r: Reward received
        x_next: Next state
        a_next: Next action drawn from the policy at x_next
        terminal: x_next ends the episode; the bootstrap is dropped
        gamma: Discount of the environment the sample came from
        truncated: The episode was cut at its step cap (bootstrap kept)
    """

    x: Any
    a: int
    r: float
    x_next: Any
    a_next: int
    terminal: bool = False
    gamma: float = 0.0
    truncated: bool = False

    @property
    def discount(self) -> float:
        """gamma, or 0 on terminal transitions."""
        return 0.0 if self.terminal else self.gamma

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TransitionSample):
            return NotImplemented
        return (
            np.array_equal(self.x, other.x)
            and np.array_equal(self.x_next, other.x_next)
            and (self.a, self.r, self.a_next, self.terminal, self.gamma, self.truncated)
            == (other.a, other.r, other.a_next, other.terminal, other.gamma, other.truncated)
        )


def draws_per_transition(env: Environment, policy: Policy) -> int:
    """Stream draws one call of sample_transition consumes."""
    return env.DRAWS_PER_STEP + policy.DRAWS


def begin_episode(env: Environment, policy: Policy, source: SampleSource) -> Any:
    """
    Reset env and draw the first action.

    Consumes env.DRAWS_PER_RESET + policy.DRAWS draws.

    Returns:
        The initial observation
    """
    observation = env.reset(source)
    env.pending_action = policy.sample(observation, source)
    return observation


def sample_transition(env: Environment, policy: Policy, source: SampleSource) -> TransitionSample:
    """
    Generate the next transition of the current episode.

    The action a_t is the one drawn at the previous step (or at
    begin_episode); the environment step is followed by a draw of a_{t+1}
    from policy. Always consumes draws_per_transition(env, policy) draws.

    Raises:
        TerminalStateError: If no episode is running
    """
    if env.pending_action is None or env.done:
        raise TerminalStateError(f"{env.name}: no running episode, call begin_episode first")

    x = env.observation
    a = env.pending_action
    result = env.step(a, source)
    a_next = policy.sample(result.observation, source)
    env.pending_action = a_next

    return TransitionSample(
        x=x,
        a=a,
        r=float(result.reward),
        x_next=result.observation,
        a_next=a_next,
        terminal=result.terminal,
        gamma=env.gamma,
        truncated=env.truncated,
    )
