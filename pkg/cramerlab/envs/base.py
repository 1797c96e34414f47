"""
Environment abstraction for cramerlab.

Every environment, tabular or physical, exposes the same episodic API so
that samplers, learners and the coupling harness stay model-agnostic.
Each concrete environment documents how many stream draws a reset and a
step consume; those counts are constants, which keeps coupled streams
aligned draw-for-draw.
"""

from __future__ import annotations

import copy
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Optional

from cramerlab.errors import TerminalStateError

if TYPE_CHECKING:
    from cramerlab.envs.sampling import SampleSource


@dataclass(frozen=True)
class StepResult:
    """Outcome of one environment step."""

    observation: Any
    reward: float
    terminal: bool


class Environment(ABC):
    """
    Abstract base class for episodic environments.

    Subclasses implement _reset and _step; the base class tracks the
    current observation, the step counter and episode end (terminal or
    truncated at max_steps).

    Attributes:
        DRAWS_PER_RESET: Stream draws consumed by reset
        DRAWS_PER_STEP: Stream draws consumed by step
    """

    DRAWS_PER_RESET: int = 0
    DRAWS_PER_STEP: int = 0

    def __init__(self, name: str, n_actions: int, gamma: float, max_steps: Optional[int]) -> None:
        if not 0.0 <= gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
        if n_actions < 1:
            raise ValueError(f"need at least one action, got {n_actions}")
        self.name = name
        self.n_actions = n_actions
        self.gamma = float(gamma)
        self.max_steps = max_steps

        self.observation: Any = None
        self.pending_action: Optional[int] = None
        self.steps = 0
        self.terminated = False
        self.truncated = False

    @property
    @abstractmethod
    def r_max(self) -> float:
        """Bound on |reward|."""

    @property
    def value_bound(self) -> float:
        """R_MAX / (1 - gamma): the range any return can reach."""
        return self.r_max / (1.0 - self.gamma)

    @property
    def done(self) -> bool:
        return self.terminated or self.truncated

    @abstractmethod
    def _reset(self, source: SampleSource) -> Any:
        """Draw an initial observation."""

    @abstractmethod
    def _step(self, action: int, source: SampleSource) -> StepResult:
        """Advance from self.observation under action."""

    def reset(self, source: SampleSource) -> Any:
        """
        Start a new episode.

        Args:
            source: Stream to draw the initial state from

        Returns:
            The initial observation
        """
        self.observation = self._reset(source)
        self.pending_action = None
        self.steps = 0
        self.terminated = False
        self.truncated = False
        return self.observation

    def step(self, action: int, source: SampleSource) -> StepResult:
        """
        Apply action in the current state.

        Raises:
            TerminalStateError: If the episode has ended or never started
        """
        if self.observation is None or self.done:
            raise TerminalStateError(f"{self.name}: episode has ended, call reset first")
        if not 0 <= action < self.n_actions:
            raise ValueError(f"{self.name}: action {action} out of range")

        result = self._step(int(action), source)
        self.steps += 1
        self.observation = result.observation
        self.terminated = bool(result.terminal)
        self.truncated = (
            not self.terminated and self.max_steps is not None and self.steps >= self.max_steps
        )
        return result

    def copy(self) -> Environment:
        """Independent environment with the same model and episode position."""
        return copy.deepcopy(self)
