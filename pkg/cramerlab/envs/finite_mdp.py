"""
Finite MDPs: the tabular model (P, R, gamma) plus episodic stepping.

Ships three families: the 3-state chain, the 12x12 gridworld and seeded
random MDPs. Rewards are finite discrete laws per state-action pair.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from loguru import logger

from cramerlab.core import GeneralDiscrete
from cramerlab.envs.base import Environment, StepResult
from cramerlab.envs.sampling import SampleSource
from cramerlab.errors import TerminalStateError

PROB_TOL = 1e-12

MAX_RANDOM_STATES = 64
MAX_RANDOM_ACTIONS = 8
MAX_REWARD_ATOMS = 8


class FiniteMDP(Environment):
    """
    Tabular MDP with discrete reward laws.

    Stepping consumes two draws: the reward atom, then the next state.
    Resetting consumes one draw (the start state).

    Args:
        name: Identifier used in logs and reports
        transition: Array (S, A, S) with P(x'|x, a)
        reward_values: Array (S, A, M) of reward atoms
        reward_probs: Array (S, A, M) of their probabilities
        gamma: Discount in [0, 1)
        terminal: Boolean flags per state; terminal states end an episode
        start_probs: Initial state distribution (uniform when omitted)
        max_steps: Episode cap, None for continuing runs
    """

    DRAWS_PER_RESET = 1
    DRAWS_PER_STEP = 2

    def __init__(
        self,
        name: str,
        transition: np.ndarray,
        reward_values: np.ndarray,
        reward_probs: np.ndarray,
        gamma: float,
        terminal: Optional[np.ndarray] = None,
        start_probs: Optional[np.ndarray] = None,
        max_steps: Optional[int] = None,
    ) -> None:
        transition = np.asarray(transition, dtype=float)
        if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {transition.shape}")
        n_states, n_actions, _ = transition.shape
        super().__init__(name, n_actions, gamma, max_steps)

        reward_values = np.asarray(reward_values, dtype=float)
        reward_probs = np.asarray(reward_probs, dtype=float)
        if reward_values.shape != reward_probs.shape or reward_values.shape[:2] != (
            n_states,
            n_actions,
        ):
            raise ValueError("reward tables must have shape (S, A, M)")
        if np.any(transition < 0) or np.any(
            np.abs(transition.sum(axis=2) - 1.0) > PROB_TOL
        ):
            raise ValueError(f"{name}: each P(.|x,a) must sum to 1")
        if np.any(reward_probs < 0) or np.any(np.abs(reward_probs.sum(axis=2) - 1.0) > PROB_TOL):
            raise ValueError(f"{name}: each reward law must sum to 1")

        self.n_states = n_states
        self.transition = transition
        self.reward_values = reward_values
        self.reward_probs = reward_probs
        self.terminal = (
            np.zeros(n_states, dtype=bool) if terminal is None else np.asarray(terminal, dtype=bool)
        )
        self.start_probs = (
            np.full(n_states, 1.0 / n_states)
            if start_probs is None
            else np.asarray(start_probs, dtype=float)
        )

    @property
    def r_max(self) -> float:
        attainable = np.abs(self.reward_values)[self.reward_probs > 0]
        return float(attainable.max()) if attainable.size else 0.0

    def expected_reward(self) -> np.ndarray:
        """E[R(x, a)] as an (S, A) array."""
        return np.sum(self.reward_values * self.reward_probs, axis=2)

    def reward_law(self, x: int, a: int) -> GeneralDiscrete:
        keep = self.reward_probs[x, a] > 0
        return GeneralDiscrete.from_atoms(
            self.reward_values[x, a, keep], self.reward_probs[x, a, keep]
        )

    def continuation(self) -> np.ndarray:
        """Per next-state discount: gamma, or 0 for terminal states."""
        return np.where(self.terminal, 0.0, self.gamma)

    def _reset(self, source: SampleSource) -> int:
        return source.choice(self.start_probs)

    def _step(self, action: int, source: SampleSource) -> StepResult:
        x = int(self.observation)
        if self.terminal[x]:
            raise TerminalStateError(f"{self.name}: state {x} is terminal")
        atom = source.choice(self.reward_probs[x, action])
        reward = float(self.reward_values[x, action, atom])
        x_next = source.choice(self.transition[x, action])
        return StepResult(x_next, reward, bool(self.terminal[x_next]))


def _deterministic(
    n_states: int, n_actions: int, next_state: np.ndarray, reward: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    transition = np.zeros((n_states, n_actions, n_states))
    rows, cols = np.indices((n_states, n_actions))
    transition[rows, cols, next_state] = 1.0
    return transition, reward[..., None].astype(float), np.ones((n_states, n_actions, 1))


CHAIN_LEFT = 0
CHAIN_RIGHT = 1


def chain3(gamma: float = 0.9, max_steps: Optional[int] = 50) -> FiniteMDP:
    """
    Three states in a line, actions left/right, deterministic moves.

    Left in the leftmost state and right in the rightmost state pay +1 and
    keep the agent in place; every other move pays 0. Episodes start in the
    middle state.
    """
    next_state = np.array([[0, 1], [0, 2], [1, 2]])
    reward = np.zeros((3, 2))
    reward[0, CHAIN_LEFT] = 1.0
    reward[2, CHAIN_RIGHT] = 1.0
    transition, values, probs = _deterministic(3, 2, next_state, reward)
    return FiniteMDP(
        "chain3",
        transition,
        values,
        probs,
        gamma,
        start_probs=np.array([0.0, 1.0, 0.0]),
        max_steps=max_steps,
    )


GRID_ACTIONS = ((0, 1), (1, 0), (0, -1), (-1, 0))  # right, down, left, up


def gridworld(size: int = 12, gamma: float = 0.99, max_steps: Optional[int] = 500) -> FiniteMDP:
    """
    Open size x size grid from the top-left corner to a terminal goal in the
    bottom-right corner.

    Moves into a wall leave the agent in place. Entering the goal pays +1,
    every other step pays 0. State index is row * size + col.
    """
    n_states = size * size
    goal = n_states - 1
    next_state = np.zeros((n_states, len(GRID_ACTIONS)), dtype=int)
    reward = np.zeros((n_states, len(GRID_ACTIONS)))
    for state in range(n_states):
        row, col = divmod(state, size)
        for action, (d_row, d_col) in enumerate(GRID_ACTIONS):
            new_row = min(max(row + d_row, 0), size - 1)
            new_col = min(max(col + d_col, 0), size - 1)
            target = state if state == goal else new_row * size + new_col
            next_state[state, action] = target
            if target == goal and state != goal:
                reward[state, action] = 1.0

    transition, values, probs = _deterministic(n_states, len(GRID_ACTIONS), next_state, reward)
    terminal = np.zeros(n_states, dtype=bool)
    terminal[goal] = True
    start = np.zeros(n_states)
    start[0] = 1.0
    return FiniteMDP(
        f"gridworld{size}",
        transition,
        values,
        probs,
        gamma,
        terminal=terminal,
        start_probs=start,
        max_steps=max_steps,
    )


def random_finite_mdp(
    n_states: int,
    n_actions: int,
    n_reward_atoms: int = 2,
    seed: int = 0,
    gamma: float = 0.9,
    reward_range: tuple[float, float] = (-1.0, 1.0),
    reward_grid: Optional[Sequence[float]] = None,
    max_steps: Optional[int] = None,
) -> FiniteMDP:
    """
    Seeded random MDP with Dirichlet transition and reward-probability rows.

    Reward atoms are uniform on reward_range, or drawn from reward_grid when
    given (grid rewards with gamma = 1/2 keep unprojected supports exact).

    Raises:
        ValueError: If the sizes exceed the supported limits
    """
    if not 1 <= n_states <= MAX_RANDOM_STATES:
        raise ValueError(f"n_states must be in [1, {MAX_RANDOM_STATES}], got {n_states}")
    if not 1 <= n_actions <= MAX_RANDOM_ACTIONS:
        raise ValueError(f"n_actions must be in [1, {MAX_RANDOM_ACTIONS}], got {n_actions}")
    if not 1 <= n_reward_atoms <= MAX_REWARD_ATOMS:
        raise ValueError(f"n_reward_atoms must be in [1, {MAX_REWARD_ATOMS}], got {n_reward_atoms}")

    rng = np.random.default_rng(seed)
    transition = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    shape = (n_states, n_actions, n_reward_atoms)
    if reward_grid is not None:
        values = rng.choice(np.asarray(reward_grid, dtype=float), size=shape)
    else:
        values = rng.uniform(reward_range[0], reward_range[1], size=shape)
    probs = rng.dirichlet(np.ones(n_reward_atoms), size=(n_states, n_actions))

    logger.debug(
        f"random MDP seed={seed}: {n_states} states, {n_actions} actions, "
        f"{n_reward_atoms} reward atoms, gamma={gamma}"
    )
    return FiniteMDP(
        f"random_finite(seed={seed})",
        transition,
        values,
        probs,
        gamma,
        max_steps=max_steps,
    )
