"""
Lite deep-RL agents: DQN-lite, C51-lite and S51-lite.

All three share one MLPAgent shell (online and target networks, replay
memory, optimizer, epsilon-greedy behaviour) and differ only in the
output head and the loss:

    dqn   one scalar per action, squared TD error
    c51   K softmax logits per action, cross-entropy to the projected target
    s51   K linear masses per action, squared Cramér distance to the
          projected target, stepped along the CDF or the PMF direction

With no hidden layers the network is linear in its input features, which
is how the agents run on a Fourier basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from cramerlab.core import Support, cdf_direction, pmf_direction, project_atoms_batch, to_pmf
from cramerlab.envs.base import Environment
from cramerlab.envs.policies import TIE_TOL, EpsilonGreedyPolicy, linear_epsilon
from cramerlab.envs.sampling import SampleSource, TransitionSample, begin_episode, sample_transition
from cramerlab.errors import ConfigError, DimensionError, DivergenceError
from cramerlab.learners.networks import MLP, make_optimizer

HEADS = ("dqn", "c51", "s51")
GRAD_MODES = ("cdf", "pmf")
S51_INITS = ("mass-preserving", "random")
REPLAY_STREAM = 1

ALGORITHMS: Dict[str, Dict[str, Any]] = {
    "dqn-lite": {"head": "dqn"},
    "c51-lite": {"head": "c51"},
    "s51-lite-cdf": {"head": "s51", "grad_wrt": "cdf"},
    "s51-lite-pmf": {"head": "s51", "grad_wrt": "pmf"},
}

Encoder = Callable[[Any], np.ndarray]


@dataclass
class AgentConfig:
    """
    Hyperparameters of a lite agent.

    Attributes:
        head: "dqn", "c51" or "s51"
        hidden: Hidden layer widths; () makes the network linear
        use_bias: Bias vectors in every layer
        learning_rate: Optimizer step size; S51 in CDF mode divides it by 2c
        optimizer: "adam" or "sgd"
        batch_size: Transitions per training step
        buffer_capacity: Replay memory size
        target_sync: Training steps between target-network copies
        n_atoms: Atoms of the categorical heads
        v_max: Support half-width; defaults to the environment's R_MAX/(1-gamma)
        grad_wrt: S51 update direction, "cdf" or "pmf"
        s51_init: "mass-preserving" (every output sums to 1) or "random"
        epsilon_start: Initial exploration rate
        epsilon_end: Final exploration rate
        epsilon_decay_steps: Environment steps of the linear decay
        seed: Seed of the weight initialization and the replay stream
    """

    head: str = "dqn"
    hidden: Tuple[int, ...] = (64, 64)
    use_bias: bool = True
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    batch_size: int = 128
    buffer_capacity: int = 50_000
    target_sync: int = 10
    n_atoms: int = 51
    v_max: Optional[float] = None
    grad_wrt: str = "cdf"
    s51_init: str = "mass-preserving"
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 10_000
    seed: int = 0

    def __post_init__(self) -> None:
        self.hidden = tuple(int(width) for width in self.hidden)
        if self.head not in HEADS:
            raise ConfigError(f"Unknown head: {self.head}. Valid options: {', '.join(HEADS)}")
        if self.grad_wrt not in GRAD_MODES:
            raise ConfigError(f"grad_wrt must be one of {GRAD_MODES}, got {self.grad_wrt}")
        if self.s51_init not in S51_INITS:
            raise ConfigError(f"s51_init must be one of {S51_INITS}, got {self.s51_init}")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ConfigError(
                f"need 1 <= batch_size <= buffer_capacity, got {self.batch_size}, "
                f"{self.buffer_capacity}"
            )
        if self.target_sync < 1:
            raise ConfigError(f"target_sync must be positive, got {self.target_sync}")
        if self.n_atoms < 2:
            raise ConfigError(f"categorical heads need at least 2 atoms, got {self.n_atoms}")

    @classmethod
    def from_algorithm(cls, algorithm: str, **overrides: Any) -> AgentConfig:
        """
        Raises:
            ConfigError: If algorithm is not a lite agent name
        """
        if algorithm not in ALGORITHMS:
            raise ConfigError(
                f"Unknown algorithm: {algorithm}. Valid options: {', '.join(ALGORITHMS)}"
            )
        return cls(**{**ALGORITHMS[algorithm], **overrides})


@dataclass
class Batch:
    """A minibatch of encoded transitions."""

    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    discounts: np.ndarray

    def __len__(self) -> int:
        return int(self.actions.shape[0])


class ReplayBuffer:
    """
    Ring buffer of encoded transitions with uniform sampling.

    Storage is allocated on the first push, once the feature width is known.
    """

    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self._size = 0
        self._next = 0
        self._obs: Optional[np.ndarray] = None
        self._next_obs: Optional[np.ndarray] = None
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity)
        self._discounts = np.zeros(capacity)

    def __len__(self) -> int:
        return self._size

    def push(
        self, obs: np.ndarray, action: int, reward: float, next_obs: np.ndarray, discount: float
    ) -> None:
        if self._obs is None or self._next_obs is None:
            self._obs = np.zeros((self.capacity, obs.size))
            self._next_obs = np.zeros((self.capacity, obs.size))
        i = self._next
        self._obs[i] = obs
        self._next_obs[i] = next_obs
        self._actions[i] = action
        self._rewards[i] = reward
        self._discounts[i] = discount
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, source: SampleSource) -> Batch:
        """Draw batch_size indices with replacement, one stream draw each."""
        if self._size == 0 or self._obs is None or self._next_obs is None:
            raise ValueError("cannot sample from an empty replay buffer")
        draws = source.uniforms(batch_size) * self._size
        idx = np.minimum(draws.astype(np.int64), self._size - 1)
        return Batch(
            self._obs[idx],
            self._actions[idx],
            self._rewards[idx],
            self._next_obs[idx],
            self._discounts[idx],
        )


@dataclass
class LossResult:
    """Loss value and parameter gradients aligned with MLP.parameters()."""

    loss: float
    grads: List[np.ndarray]


@dataclass
class StepStats:
    transition: TransitionSample
    loss: Optional[float]
    episode_done: bool


@dataclass
class EpisodeStats:
    episode_return: float
    length: int
    losses: List[float] = field(default_factory=list)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def greedy_rows(values: np.ndarray, tie_tol: float = TIE_TOL) -> np.ndarray:
    """Per-row greedy action with the lowest-index tie rule."""
    return np.argmax(values >= values.max(axis=1, keepdims=True) - tie_tol, axis=1)


def identity_encoder(observation: Any) -> np.ndarray:
    return np.atleast_1d(np.asarray(observation, dtype=float))


class MLPAgent:
    """
    Online/target network pair with replay and epsilon-greedy behaviour.

    Args:
        config: Agent hyperparameters
        input_dim: Width of encoded observations
        n_actions: Number of actions
        encoder: Maps an observation to the network input
        v_max: Support half-width when config.v_max is unset
        replay_source: Stream for minibatch indices; defaults to the seed's
            replay stream
    """

    def __init__(
        self,
        config: AgentConfig,
        input_dim: int,
        n_actions: int,
        encoder: Optional[Encoder] = None,
        v_max: Optional[float] = None,
        replay_source: Optional[SampleSource] = None,
    ) -> None:
        self.config = config
        self.n_actions = n_actions
        self.encoder = encoder or identity_encoder

        self.support: Optional[Support] = None
        if config.head != "dqn":
            half_width = config.v_max if config.v_max is not None else v_max
            if half_width is None or half_width <= 0:
                raise ConfigError("categorical heads need a positive v_max")
            self.support = Support.uniform(-half_width, half_width, config.n_atoms)

        width = n_actions if config.head == "dqn" else n_actions * config.n_atoms
        rng = np.random.default_rng(config.seed)
        self.online = MLP(input_dim, width, config.hidden, config.use_bias, rng)
        if config.head == "s51" and config.s51_init == "mass-preserving":
            self._preserve_mass(rng)
        self.target = self.online.copy()

        self.optimizer = make_optimizer(config.optimizer, self.step_size())
        self.buffer = ReplayBuffer(config.buffer_capacity)
        self.replay_source = replay_source or SampleSource(config.seed, (REPLAY_STREAM,))
        self.env_steps = 0
        self.train_steps = 0
        self.policy = EpsilonGreedyPolicy(self.values, self.epsilon)

    @classmethod
    def for_env(
        cls,
        config: AgentConfig,
        env: Environment,
        encoder: Optional[Encoder] = None,
        input_dim: Optional[int] = None,
        replay_source: Optional[SampleSource] = None,
    ) -> MLPAgent:
        """Size the agent for env; input_dim defaults to the encoder's output width."""
        encoder = encoder or identity_encoder
        if input_dim is None:
            probe = env.observation
            if probe is None:
                raise DimensionError("input_dim is required before the environment is reset")
            input_dim = int(encoder(probe).size)
        return cls(config, input_dim, env.n_actions, encoder, env.value_bound, replay_source)

    def _preserve_mass(self, rng: np.random.Generator) -> None:
        """Make every action's K outputs sum to exactly 1 for all inputs."""
        last = self.online.layers[-1]
        if last.bias is None:
            raise ConfigError("mass-preserving S51 initialization needs use_bias")
        k = self.config.n_atoms
        for a in range(self.n_actions):
            block = slice(a * k, (a + 1) * k)
            last.weight[:, block] -= last.weight[:, block].mean(axis=1, keepdims=True)
            noise = last.bias[block] - last.bias[block].mean()
            last.bias[block] = 1.0 / k + noise
        logger.debug(f"S51 head initialized mass-preserving over {k} atoms")

    def step_size(self) -> float:
        """
        Optimizer learning rate.

        S51 in CDF mode steps at learning_rate / 2c, which moves its
        expectations on the same scale as a dqn head at learning_rate.
        """
        if self.config.head == "s51" and self.config.grad_wrt == "cdf":
            assert self.support is not None
            return self.config.learning_rate / (2.0 * self.support.require_spacing())
        return self.config.learning_rate

    def epsilon(self) -> float:
        c = self.config
        return linear_epsilon(c.epsilon_start, c.epsilon_end, c.epsilon_decay_steps, self.env_steps)

    def encode(self, observation: Any) -> np.ndarray:
        return np.asarray(self.encoder(observation), dtype=float)

    def head_output(self, out: np.ndarray) -> np.ndarray:
        """Raw outputs reshaped to (B, A) for dqn or (B, A, K) for categorical heads."""
        if self.config.head == "dqn":
            return out
        return out.reshape(out.shape[0], self.n_actions, self.config.n_atoms)

    def distributions(self, out: np.ndarray) -> np.ndarray:
        """(B, A, K) masses of a categorical head."""
        head = self.head_output(out)
        return softmax(head) if self.config.head == "c51" else head

    def expectations(self, out: np.ndarray) -> np.ndarray:
        """(B, A) action values from raw network outputs."""
        if self.config.head == "dqn":
            return out
        assert self.support is not None
        return self.distributions(out) @ self.support.atoms

    def batch_values(self, features: np.ndarray, target: bool = False) -> np.ndarray:
        net = self.target if target else self.online
        return self.expectations(net(np.atleast_2d(features)))

    def values(self, observation: Any) -> np.ndarray:
        """Online-network action values of one observation."""
        return self.batch_values(self.encode(observation)[None, :])[0]

    def observe(self, t: TransitionSample) -> None:
        """Store a transition and advance the exploration schedule."""
        self.buffer.push(self.encode(t.x), t.a, t.r, self.encode(t.x_next), t.discount)
        self.env_steps += 1

    def loss(self, batch: Batch) -> LossResult:
        if self.config.head == "dqn":
            return dqn_lite_loss(self, batch)
        if self.config.head == "c51":
            return c51_lite_loss(self, batch)
        return s51_lite_loss(self, batch, self.config.grad_wrt)

    def learn(self, batch: Optional[Batch] = None) -> float:
        """
        One optimizer step on a replay batch, then a target sync every
        target_sync steps.

        Raises:
            DivergenceError: If the loss is not finite; parameters are left untouched
        """
        if batch is None:
            batch = self.buffer.sample(self.config.batch_size, self.replay_source)
        result = self.loss(batch)
        if not np.isfinite(result.loss):
            raise DivergenceError(
                f"{self.config.head} loss is {result.loss} after {self.train_steps} training steps"
            )
        self.optimizer.step(self.online.parameters(), result.grads)
        self.train_steps += 1
        if self.train_steps % self.config.target_sync == 0:
            self.target.load_from(self.online)
        return result.loss


def _check_batch(batch: Batch) -> None:
    if len(batch) == 0:
        raise ValueError("loss needs a non-empty batch")


def _projected_targets(agent: MLPAgent, batch: Batch) -> np.ndarray:
    """Pi_C(r + gamma Z_target(x', a*)) per sample, a* greedy on target expectations."""
    assert agent.support is not None
    next_out = agent.target(batch.next_obs)
    next_dists = agent.distributions(next_out)
    a_star = greedy_rows(agent.expectations(next_out))
    rows = np.arange(len(batch))
    locations = batch.rewards[:, None] + batch.discounts[:, None] * agent.support.atoms[None, :]
    return project_atoms_batch(locations, next_dists[rows, a_star], agent.support)


def dqn_lite_loss(agent: MLPAgent, batch: Batch) -> LossResult:
    """
    Half mean squared TD error against r + gamma max_a' Q_target(x', a').

    Raises:
        ValueError: If the batch is empty
    """
    _check_batch(batch)
    q, activations = agent.online.forward(batch.obs)
    next_q = agent.target(batch.next_obs)
    rows = np.arange(len(batch))
    targets = batch.rewards + batch.discounts * next_q[rows, greedy_rows(next_q)]
    td = q[rows, batch.actions] - targets

    grad_out = np.zeros_like(q)
    grad_out[rows, batch.actions] = td / len(batch)
    return LossResult(0.5 * float(np.mean(td**2)), agent.online.backward(activations, grad_out))


def c51_lite_loss(agent: MLPAgent, batch: Batch) -> LossResult:
    """
    Cross-entropy between the projected target and the softmax prediction.

    Raises:
        ValueError: If the batch is empty
    """
    _check_batch(batch)
    out, activations = agent.online.forward(batch.obs)
    logits = agent.head_output(out)
    rows = np.arange(len(batch))
    chosen = logits[rows, batch.actions]
    target = _projected_targets(agent, batch)

    loss = -float(np.mean(np.sum(target * log_softmax(chosen), axis=-1)))
    grad_logits = np.zeros_like(logits)
    grad_logits[rows, batch.actions] = (
        softmax(chosen) * target.sum(axis=-1, keepdims=True) - target
    ) / len(batch)
    grads = agent.online.backward(activations, grad_logits.reshape(out.shape))
    return LossResult(loss, grads)


def s51_lite_loss(agent: MLPAgent, batch: Batch, grad_wrt: str = "cdf") -> LossResult:
    """
    Squared Cramér distance between the predicted masses and the projected target.

    grad_wrt="pmf" returns the exact gradient of the loss with respect to
    the parameters. grad_wrt="cdf" backpropagates the CDF-space step
    C^-1 2c (F - F_target) instead. MLPAgent runs that mode at
    learning_rate / 2c, which on a linear head with SGD is the linear
    semi-gradient CDF update.

    Raises:
        ValueError: If the batch is empty or grad_wrt is unknown
    """
    _check_batch(batch)
    if grad_wrt not in GRAD_MODES:
        raise ValueError(f"grad_wrt must be one of {GRAD_MODES}, got {grad_wrt}")
    assert agent.support is not None
    c = agent.support.require_spacing()

    out, activations = agent.online.forward(batch.obs)
    masses = agent.head_output(out)
    rows = np.arange(len(batch))
    cdf = np.cumsum(masses[rows, batch.actions], axis=-1)
    target_cdf = np.cumsum(_projected_targets(agent, batch), axis=-1)
    loss = float(np.mean(np.sum(c * (cdf - target_cdf)[:, :-1] ** 2, axis=-1)))

    if grad_wrt == "pmf":
        chosen_grad = -pmf_direction(cdf, target_cdf, c)
    else:
        chosen_grad = -to_pmf(cdf_direction(cdf, target_cdf, c))
    grad_masses = np.zeros_like(masses)
    grad_masses[rows, batch.actions] = chosen_grad / len(batch)
    grads = agent.online.backward(activations, grad_masses.reshape(out.shape))
    return LossResult(loss, grads)


def mirror_expectations(source: MLPAgent, target: MLPAgent) -> None:
    """
    Set a dqn agent's networks to reproduce a categorical agent's expectations.

    Hidden layers are copied and each action's output column becomes the
    atom-weighted sum of that action's K mass columns, so both agents
    start with identical action values on every input.

    Raises:
        ConfigError: If the heads or architectures are incompatible
    """
    if source.config.head != "s51" or target.config.head != "dqn":
        raise ConfigError("mirror_expectations maps an s51 agent onto a dqn agent")
    if len(source.online.layers) != len(target.online.layers):
        raise ConfigError("agents must share the hidden architecture")
    assert source.support is not None

    atoms = source.support.atoms
    k = source.config.n_atoms
    for mine, theirs in zip(target.online.layers[:-1], source.online.layers[:-1]):
        mine.weight[...] = theirs.weight
        if mine.bias is not None and theirs.bias is not None:
            mine.bias[...] = theirs.bias

    src_last = source.online.layers[-1]
    dst_last = target.online.layers[-1]
    for a in range(target.n_actions):
        block = slice(a * k, (a + 1) * k)
        dst_last.weight[:, a] = src_last.weight[:, block] @ atoms
        if dst_last.bias is not None and src_last.bias is not None:
            dst_last.bias[a] = src_last.bias[block] @ atoms
    target.target.load_from(target.online)


def train_step(agent: MLPAgent, env: Environment, source: SampleSource) -> StepStats:
    """
    Act, store the transition and train once the buffer holds a full batch.

    Starts a new episode when none is running.
    """
    if env.pending_action is None or env.done:
        begin_episode(env, agent.policy, source)
    t = sample_transition(env, agent.policy, source)
    agent.observe(t)
    loss = agent.learn() if len(agent.buffer) >= agent.config.batch_size else None
    return StepStats(t, loss, env.done)


def run_episode(agent: MLPAgent, env: Environment, source: SampleSource) -> EpisodeStats:
    """Run one full episode with training; returns the undiscounted return."""
    begin_episode(env, agent.policy, source)
    stats = EpisodeStats(0.0, 0)
    while not env.done:
        step = train_step(agent, env, source)
        stats.episode_return += step.transition.r
        stats.length += 1
        if step.loss is not None:
            stats.losses.append(step.loss)
    return stats
