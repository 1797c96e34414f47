"""
Experiment configuration documents.

An ExperimentConfig is a flat YAML mapping (schema in
docs/configuration.md). Its hash, computed over the canonical JSON form,
is written into every output file so a result can be traced back to the
exact settings that produced it.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import yaml
from loguru import logger

from cramerlab.config.config_manager import canonical_hash
from cramerlab.errors import ConfigError

TABULAR_ALGORITHMS = ("q-learning", "tabular-cdf", "tabular-pmf", "tabular-mixture")
AGENT_ALGORITHMS = ("dqn-lite", "c51-lite", "s51-lite-cdf", "s51-lite-pmf")
FEATURE_KINDS = ("tabular", "fourier", "mlp")
FINITE_ENVS = ("chain3", "gridworld12")
CONTROL_ENVS = ("cartpole", "acrobot")

# Keys that only say where or how fast to run; they do not change results.
UNHASHED_KEYS = ("output_dir", "workers")


@dataclass
class ExperimentConfig:
    """
    One experiment: an environment, the algorithms to compare and their settings.

    Attributes:
        name: Experiment name, used for the output subdirectory
        env: Environment name (see make_env)
        algorithms: Algorithms to run; one CSV each
        features: "tabular", "fourier" or "mlp"
        fourier_order: Fourier basis order when features is "fourier"
        hidden: Hidden widths of the agent networks
        learning_rate: Tabular step size or optimizer learning rate
        seeds: Seeds to run
        episodes: Episodes per seed
        gamma: Discount override (environment default when None)
        max_steps: Episode cap override
        epsilon: Exploration rate of tabular learners
        epsilon_start: Initial exploration of agents
        epsilon_end: Final exploration of agents
        epsilon_decay_steps: Steps of the agents' linear decay
        n_atoms: Atoms of categorical learners
        v_max: Support half-width override
        batch_size: Agent minibatch size
        buffer_capacity: Agent replay capacity
        target_sync: Training steps between target syncs
        optimizer: "adam" or "sgd"
        s51_init: "mass-preserving" or "random"
        sweep_learning_rates: Grid evaluated by the sweep command
        sweep_orders: Fourier orders evaluated by the sweep command
        record_wallclock: Write real elapsed times instead of 0
        log_every: Episodes between progress log lines
        output_dir: Root directory for results
        workers: Processes used across seeds
    """

    name: str = "experiment"
    env: str = "gridworld12"
    algorithms: List[str] = field(default_factory=lambda: ["q-learning", "tabular-cdf"])
    features: str = "tabular"
    fourier_order: int = 4
    hidden: List[int] = field(default_factory=list)
    learning_rate: float = 0.1
    seeds: List[int] = field(default_factory=lambda: [0])
    episodes: int = 200
    gamma: Optional[float] = None
    max_steps: Optional[int] = None
    epsilon: float = 0.1
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 10_000
    n_atoms: int = 51
    v_max: Optional[float] = None
    batch_size: int = 128
    buffer_capacity: int = 50_000
    target_sync: int = 10
    optimizer: str = "adam"
    s51_init: str = "mass-preserving"
    sweep_learning_rates: List[float] = field(default_factory=list)
    sweep_orders: List[int] = field(default_factory=list)
    record_wallclock: bool = False
    log_every: int = 50
    output_dir: str = "results"
    workers: int = 1

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ExperimentConfig:
        """
        Build and validate a config from a mapping.

        Raises:
            ConfigError: On unknown keys or invalid values
        """
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown experiment keys: {', '.join(unknown)}")
        try:
            config = cls(**dict(data))
        except TypeError as e:
            raise ConfigError(f"invalid experiment config: {e}") from e
        config.validate()
        return config

    @classmethod
    def from_yaml(cls, path: str | Path) -> ExperimentConfig:
        """
        Raises:
            ConfigError: If the file is missing, unreadable or invalid
        """
        path = Path(path)
        try:
            with open(path, "r") as f:
                data = yaml.safe_load(f) or {}
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a key-value mapping")
        logger.debug(f"Loaded experiment config from {path}")
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_yaml(self, path: Optional[str | Path] = None) -> str:
        """Serialize to YAML, also writing it to path when given."""
        text = yaml.dump(self.to_dict(), default_flow_style=False, sort_keys=False)
        if path is not None:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            Path(path).write_text(text)
        return text

    def hashed_fields(self) -> Dict[str, Any]:
        return {k: v for k, v in self.to_dict().items() if k not in UNHASHED_KEYS}

    def config_hash(self) -> str:
        return canonical_hash(self.hashed_fields())

    @property
    def is_tabular(self) -> bool:
        return self.features == "tabular"

    def validate(self) -> None:
        """
        Raises:
            ConfigError: Naming the first invalid field
        """
        if not self.name or "/" in self.name:
            raise ConfigError(f"invalid experiment name: {self.name!r}")
        if self.features not in FEATURE_KINDS:
            raise ConfigError(
                f"Unknown features: {self.features}. Valid options: {', '.join(FEATURE_KINDS)}"
            )
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")

        valid = TABULAR_ALGORITHMS if self.is_tabular else AGENT_ALGORITHMS
        envs = FINITE_ENVS if self.is_tabular else CONTROL_ENVS
        for algorithm in self.algorithms:
            if algorithm not in valid:
                raise ConfigError(
                    f"Unknown algorithm for {self.features} features: {algorithm}. "
                    f"Valid options: {', '.join(valid)}"
                )
        if self.env not in envs:
            raise ConfigError(
                f"Environment {self.env} does not fit {self.features} features. "
                f"Valid options: {', '.join(envs)}"
            )

        if not self.seeds or any(seed < 0 for seed in self.seeds):
            raise ConfigError(f"seeds must be a non-empty list of nonnegative ints: {self.seeds}")
        if self.episodes < 1:
            raise ConfigError(f"episodes must be positive, got {self.episodes}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.is_tabular and self.learning_rate > 1:
            raise ConfigError(f"tabular step size must be <= 1, got {self.learning_rate}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.gamma is not None and not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.features == "fourier" and self.fourier_order < 1:
            raise ConfigError(f"fourier_order must be >= 1, got {self.fourier_order}")
        if any(order < 1 for order in self.sweep_orders):
            raise ConfigError(f"sweep_orders must be >= 1: {self.sweep_orders}")
        if any(rate <= 0 for rate in self.sweep_learning_rates):
            raise ConfigError(f"sweep_learning_rates must be positive: {self.sweep_learning_rates}")
        if self.workers < 1:
            raise ConfigError(f"workers must be positive, got {self.workers}")

    def with_overrides(self, **changes: Any) -> ExperimentConfig:
        """Validated copy with some fields replaced."""
        return ExperimentConfig.from_dict({**self.to_dict(), **changes})
