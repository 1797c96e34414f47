"""
Configuration Manager for cramerlab.

Loads lab-wide settings (logging, output, worker count and the
verification suite parameters) from config/cramerlab_config.yaml.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import yaml
from loguru import logger

from cramerlab.errors import ConfigError

CONFIG_FILENAME = "cramerlab_config.yaml"
HASH_LENGTH = 12


def canonical_hash(data: Mapping[str, Any]) -> str:
    """First 12 hex digits of SHA-256 over sorted-key, whitespace-free JSON."""
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:HASH_LENGTH]


@dataclass
class VerificationConfig:
    """
    Sizes, step sizes and tolerances of the verification suite.

    Attributes:
        max_states: Largest random MDP state count
        max_actions: Largest random MDP action count
        max_reward_atoms: Largest reward support per (x, a)
        gamma: Discount of the random MDPs
        n_atoms: Atoms of the categorical tables
        operator_iterations: Projected/expected operator iterations
        exact_iterations: Exact distributional operator iterations
        sample_steps: Coupled steps for projected sample rules
        mixture_steps: Coupled steps for the exact mixture rule
        alpha: Tabular step size
        projection_samples: Random mixtures per seed for the projection check
        linear_dim: Feature dimension of the linear check
        linear_atoms: Atoms of the 1-spaced linear support
        linear_steps: Coupled linear steps
        linear_alpha: Linear step size
        linear_probes: Extra random probe features
        pmf_alphas: Step sizes of the PMF counterexample
        counterexample_steps: Coupled steps of the PMF counterexample
        control_epsilon: Exploration rate of the control corollary
        network_steps: Environment steps of the network control
        network_seeds: Seeds used by the network control
        operator_tol: Tolerance for operator iteration
        sample_tol: Tolerance for sampled tabular rules
        linear_tol: Tolerance for linear rules
        projection_tol: Tolerance of the projection check
        divergence_tol: Gap that counts as a detected divergence
    """

    max_states: int = 6
    max_actions: int = 3
    max_reward_atoms: int = 4
    gamma: float = 0.9
    n_atoms: int = 51
    operator_iterations: int = 200
    exact_iterations: int = 5
    sample_steps: int = 10_000
    mixture_steps: int = 50
    alpha: float = 0.1
    projection_samples: int = 1000
    linear_dim: int = 8
    linear_atoms: int = 11
    linear_steps: int = 5000
    linear_alpha: float = 0.05
    linear_probes: int = 16
    pmf_alphas: List[float] = field(default_factory=lambda: [0.1, 0.5, 1.0])
    counterexample_steps: int = 10
    control_epsilon: float = 0.1
    network_steps: int = 1000
    network_seeds: int = 3
    operator_tol: float = 1e-10
    sample_tol: float = 1e-8
    linear_tol: float = 1e-7
    projection_tol: float = 1e-12
    divergence_tol: float = 1e-3

    def __post_init__(self) -> None:
        self.pmf_alphas = [float(a) for a in self.pmf_alphas]
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"verification gamma must lie in [0, 1), got {self.gamma}")
        if self.linear_atoms % 2 == 0:
            raise ConfigError(f"linear_atoms must be odd, got {self.linear_atoms}")
        for name in ("max_states", "max_actions", "max_reward_atoms", "n_atoms", "linear_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")

    @classmethod
    def from_dict(cls, data: Optional[Mapping[str, Any]]) -> VerificationConfig:
        """
        Raises:
            ConfigError: On unknown keys or invalid values
        """
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown verification keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"invalid verification config: {e}") from e

    @classmethod
    def from_config_manager(cls, config_manager: ConfigManager) -> VerificationConfig:
        return cls.from_dict(config_manager.get_verification_settings())

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        return canonical_hash(self.to_dict())


class ConfigManager:
    """
    Manages lab-wide configuration.

    Loads config/cramerlab_config.yaml, writing a default file when it is
    missing.
    """

    def __init__(self, config_dir: str | Path = "config") -> None:
        """
        Initialize configuration manager.

        Args:
            config_dir: Directory containing configuration files
        """
        self.config_dir = Path(config_dir)
        self.config_file = self.config_dir / CONFIG_FILENAME
        self.config: Dict[str, Any] = {}

        logger.debug(f"ConfigManager initialized (config_dir: {config_dir})")
        self.load_config()

    def load_config(self) -> bool:
        """
        Load the lab configuration from file.

        Returns:
            True if loaded successfully, False if defaults were used
        """
        if not self.config_file.exists():
            logger.warning(f"Lab config file not found: {self.config_file}")
            self._create_default_config()
            return False

        try:
            with open(self.config_file, "r") as f:
                self.config = yaml.safe_load(f) or {}
            logger.debug(f"Lab configuration loaded from {self.config_file}")
            return True
        except (OSError, yaml.YAMLError) as e:
            logger.error(f"Error loading lab config: {e}")
            self.config = self.default_config()
            return False

    @staticmethod
    def default_config() -> Dict[str, Any]:
        return {
            "logging": {"level": "INFO", "file_logging": False, "log_dir": "logs"},
            "output": {"dir": "results", "plots": True},
            "workers": 1,
            "verification": VerificationConfig().to_dict(),
        }

    def _create_default_config(self) -> None:
        """Write the default lab configuration file."""
        logger.info("Creating default lab configuration...")
        self.config = self.default_config()
        try:
            self.config_dir.mkdir(parents=True, exist_ok=True)
            with open(self.config_file, "w") as f:
                yaml.dump(self.config, f, default_flow_style=False, sort_keys=False)
        except OSError as e:
            logger.warning(f"Could not write default config: {e}")

    def _section(self, name: str) -> Dict[str, Any]:
        value = self.config.get(name) or {}
        return value if isinstance(value, dict) else {}

    def get_log_level(self) -> str:
        return str(self._section("logging").get("level", "INFO")).upper()

    def get_file_logging(self) -> bool:
        return bool(self._section("logging").get("file_logging", False))

    def get_log_dir(self) -> str:
        return str(self._section("logging").get("log_dir", "logs"))

    def get_output_dir(self) -> str:
        return str(self._section("output").get("dir", "results"))

    def get_plots_enabled(self) -> bool:
        return bool(self._section("output").get("plots", True))

    def get_workers(self) -> int:
        return max(1, int(self.config.get("workers", 1)))

    def get_verification_settings(self) -> Dict[str, Any]:
        return dict(self._section("verification"))
