"""
Configuration management for cramerlab.
Handles lab-wide settings, verification parameters and experiment documents.
"""

from cramerlab.config.config_manager import ConfigManager, VerificationConfig, canonical_hash
from cramerlab.config.experiment_config import (
    AGENT_ALGORITHMS,
    TABULAR_ALGORITHMS,
    ExperimentConfig,
)

__all__ = [
    "AGENT_ALGORITHMS",
    "TABULAR_ALGORITHMS",
    "ConfigManager",
    "ExperimentConfig",
    "VerificationConfig",
    "canonical_hash",
]
