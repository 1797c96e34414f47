"""
Environments, sample streams, policies and feature maps.
"""

from cramerlab.envs.base import Environment, StepResult
from cramerlab.envs.classic_control import Acrobot, CartPole, ClassicControlEnv
from cramerlab.envs.env_factory import ENV_NAMES, make_env
from cramerlab.envs.features import (
    FourierBasis,
    TableFeatures,
    fourier_feature_count,
    fourier_features,
    one_hot_features,
    random_features,
    random_probes,
)
from cramerlab.envs.finite_mdp import FiniteMDP, chain3, gridworld, random_finite_mdp
from cramerlab.envs.policies import (
    TIE_TOL,
    EpsilonGreedyPolicy,
    Policy,
    TabularPolicy,
    epsilon_greedy,
    greedy_action,
    linear_epsilon,
)
from cramerlab.envs.sampling import (
    SampleSource,
    TransitionSample,
    begin_episode,
    draws_per_transition,
    sample_transition,
)

__all__ = [
    "Acrobot",
    "CartPole",
    "ClassicControlEnv",
    "ENV_NAMES",
    "Environment",
    "EpsilonGreedyPolicy",
    "FiniteMDP",
    "FourierBasis",
    "Policy",
    "SampleSource",
    "StepResult",
    "TIE_TOL",
    "TableFeatures",
    "TabularPolicy",
    "TransitionSample",
    "begin_episode",
    "chain3",
    "draws_per_transition",
    "epsilon_greedy",
    "fourier_feature_count",
    "fourier_features",
    "greedy_action",
    "gridworld",
    "linear_epsilon",
    "make_env",
    "one_hot_features",
    "random_features",
    "random_finite_mdp",
    "random_probes",
    "sample_transition",
]
