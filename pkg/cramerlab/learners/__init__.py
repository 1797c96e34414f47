"""
Learners: tabular tables and updates, linear models, networks and lite agents.
"""

from cramerlab.learners.agents import (
    ALGORITHMS,
    AgentConfig,
    Batch,
    LossResult,
    MLPAgent,
    ReplayBuffer,
    c51_lite_loss,
    dqn_lite_loss,
    mirror_expectations,
    run_episode,
    s51_lite_loss,
    train_step,
)
from cramerlab.learners.linear import (
    ExtendedCDF,
    LinearQ,
    LinearZ,
    expectation_from_linear_cdf,
    linear_cdf_predict,
    linear_q_predict,
    matched_init,
    projected_target_cdf,
    semigradient_cdf_update,
    semigradient_q_update,
)
from cramerlab.learners.networks import MLP, SGD, Adam, make_optimizer
from cramerlab.learners.nonlinear import (
    CounterexampleReport,
    SigmoidCDFModel,
    sigmoid_cdf_counterexample,
)
from cramerlab.learners.tabular import (
    CategoricalZTable,
    ExactZTable,
    OperatorMode,
    QTable,
    bellman_dist,
    bellman_dist_projected,
    bellman_expected,
    cdf_gradient_update,
    mixture_update,
    pmf_gradient_update,
    sarsa_update,
    sup_cramer_distance,
)

__all__ = [
    "ALGORITHMS",
    "Adam",
    "AgentConfig",
    "Batch",
    "CategoricalZTable",
    "CounterexampleReport",
    "ExactZTable",
    "ExtendedCDF",
    "LinearQ",
    "LinearZ",
    "LossResult",
    "MLP",
    "MLPAgent",
    "OperatorMode",
    "QTable",
    "ReplayBuffer",
    "SGD",
    "SigmoidCDFModel",
    "bellman_dist",
    "bellman_dist_projected",
    "bellman_expected",
    "c51_lite_loss",
    "cdf_gradient_update",
    "dqn_lite_loss",
    "expectation_from_linear_cdf",
    "linear_cdf_predict",
    "linear_q_predict",
    "make_optimizer",
    "matched_init",
    "mirror_expectations",
    "mixture_update",
    "pmf_gradient_update",
    "projected_target_cdf",
    "run_episode",
    "s51_lite_loss",
    "sarsa_update",
    "semigradient_cdf_update",
    "semigradient_q_update",
    "sigmoid_cdf_counterexample",
    "sup_cramer_distance",
    "train_step",
]
