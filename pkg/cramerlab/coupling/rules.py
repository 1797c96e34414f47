"""
Update-rule adapters for the coupling harness.

An UpdateRule owns one learner state (a table or a linear model) and
advances it on each sampled transition. An OperatorRule advances by one
application of a model-based operator instead. Both expose expectations()
over a fixed probe set so the harness can compare the expected and the
distributional side entry by entry.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any, Callable, List, Optional

import numpy as np
from loguru import logger

from cramerlab.core import to_pmf
from cramerlab.envs.finite_mdp import FiniteMDP
from cramerlab.envs.policies import Policy
from cramerlab.envs.sampling import TransitionSample
from cramerlab.learners.linear import (
    LinearQ,
    LinearZ,
    semigradient_cdf_update,
    semigradient_q_update,
)
from cramerlab.learners.tabular import (
    CategoricalZTable,
    ExactZTable,
    OperatorMode,
    QTable,
    ZTable,
    bellman_dist,
    bellman_dist_projected,
    bellman_expected,
    cdf_gradient_update,
    check_bracket,
    mixture_update,
    pmf_gradient_update,
    sarsa_update,
    sup_cramer_distance,
)

PhiFn = Callable[[Any, int], np.ndarray]

RULE_NAMES = (
    "sarsa",
    "mixture",
    "projected-mixture",
    "cdf-gradient",
    "pmf-gradient",
    "linear-q",
    "linear-cdf",
)


class UpdateRule(ABC):
    """A learner advanced one sampled transition at a time."""

    name: str = ""

    @abstractmethod
    def update(self, t: TransitionSample) -> None:
        """Consume one transition."""

    @abstractmethod
    def expectations(self) -> np.ndarray:
        """Predicted expectations over the probe set, as a flat array."""

    def action_values(self, x: Any) -> np.ndarray:
        """Per-action values used for behaviour; tabular rules only."""
        raise NotImplementedError(f"{self.name} does not expose action values")


class SarsaRule(UpdateRule):
    """Tabular SARSA, or Q-learning when q_learning is set."""

    def __init__(self, q: QTable, alpha: float, q_learning: bool = False) -> None:
        self.state = q
        self.alpha = alpha
        self.q_learning = q_learning
        self.name = "q-learning" if q_learning else "sarsa"

    def update(self, t: TransitionSample) -> None:
        self.state = sarsa_update(self.state, t, self.alpha, self.q_learning)

    def expectations(self) -> np.ndarray:
        return self.state.values.ravel()

    def action_values(self, x: Any) -> np.ndarray:
        return self.state.action_values(x)


class _ZTableRule(UpdateRule):
    state: ZTable

    def expectations(self) -> np.ndarray:
        return self.state.expectations().ravel()

    def action_values(self, x: Any) -> np.ndarray:
        return self.state.action_values(x)


class MixtureRule(_ZTableRule):
    """Mixture toward the sampled target, projected or exact."""

    def __init__(
        self, z: ZTable, alpha: float, projected: bool, q_learning: bool = False
    ) -> None:
        self.state = z
        self.alpha = alpha
        self.projected = projected
        self.q_learning = q_learning
        self.name = "projected-mixture" if projected else "mixture"

    def update(self, t: TransitionSample) -> None:
        self.state = mixture_update(self.state, t, self.alpha, self.projected, self.q_learning)


class CdfGradientRule(_ZTableRule):
    """CDF-direction update with step alpha_prime."""

    name = "cdf-gradient"

    def __init__(self, z: CategoricalZTable, alpha_prime: float, q_learning: bool = False) -> None:
        self.state = z
        self.alpha_prime = alpha_prime
        self.q_learning = q_learning

    def update(self, t: TransitionSample) -> None:
        assert isinstance(self.state, CategoricalZTable)
        self.state = cdf_gradient_update(self.state, t, self.alpha_prime, self.q_learning)


class PmfGradientRule(_ZTableRule):
    """PMF-direction update with step alpha."""

    name = "pmf-gradient"

    def __init__(self, z: CategoricalZTable, alpha: float, q_learning: bool = False) -> None:
        self.state = z
        self.alpha = alpha
        self.q_learning = q_learning

    def update(self, t: TransitionSample) -> None:
        assert isinstance(self.state, CategoricalZTable)
        self.state = pmf_gradient_update(self.state, t, self.alpha, self.q_learning)


class LinearQRule(UpdateRule):
    """Semi-gradient TD on a linear value model, probed at fixed features."""

    name = "linear-q"

    def __init__(self, model: LinearQ, phi_fn: PhiFn, alpha: float, probes: np.ndarray) -> None:
        self.state = model
        self.phi_fn = phi_fn
        self.alpha = alpha
        self.probes = np.atleast_2d(probes)

    def update(self, t: TransitionSample) -> None:
        self.state = semigradient_q_update(self.state, t, self.phi_fn, self.alpha)

    def expectations(self) -> np.ndarray:
        return self.probes @ self.state.theta


class LinearZRule(UpdateRule):
    """Semi-gradient CDF update on a linear CDF model, probed at fixed features."""

    name = "linear-cdf"

    def __init__(self, model: LinearZ, phi_fn: PhiFn, alpha: float, probes: np.ndarray) -> None:
        self.state = model
        self.phi_fn = phi_fn
        self.alpha = alpha
        self.probes = np.atleast_2d(probes)

    def update(self, t: TransitionSample) -> None:
        self.state = semigradient_cdf_update(self.state, t, self.phi_fn, self.alpha)

    def expectations(self) -> np.ndarray:
        cdfs = self.probes @ self.state.w.T
        return to_pmf(cdfs) @ self.state.support.atoms

    def total_mass(self) -> np.ndarray:
        return (self.probes @ self.state.w.T)[:, -1]


class OperatorRule(ABC):
    """A table advanced by repeated application of a model-based operator."""

    name: str = ""

    def __init__(self, mdp: FiniteMDP, policy: Optional[Policy], mode: str) -> None:
        self.mdp = mdp
        self.policy = policy
        self.mode = OperatorMode(mode)

    @abstractmethod
    def apply(self) -> None:
        """One operator application."""

    @abstractmethod
    def expectations(self) -> np.ndarray:
        """Entry expectations as a flat array."""


class ExpectedOperatorRule(OperatorRule):
    name = "bellman-expected"

    def __init__(
        self, q: QTable, mdp: FiniteMDP, policy: Optional[Policy], mode: str = "evaluation"
    ) -> None:
        super().__init__(mdp, policy, mode)
        self.state = q

    def apply(self) -> None:
        self.state = bellman_expected(self.state, self.mdp, self.policy, self.mode)

    def expectations(self) -> np.ndarray:
        return self.state.values.ravel()


class ExactDistOperatorRule(OperatorRule):
    name = "bellman-dist"

    def __init__(
        self, z: ExactZTable, mdp: FiniteMDP, policy: Optional[Policy], mode: str = "evaluation"
    ) -> None:
        super().__init__(mdp, policy, mode)
        self.state = z

    def apply(self) -> None:
        self.state = bellman_dist(self.state, self.mdp, self.policy, self.mode)
        logger.debug(f"exact operator: largest support {self.state.max_support_size()} atoms")

    def expectations(self) -> np.ndarray:
        return self.state.expectations().ravel()


class ProjectedDistOperatorRule(OperatorRule):
    """
    Cramér-projected operator; records the sup-Cramér distance between
    successive iterates in contraction.
    """

    name = "bellman-dist-projected"

    def __init__(
        self,
        z: CategoricalZTable,
        mdp: FiniteMDP,
        policy: Optional[Policy],
        mode: str = "evaluation",
        enforce_bracket: bool = True,
    ) -> None:
        super().__init__(mdp, policy, mode)
        if enforce_bracket:
            check_bracket(z.support, mdp)
        self.state = z
        self.enforce_bracket = enforce_bracket
        self.contraction: List[float] = []

    def apply(self) -> None:
        previous = self.state
        self.state = bellman_dist_projected(
            previous, self.mdp, self.policy, self.mode, self.enforce_bracket
        )
        self.contraction.append(sup_cramer_distance(previous, self.state))

    def expectations(self) -> np.ndarray:
        return self.state.expectations().ravel()


def make_rule(name: str, state: Any, alpha: float, **options: Any) -> UpdateRule:
    """
    Build a sample-based update rule by name.

    Args:
        name: One of RULE_NAMES
        state: Initial learner state of the matching kind
        alpha: Step size; for "cdf-gradient" this is the mixture step and the
            rule runs at alpha / 2c
        **options: q_learning for tabular rules; phi_fn and probes for
            linear rules

    Raises:
        ValueError: If name is unknown
    """
    key = name.lower()
    q_learning = bool(options.get("q_learning", False))
    if key == "sarsa":
        return SarsaRule(state, alpha, q_learning)
    if key == "mixture":
        return MixtureRule(state, alpha, projected=False, q_learning=q_learning)
    if key == "projected-mixture":
        return MixtureRule(state, alpha, projected=True, q_learning=q_learning)
    if key == "cdf-gradient":
        c = state.support.require_spacing()
        return CdfGradientRule(state, alpha / (2.0 * c), q_learning)
    if key == "pmf-gradient":
        return PmfGradientRule(state, alpha, q_learning)
    if key == "linear-q":
        return LinearQRule(state, options["phi_fn"], alpha, options["probes"])
    if key == "linear-cdf":
        return LinearZRule(state, options["phi_fn"], alpha, options["probes"])
    raise ValueError(f"Unknown update rule: {name}. Valid options: {', '.join(RULE_NAMES)}")
