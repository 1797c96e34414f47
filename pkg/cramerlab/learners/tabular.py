"""
Tabular value and return-distribution learning.

Tables are immutable: every operator and sample update returns a new
table. Sample updates touch exactly one (x, a) entry and leave the others
bit-identical.

Operators
    bellman_expected        T^pi / T* on a QTable
    bellman_dist            exact distributional operator on an ExactZTable
    bellman_dist_projected  Cramér-projected operator on a CategoricalZTable

Sample updates
    sarsa_update, mixture_update, cdf_gradient_update, pmf_gradient_update,
    each with a Q-learning variant (bootstrap from the greedy next action).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np

from cramerlab.core import (
    SUPPORT_CAP,
    Categorical,
    GeneralDiscrete,
    Support,
    grad_cramer_cdf,
    grad_cramer_pmf,
    project_atoms,
    to_pmf,
)
from cramerlab.envs.finite_mdp import FiniteMDP
from cramerlab.envs.policies import Policy, action_probabilities, greedy_action
from cramerlab.envs.sampling import TransitionSample
from cramerlab.errors import BracketError


class OperatorMode(str, Enum):
    """Policy evaluation (T^pi) or control (T*)."""

    EVALUATION = "evaluation"
    OPTIMALITY = "optimality"


def _frozen(values: np.ndarray) -> np.ndarray:
    array = np.array(values, dtype=float, copy=True)
    array.setflags(write=False)
    return array


def _check_step(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"step size must lie in [0, 1], got {alpha}")


@dataclass(frozen=True, eq=False)
class QTable:
    """State-action values Q(x, a) as an (S, A) array."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if values.ndim != 2:
            raise ValueError(f"QTable must be 2-d, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, n_states: int, n_actions: int) -> QTable:
        return cls(np.zeros((n_states, n_actions)))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    def expectations(self) -> np.ndarray:
        return self.values

    def action_values(self, x: int) -> np.ndarray:
        return self.values[int(x)]

    def with_entry(self, x: int, a: int, value: float) -> QTable:
        values = self.values.copy()
        values[int(x), int(a)] = value
        return QTable(values)


@dataclass(frozen=True, eq=False)
class CategoricalZTable:
    """
    Return distributions Z(x, a) on one shared support.

    Attributes:
        support: Atom grid shared by all entries
        mass: Array (S, A, K) of PMFs, possibly signed or improper
    """

    support: Support
    mass: np.ndarray

    def __post_init__(self) -> None:
        mass = _frozen(self.mass)
        if mass.ndim != 3 or mass.shape[2] != self.support.size:
            raise ValueError(f"mass must be (S, A, {self.support.size}), got {mass.shape}")
        object.__setattr__(self, "mass", mass)

    @classmethod
    def constant(cls, n_states: int, n_actions: int, dist: Categorical) -> CategoricalZTable:
        mass = np.broadcast_to(dist.mass, (n_states, n_actions, dist.support.size))
        return cls(dist.support, mass)

    @classmethod
    def from_values(cls, q: Union[QTable, np.ndarray], support: Support) -> CategoricalZTable:
        """Projected Diracs at Q(x, a); expectations equal Q wherever Q lies in [z_1, z_K]."""
        values = q.values if isinstance(q, QTable) else np.asarray(q, dtype=float)
        mass = np.stack(
            [project_atoms([v], [1.0], support) for v in values.ravel()]
        ).reshape(*values.shape, support.size)
        return cls(support, mass)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.mass.shape[:2]  # type: ignore[return-value]

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.mass, axis=-1)

    def dist(self, x: int, a: int) -> Categorical:
        return Categorical(self.support, self.mass[int(x), int(a)], check_mass=False)

    def expectations(self) -> np.ndarray:
        return self.mass @ self.support.atoms

    def action_values(self, x: int) -> np.ndarray:
        return self.mass[int(x)] @ self.support.atoms

    def total_mass(self) -> np.ndarray:
        return self.mass.sum(axis=-1)

    def with_entry(self, x: int, a: int, mass: np.ndarray) -> CategoricalZTable:
        new_mass = self.mass.copy()
        new_mass[int(x), int(a)] = mass
        return CategoricalZTable(self.support, new_mass)


@dataclass(frozen=True, eq=False)
class ExactZTable:
    """
    Unprojected return distributions, one GeneralDiscrete per (x, a).

    Attributes:
        dists: Nested tuple [x][a] of laws
        cap: Maximum atoms per entry before SupportOverflowError
    """

    dists: Tuple[Tuple[GeneralDiscrete, ...], ...]
    cap: int = field(default=SUPPORT_CAP)

    @classmethod
    def from_values(cls, q: Union[QTable, np.ndarray], cap: int = SUPPORT_CAP) -> ExactZTable:
        """Diracs at Q(x, a)."""
        values = q.values if isinstance(q, QTable) else np.asarray(q, dtype=float)
        return cls(
            tuple(tuple(GeneralDiscrete.dirac(v) for v in row) for row in values), cap=cap
        )

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.dists), len(self.dists[0])

    def dist(self, x: int, a: int) -> GeneralDiscrete:
        return self.dists[int(x)][int(a)]

    def expectations(self) -> np.ndarray:
        return np.array([[d.expectation() for d in row] for row in self.dists])

    def action_values(self, x: int) -> np.ndarray:
        return np.array([d.expectation() for d in self.dists[int(x)]])

    def max_support_size(self) -> int:
        return max(d.size for row in self.dists for d in row)

    def with_entry(self, x: int, a: int, dist: GeneralDiscrete) -> ExactZTable:
        rows = [list(row) for row in self.dists]
        rows[int(x)][int(a)] = dist
        return ExactZTable(tuple(tuple(row) for row in rows), cap=self.cap)


ZTable = Union[CategoricalZTable, ExactZTable]


def _next_action_weights(
    values: np.ndarray, mdp: FiniteMDP, policy: Optional[Policy], mode: OperatorMode
) -> np.ndarray:
    """(S, A) weights over a' in each next state: pi(a'|x') or the greedy indicator."""
    if mode is OperatorMode.EVALUATION:
        return action_probabilities(policy, mdp.n_states, mdp.n_actions)
    weights = np.zeros((mdp.n_states, mdp.n_actions))
    for y in range(mdp.n_states):
        weights[y, greedy_action(values[y])] = 1.0
    return weights


def bellman_expected(
    q: QTable, mdp: FiniteMDP, policy: Optional[Policy] = None, mode: str = "evaluation"
) -> QTable:
    """
    Apply the expected Bellman operator.

    evaluation: (T^pi Q)(x,a) = E[R(x,a)] + gamma sum P(x'|x,a) pi(a'|x') Q(x',a')
    optimality: the inner average is replaced by the greedy value at x'.
    Terminal next states contribute no bootstrap.
    """
    mode = OperatorMode(mode)
    weights = _next_action_weights(q.values, mdp, policy, mode)
    next_value = mdp.continuation() * np.sum(weights * q.values, axis=1)
    return QTable(mdp.expected_reward() + mdp.transition @ next_value)


def bellman_dist(
    z: ExactZTable, mdp: FiniteMDP, policy: Optional[Policy] = None, mode: str = "evaluation"
) -> ExactZTable:
    """
    Apply the exact distributional Bellman operator.

    Each new entry is the law of R(x,a) + gamma Z(X', A'): the mixture over
    reward atoms, next states and next actions of the shifted and scaled
    next distributions. Optimality mode uses the next action with the
    largest expectation (lowest index on ties).

    Raises:
        SupportOverflowError: If an entry exceeds z.cap atoms
    """
    mode = OperatorMode(mode)
    weights = _next_action_weights(z.expectations(), mdp, policy, mode)
    continuation = mdp.continuation()

    rows = []
    for x in range(mdp.n_states):
        row = []
        for a in range(mdp.n_actions):
            locations, masses = [], []
            for r, p_r in zip(mdp.reward_values[x, a], mdp.reward_probs[x, a]):
                if p_r <= 0:
                    continue
                for y in np.flatnonzero(mdp.transition[x, a] > 0):
                    for b in np.flatnonzero(weights[y] > 0):
                        nxt = z.dist(y, b)
                        locations.append(r + continuation[y] * nxt.locations)
                        masses.append(p_r * mdp.transition[x, a, y] * weights[y, b] * nxt.mass)
            row.append(
                GeneralDiscrete.from_atoms(
                    np.concatenate(locations), np.concatenate(masses), cap=z.cap
                )
            )
        rows.append(tuple(row))
    return ExactZTable(tuple(rows), cap=z.cap)


def check_bracket(support: Support, mdp: FiniteMDP) -> None:
    """
    Raises:
        BracketError: If support does not cover [-R_MAX/(1-gamma), R_MAX/(1-gamma)]
    """
    bound = mdp.value_bound
    if not support.brackets(bound):
        raise BracketError(
            f"support [{support.low:g}, {support.high:g}] does not bracket returns in "
            f"[{-bound:g}, {bound:g}]"
        )


def bellman_dist_projected(
    z: CategoricalZTable,
    mdp: FiniteMDP,
    policy: Optional[Policy] = None,
    mode: str = "evaluation",
    enforce_bracket: bool = True,
) -> CategoricalZTable:
    """
    Apply the Cramér-projected distributional operator Pi_C T_D.

    Args:
        z: Current table
        mdp: Model
        policy: Evaluation policy (ignored in optimality mode)
        mode: "evaluation" or "optimality"
        enforce_bracket: Refuse supports that do not bracket the returns

    Raises:
        BracketError: If enforce_bracket and the support is too narrow
    """
    mode = OperatorMode(mode)
    support = z.support
    if enforce_bracket:
        check_bracket(support, mdp)

    weights = _next_action_weights(z.expectations(), mdp, policy, mode)
    next_mass = np.einsum("yb,ybk->yk", weights, z.mass)
    continuation = mdp.continuation()
    shifted = continuation[:, None] * support.atoms[None, :]

    new_mass = np.empty_like(z.mass)
    for x in range(mdp.n_states):
        for a in range(mdp.n_actions):
            locations = mdp.reward_values[x, a][:, None, None] + shifted[None, :, :]
            masses = (
                mdp.reward_probs[x, a][:, None, None]
                * mdp.transition[x, a][None, :, None]
                * next_mass[None, :, :]
            )
            new_mass[x, a] = project_atoms(locations, masses, support)
    return CategoricalZTable(support, new_mass)


def sup_cramer_distance(p: CategoricalZTable, q: CategoricalZTable) -> float:
    """max over (x, a) of the Cramér distance between entries."""
    gaps = np.diff(p.support.atoms)
    diff = (p.cdf - q.cdf)[..., :-1]
    return float(np.sqrt(np.sum(gaps * diff**2, axis=-1)).max())


def _bootstrap_action(values_next: np.ndarray, t: TransitionSample, q_learning: bool) -> int:
    return greedy_action(values_next) if q_learning else int(t.a_next)


def sarsa_update(q: QTable, t: TransitionSample, alpha: float, q_learning: bool = False) -> QTable:
    """
    Q(x,a) <- (1 - alpha) Q(x,a) + alpha (r + gamma Q(x', a')).

    The Q-learning variant bootstraps from the greedy action at x'.
    """
    _check_step(alpha)
    b = _bootstrap_action(q.action_values(t.x_next), t, q_learning)
    target = t.r + t.discount * q.values[int(t.x_next), b]
    old = q.values[int(t.x), int(t.a)]
    return q.with_entry(t.x, t.a, (1.0 - alpha) * old + alpha * target)


def projected_sample_target(
    z: CategoricalZTable, t: TransitionSample, q_learning: bool = False
) -> Categorical:
    """Pi_C(r + gamma Z(x', a')) from the stored next distribution."""
    b = _bootstrap_action(z.action_values(t.x_next), t, q_learning)
    locations = t.r + t.discount * z.support.atoms
    mass = project_atoms(locations, z.mass[int(t.x_next), b], z.support)
    return Categorical(z.support, mass, check_mass=False)


def mixture_update(
    z: ZTable, t: TransitionSample, alpha: float, projected: bool, q_learning: bool = False
) -> ZTable:
    """
    Z(x,a) <- (1 - alpha) Z(x,a) + alpha target.

    The target is the law of r + gamma Z(x', a') built from the stored next
    distribution; with projected=True it is Cramér-projected onto the support
    of a CategoricalZTable, otherwise it is kept exact in an ExactZTable.

    Raises:
        TypeError: If the table kind does not match projected
        SupportOverflowError: If an exact entry exceeds its cap
    """
    _check_step(alpha)
    if projected:
        if not isinstance(z, CategoricalZTable):
            raise TypeError("projected mixture needs a CategoricalZTable")
        target = projected_sample_target(z, t, q_learning)
        old = z.mass[int(t.x), int(t.a)]
        return z.with_entry(t.x, t.a, (1.0 - alpha) * old + alpha * target.mass)

    if not isinstance(z, ExactZTable):
        raise TypeError("unprojected mixture needs an ExactZTable")
    b = _bootstrap_action(z.action_values(t.x_next), t, q_learning)
    target_law = z.dist(t.x_next, b).affine(t.r, t.discount, cap=z.cap)
    weighted = ((1.0 - alpha, z.dist(t.x, t.a)), (alpha, target_law))
    components = [(w, d) for w, d in weighted if w > 0]
    return z.with_entry(t.x, t.a, GeneralDiscrete.mixture(components, cap=z.cap))


def cdf_gradient_update(
    z: CategoricalZTable, t: TransitionSample, alpha_prime: float, q_learning: bool = False
) -> CategoricalZTable:
    """
    F(x,a) <- F(x,a) + alpha' * grad_cramer_cdf(Z(x,a), Pi_C target).

    With alpha' = alpha / 2c this equals the projected mixture update with
    step alpha.

    Raises:
        SpacingError: If the support is not c-spaced
    """
    current = z.dist(t.x, t.a)
    target = projected_sample_target(z, t, q_learning)
    new_cdf = current.cdf + alpha_prime * grad_cramer_cdf(current, target)
    return z.with_entry(t.x, t.a, to_pmf(new_cdf))


def pmf_gradient_update(
    z: CategoricalZTable, t: TransitionSample, alpha: float, q_learning: bool = False
) -> CategoricalZTable:
    """
    P(x,a) <- P(x,a) + alpha * grad_cramer_pmf(Z(x,a), Pi_C target).

    Does not preserve expectations; kept to exhibit that failure.
    """
    current = z.dist(t.x, t.a)
    target = projected_sample_target(z, t, q_learning)
    return z.with_entry(t.x, t.a, current.mass + alpha * grad_cramer_pmf(current, target))
