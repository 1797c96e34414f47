"""
Coupled runs of an expected learner and a distributional learner.

Both learners are driven from one SampleSource so they see exactly the
same transitions. After every step the harness records the largest gap
between the distributional expectations and the expected values over the
probe set, and the report turns that trace into a verdict.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from cramerlab.coupling.rules import OperatorRule, UpdateRule
from cramerlab.envs.base import Environment
from cramerlab.envs.policies import EpsilonGreedyPolicy, Policy
from cramerlab.envs.sampling import (
    SampleSource,
    begin_episode,
    draws_per_transition,
    sample_transition,
)
from cramerlab.errors import StreamMisalignmentError
from cramerlab.learners.agents import MLPAgent, train_step

INIT_TOL = 1e-12


class Verdict(str, Enum):
    EQUIVALENT = "equivalent"
    DIVERGED = "diverged"


def expectation_gap(expected: np.ndarray, distributional: np.ndarray) -> float:
    """max |E[Z] - Q| over matching entries; inf if either side is not finite."""
    diff = np.abs(np.asarray(distributional, dtype=float) - np.asarray(expected, dtype=float))
    if not np.all(np.isfinite(diff)):
        return float("inf")
    return float(diff.max()) if diff.size else 0.0


@dataclass
class EquivalenceReport:
    """
    Gap trace of one coupled run and its verdict.

    gaps[0] is the gap of the initial states; gaps[t] the gap after t steps.
    The verdict is derived from the trace, so the two cannot disagree.

    Attributes:
        name: Which pair was run
        gaps: Per-step max expectation gap
        tol: Gap above which the pair counts as diverged
        seed: Seed of the run
        config_hash: Hash of the settings that produced the run
        extra: Run-specific facts (golden values, contraction trace, ...)
        violations: Failed side conditions, independent of the verdict
    """

    name: str
    gaps: List[float]
    tol: float
    seed: int
    config_hash: str = ""
    extra: Dict[str, Any] = field(default_factory=dict)
    violations: List[str] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return max(len(self.gaps) - 1, 0)

    @property
    def max_gap(self) -> float:
        return max(self.gaps) if self.gaps else 0.0

    @property
    def first_divergence(self) -> Optional[int]:
        for step, gap in enumerate(self.gaps):
            if gap > self.tol:
                return step
        return None

    @property
    def verdict(self) -> Verdict:
        return Verdict.EQUIVALENT if self.first_divergence is None else Verdict.DIVERGED

    def to_dict(self, include_trace: bool = True) -> Dict[str, Any]:
        first = self.first_divergence
        data: Dict[str, Any] = {
            "name": self.name,
            "verdict": self.verdict.value,
            "steps": self.steps,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "tol": self.tol,
            "max_gap": self.max_gap,
            "first_divergence": None if first is None else {"step": first, "gap": self.gaps[first]},
            "violations": list(self.violations),
            "extra": self.extra,
        }
        if include_trace:
            data["gaps"] = list(self.gaps)
        return data

    def to_json(self, include_trace: bool = True) -> str:
        return json.dumps(self.to_dict(include_trace), sort_keys=True)


@dataclass
class CoupledPair:
    """
    An expected and a distributional learner sharing env, policy and source.

    Raises:
        ValueError: If the initial states are not expectation-matched
    """

    expected: UpdateRule
    distributional: UpdateRule
    env: Environment
    policy: Policy
    source: SampleSource
    init_tol: float = INIT_TOL

    def __post_init__(self) -> None:
        gap = self.gap()
        if gap > self.init_tol:
            raise ValueError(f"initial states differ in expectation by {gap:.3g}")

    def gap(self) -> float:
        return expectation_gap(self.expected.expectations(), self.distributional.expectations())


def run_coupled(
    pair: CoupledPair, steps: int, tol: float, seed: int = 0, name: str = ""
) -> EquivalenceReport:
    """
    Advance both learners on the shared stream and record the gap trace.

    Raises:
        StreamMisalignmentError: If a transition consumed an unexpected
            number of draws
    """
    name = name or f"{pair.expected.name} vs {pair.distributional.name}"
    draws = draws_per_transition(pair.env, pair.policy)
    gaps = [pair.gap()]

    for step in range(steps):
        if pair.env.pending_action is None or pair.env.done:
            begin_episode(pair.env, pair.policy, pair.source)
        before = pair.source.counter
        t = sample_transition(pair.env, pair.policy, pair.source)
        if pair.source.counter - before != draws:
            raise StreamMisalignmentError(
                f"step {step}: consumed {pair.source.counter - before} draws, expected {draws}"
            )
        pair.expected.update(t)
        pair.distributional.update(t)
        gaps.append(pair.gap())

    report = EquivalenceReport(name, gaps, tol, seed)
    logger.debug(f"{name}: {report.verdict.value}, max gap {report.max_gap:.3g} over {steps} steps")
    return report


def run_coupled_control(
    expected: UpdateRule,
    distributional: UpdateRule,
    env: Environment,
    source: SampleSource,
    steps: int,
    tol: float,
    epsilon: float,
    seed: int = 0,
    name: str = "",
) -> EquivalenceReport:
    """
    Let each learner act epsilon-greedily on its own values.

    Each side gets its own copy of env and a clone of source, so any
    difference in behaviour comes from the learners alone. The report's
    extra records whether the action sequences matched; a mismatch is a
    violation.
    """
    name = name or f"{expected.name} vs {distributional.name} (control)"
    sides = [
        (rule, env.copy(), source.clone(), EpsilonGreedyPolicy(rule.action_values, epsilon))
        for rule in (expected, distributional)
    ]
    gaps = [expectation_gap(expected.expectations(), distributional.expectations())]
    mismatch: Optional[int] = None

    for step in range(steps):
        transitions = []
        for rule, side_env, side_source, policy in sides:
            if side_env.pending_action is None or side_env.done:
                begin_episode(side_env, policy, side_source)
            transitions.append(sample_transition(side_env, policy, side_source))
        t_exp, t_dist = transitions

        if mismatch is None and (t_exp.a, t_exp.a_next) != (t_dist.a, t_dist.a_next):
            mismatch = step
        if mismatch is None and sides[0][2].counter != sides[1][2].counter:
            raise StreamMisalignmentError(f"step {step}: sources drifted apart with equal actions")

        expected.update(t_exp)
        distributional.update(t_dist)
        gaps.append(expectation_gap(expected.expectations(), distributional.expectations()))

    report = EquivalenceReport(name, gaps, tol, seed)
    report.extra["actions_agree"] = mismatch is None
    report.extra["first_action_mismatch"] = mismatch
    if mismatch is not None:
        report.violations.append(f"action sequences differ from step {mismatch}")
    return report


def run_operator_pair(
    expected: OperatorRule,
    distributional: OperatorRule,
    iterations: int,
    tol: float,
    seed: int = 0,
    name: str = "",
) -> EquivalenceReport:
    """
    Iterate two operators side by side and record the gap trace.

    A projected distributional rule also contributes its sup-Cramér
    distances between successive iterates; in evaluation mode these must
    not increase.
    """
    name = name or f"{expected.name} vs {distributional.name} ({distributional.mode.value})"
    gaps = [expectation_gap(expected.expectations(), distributional.expectations())]
    for _ in range(iterations):
        expected.apply()
        distributional.apply()
        gaps.append(expectation_gap(expected.expectations(), distributional.expectations()))

    report = EquivalenceReport(name, gaps, tol, seed)
    contraction = getattr(distributional, "contraction", None)
    if contraction:
        report.extra["contraction_first"] = contraction[0]
        report.extra["contraction_last"] = contraction[-1]
        if distributional.mode.value == "evaluation":
            increases = [
                i for i in range(1, len(contraction)) if contraction[i] > contraction[i - 1] + 1e-12
            ]
            if increases:
                report.violations.append(
                    f"sup-Cramér distance increased at iteration {increases[0]}"
                )
    return report


def probe_observations(env: Environment, count: int, source: SampleSource) -> np.ndarray:
    """count observations drawn uniformly inside the environment's feature bounds."""
    bounds = np.asarray(getattr(env, "bounds"), dtype=float)
    draws = source.uniforms(count * bounds.shape[0]).reshape(count, bounds.shape[0])
    return bounds[:, 0] + draws * (bounds[:, 1] - bounds[:, 0])


def run_agent_pair(
    distributional: MLPAgent,
    expected: MLPAgent,
    env: Environment,
    source: SampleSource,
    steps: int,
    probes: Sequence[Any],
    tol: float,
    seed: int = 0,
    name: str = "",
) -> EquivalenceReport:
    """
    Train two lite agents side by side and compare their action values on probes.

    Each agent gets its own env copy and source clone; they act on their
    own values.
    """
    name = name or f"{expected.config.head} vs {distributional.config.head}"
    features = np.stack([distributional.encode(p) for p in probes])
    env_d, env_e = env.copy(), env.copy()
    source_d, source_e = source.clone(), source.clone()

    def gap() -> float:
        return expectation_gap(
            expected.batch_values(features), distributional.batch_values(features)
        )

    gaps = [gap()]
    mismatch: Optional[int] = None
    for step in range(steps):
        stats_d = train_step(distributional, env_d, source_d)
        stats_e = train_step(expected, env_e, source_e)
        if mismatch is None and stats_d.transition.a != stats_e.transition.a:
            mismatch = step
        gaps.append(gap())

    report = EquivalenceReport(name, gaps, tol, seed)
    report.extra["actions_agree"] = mismatch is None
    report.extra["first_action_mismatch"] = mismatch
    report.extra["train_steps"] = distributional.train_steps
    return report
