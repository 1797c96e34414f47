"""
Runnable expectation-equivalence checks.

Each check has an id, a one-line claim and a runner that builds its
setting for one seed and returns one or more EquivalenceReports. Checks
that exhibit a counterexample pass when the divergence IS detected.
Seeds fan out over a process pool and results are merged in seed order.

    P1   Cramér projection keeps the expectation of in-bracket laws
    P2   exact distributional operator vs expected operator
    P3   projected distributional operator vs expected operator
    P4   exact mixture update vs SARSA
    P5   projected mixture update vs SARSA
    P6   CDF-gradient update at alpha/2c vs SARSA
    P7   PMF-gradient update vs SARSA (counterexample)
    P8   linear semi-gradient CDF update vs linear TD
    P9   sigmoid CDF model (counterexample)
    Cor  greedy control from equivalent learners
    NL   DQN-lite vs S51-lite-cdf with ReLU networks (counterexample)
    LC   DQN-lite vs S51-lite-cdf with linear heads and SGD
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from cramerlab.config.config_manager import VerificationConfig
from cramerlab.core import GeneralDiscrete, Support, cramer_project, grad_cramer_pmf
from cramerlab.coupling.harness import (
    CoupledPair,
    EquivalenceReport,
    Verdict,
    probe_observations,
    run_agent_pair,
    run_coupled,
    run_coupled_control,
    run_operator_pair,
)
from cramerlab.coupling.rules import (
    ExactDistOperatorRule,
    ExpectedOperatorRule,
    ProjectedDistOperatorRule,
    make_rule,
)
from cramerlab.envs.classic_control import CartPole
from cramerlab.envs.features import FourierBasis, random_features, random_probes
from cramerlab.envs.finite_mdp import FiniteMDP, random_finite_mdp
from cramerlab.envs.policies import TabularPolicy
from cramerlab.envs.sampling import SampleSource, TransitionSample
from cramerlab.errors import UnknownPropositionError
from cramerlab.learners.agents import AgentConfig, MLPAgent, mirror_expectations
from cramerlab.learners.linear import matched_init
from cramerlab.learners.nonlinear import sigmoid_cdf_counterexample
from cramerlab.learners.tabular import (
    CategoricalZTable,
    ExactZTable,
    QTable,
    pmf_gradient_update,
    projected_sample_target,
)

DYADIC_REWARDS = (-1.0, 0.0, 1.0)
DYADIC_GAMMA = 0.5
PROBE_STREAM = 2

Runner = Callable[[int, VerificationConfig], List[EquivalenceReport]]


@dataclass(frozen=True)
class Proposition:
    pid: str
    claim: str
    expect_divergence: bool
    runner: Runner
    seed_limit: Optional[str] = None


@dataclass
class PropositionReport:
    """Aggregate of one check over all seeds."""

    pid: str
    claim: str
    expect_divergence: bool
    reports: List[EquivalenceReport] = field(default_factory=list)
    config_hash: str = ""

    @property
    def expected_verdict(self) -> Verdict:
        return Verdict.DIVERGED if self.expect_divergence else Verdict.EQUIVALENT

    def report_passes(self, report: EquivalenceReport) -> bool:
        return report.verdict is self.expected_verdict and not report.violations

    @property
    def passed(self) -> bool:
        return bool(self.reports) and all(self.report_passes(r) for r in self.reports)

    def to_dict(self, include_trace: bool = True) -> Dict[str, Any]:
        return {
            "id": self.pid,
            "claim": self.claim,
            "expected_verdict": self.expected_verdict.value,
            "passed": self.passed,
            "config_hash": self.config_hash,
            "reports": [r.to_dict(include_trace) for r in self.reports],
        }

    def to_json(self, include_trace: bool = True) -> str:
        return json.dumps(self.to_dict(include_trace), sort_keys=True, indent=2)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        verdicts = sorted({r.verdict.value for r in self.reports})
        worst = max((r.max_gap for r in self.reports), default=0.0)
        return (
            f"{self.pid:<4} {status}  {self.claim} "
            f"[{len(self.reports)} runs, verdicts: {', '.join(verdicts)}, max gap {worst:.3g}]"
        )


def _random_setting(
    seed: int,
    cfg: VerificationConfig,
    gamma: float,
    reward_grid: Optional[Sequence[float]] = None,
    reward_range: Tuple[float, float] = (-1.0, 1.0),
    sizes: Optional[Tuple[int, int]] = None,
) -> Tuple[FiniteMDP, TabularPolicy, np.random.Generator]:
    """Seeded random MDP within the configured limits, plus a random policy."""
    rng = np.random.default_rng(seed)
    if sizes is None:
        n_states = int(rng.integers(min(2, cfg.max_states), cfg.max_states + 1))
        n_actions = int(rng.integers(1, cfg.max_actions + 1))
    else:
        n_states, n_actions = sizes
    n_reward_atoms = int(rng.integers(1, cfg.max_reward_atoms + 1))
    mdp = random_finite_mdp(
        n_states,
        n_actions,
        n_reward_atoms,
        seed=seed,
        gamma=gamma,
        reward_range=reward_range,
        reward_grid=reward_grid,
    )
    return mdp, TabularPolicy.random(n_states, n_actions, rng), rng


def _bracketing_support(mdp: FiniteMDP, n_atoms: int) -> Support:
    bound = max(mdp.value_bound, 1e-6)
    return Support.uniform(-bound, bound, n_atoms)


def _matched_tables(
    mdp: FiniteMDP, support: Support, rng: np.random.Generator
) -> Tuple[QTable, CategoricalZTable]:
    """Random in-range initial values and their projected-Dirac distributions."""
    values = rng.uniform(-1.0, 1.0, size=(mdp.n_states, mdp.n_actions)) * min(1.0, support.high)
    z0 = CategoricalZTable.from_values(values, support)
    return QTable(z0.expectations()), z0


def _projection(seed: int, cfg: VerificationConfig) -> List[EquivalenceReport]:
    rng = np.random.default_rng(seed)
    support = Support.uniform(-10.0, 10.0, 21)
    gaps = [0.0]
    for _ in range(cfg.projection_samples):
        n = int(rng.integers(1, 9))
        law = GeneralDiscrete.from_atoms(
            rng.uniform(support.low, support.high, n), rng.dirichlet(np.ones(n))
        )
        gaps.append(abs(cramer_project(law, support).expectation() - law.expectation()))
    return [EquivalenceReport("cramer-projection", gaps, cfg.projection_tol, seed)]


def _exact_operator(seed: int, cfg: VerificationConfig) -> List[EquivalenceReport]:
    mdp, policy, _ = _random_setting(seed, cfg, DYADIC_GAMMA, reward_grid=DYADIC_REWARDS)
    zeros = np.zeros((mdp.n_states, mdp.n_actions))
    reports = []
    for mode in ("evaluation", "optimality"):
        expected = ExpectedOperatorRule(QTable(zeros), mdp, policy, mode)
        dist = ExactDistOperatorRule(ExactZTable.from_values(zeros), mdp, policy, mode)
        report = run_operator_pair(expected, dist, cfg.exact_iterations, cfg.operator_tol, seed)
        report.extra["max_support_size"] = dist.state.max_support_size()
        reports.append(report)
    return reports


def _projected_operator(seed: int, cfg: VerificationConfig) -> List[EquivalenceReport]:
    mdp, policy, rng = _random_setting(seed, cfg, cfg.gamma)
    support = _bracketing_support(mdp, cfg.n_atoms)
    q0, z0 = _matched_tables(mdp, support, rng)
    reports = []
    for mode in ("evaluation", "optimality"):
        expected = ExpectedOperatorRule(q0, mdp, policy, mode)
        dist = ProjectedDistOperatorRule(z0, mdp, policy, mode)
        reports.append(
            run_operator_pair(expected, dist, cfg.operator_iterations, cfg.operator_tol, seed)
        )
    return reports


def _sample_pair(
    seed: int, cfg: VerificationConfig, rule: str, steps: int
) -> List[EquivalenceReport]:
    """SARSA against a projected distributional rule on a random MDP."""
    mdp, policy, rng = _random_setting(seed, cfg, cfg.gamma)
    support = _bracketing_support(mdp, cfg.n_atoms)
    q0, z0 = _matched_tables(mdp, support, rng)
    pair = CoupledPair(
        make_rule("sarsa", q0, cfg.alpha),
        make_rule(rule, z0, cfg.alpha),
        mdp,
        policy,
        SampleSource(seed),
    )
    return [run_coupled(pair, steps, cfg.sample_tol, seed)]


def _exact_mixture(seed: int, cfg: VerificationConfig) -> List[EquivalenceReport]:
    # Unprojected supports grow with every visit; a small dyadic MDP keeps them exact.
    mdp, policy, _ = _random_setting(
        seed, cfg, DYADIC_GAMMA, reward_grid=DYADIC_REWARDS, sizes=(3, 2)
    )
    zeros = np.zeros((mdp.n_states, mdp.n_actions))
    pair = CoupledPair(
        make_rule("sarsa", QTable(zeros), cfg.alpha),
        make_rule("mixture", ExactZTable.from_values(zeros), cfg.alpha),
        mdp,
        policy,
        SampleSource(seed),
    )
    report = run_coupled(pair, cfg.mixture_steps, cfg.sample_tol, seed)
    report.extra["max_support_size"] = pair.distributional.state.max_support_size()
    return [report]


def _projected_mixture(seed: int, cfg: VerificationConfig) -> List[EquivalenceReport]:
    return _sample_pair(seed, cfg, "projected-mixture", cfg.sample_steps)


def _cdf_gradient(seed: int, cfg: VerificationConfig) -> List[EquivalenceReport]:
    return _sample_pair(seed, cfg, "cdf-gradient", cfg.sample_steps)


COUNTEREXAMPLE_GAMMA = 0.75
COUNTEREXAMPLE_SUPPORT_ATOMS = (0.0, 1.0, 2.0)
PMF_DIRECTION = (0.0, -1.0 / 3.0, 0.0)


def pmf_counterexample_mdp() -> FiniteMDP:
    """x0 -> x1 -> x1 with zero rewards, one action and gamma 0.75."""
    transition = np.zeros((2, 1, 2))
    transition[:, 0, 1] = 1.0
    return FiniteMDP(
        "pmf_counterexample",
        transition,
        np.zeros((2, 1, 1)),
        np.ones((2, 1, 1)),
        COUNTEREXAMPLE_GAMMA,
        start_probs=np.array([1.0, 0.0]),
    )


def pmf_counterexample_table() -> CategoricalZTable:
    """
    Z(x0) uniform on (0, 1, 2) and a signed Z(x1) whose discounted target
    projects to (1/2, 0, 1/2): the same expectation as Z(x0), a different CDF.
    """
    support = Support(np.array(COUNTEREXAMPLE_SUPPORT_ATOMS), spacing=1.0)
    mass = np.array([[[1 / 3, 1 / 3, 1 / 3]], [[2 / 3, -2 / 3, 1.0]]])
    return CategoricalZTable(support, mass)


def _pmf_counterexample(seed: int, cfg: VerificationConfig) -> List[EquivalenceReport]:
    mdp = pmf_counterexample_mdp()
    z0 = pmf_counterexample_table()
    q0 = QTable(z0.expectations())
    first = TransitionSample(0, 0, 0.0, 1, 0, gamma=COUNTEREXAMPLE_GAMMA)

    reports = []
    for alpha in cfg.pmf_alphas:
        pair = CoupledPair(
            make_rule("sarsa", q0, alpha),
            make_rule("pmf-gradient", z0, alpha),
            mdp,
            TabularPolicy.uniform(2, 1),
            SampleSource(seed),
        )
        report = run_coupled(pair, cfg.counterexample_steps, cfg.divergence_tol, seed)

        direction = grad_cramer_pmf(z0.dist(0, 0), projected_sample_target(z0, first))
        after = pmf_gradient_update(z0, first, alpha).expectations()[0, 0]
        report.name = f"sarsa vs pmf-gradient (alpha={alpha:g})"
        report.extra.update(
            {
                "alpha": alpha,
                "direction": [float(v) for v in direction],
                "first_step_expectation": float(after),
                "first_step_expected": 1.0 - alpha / 3.0,
            }
        )
        if np.max(np.abs(direction - np.array(PMF_DIRECTION))) > 1e-12:
            report.violations.append(f"PMF direction {direction} != (0, -1/3, 0)")
        if abs(after - (1.0 - alpha / 3.0)) > 1e-12:
            report.violations.append(f"first-step expectation {after!r} != 1 - alpha/3")
        reports.append(report)
    return reports


def _linear(seed: int, cfg: VerificationConfig) -> List[EquivalenceReport]:
    half_width = (cfg.linear_atoms - 1) // 2
    reward_bound = half_width * (1.0 - cfg.gamma)
    mdp, policy, rng = _random_setting(
        seed, cfg, cfg.gamma, reward_range=(-reward_bound, reward_bound)
    )
    features = random_features(mdp.n_states, mdp.n_actions, cfg.linear_dim, rng)
    support = Support.c_spaced(-half_width, 1.0, cfg.linear_atoms)
    z0, q0 = matched_init(features.all_features(), support, perturbation=0.1, rng=rng)
    probes = np.vstack(
        [features.all_features(), random_probes(cfg.linear_probes, cfg.linear_dim, rng)]
    )

    options = {"phi_fn": features, "probes": probes}
    pair = CoupledPair(
        make_rule("linear-q", q0, cfg.linear_alpha, **options),
        make_rule("linear-cdf", z0, cfg.linear_alpha, **options),
        mdp,
        policy,
        SampleSource(seed),
    )
    report = run_coupled(pair, cfg.linear_steps, cfg.linear_tol, seed)
    # Mass is only pinned on the features the MDP can produce.
    final_w = pair.distributional.state.w  # type: ignore[attr-defined]
    mass_error = float(np.max(np.abs(features.all_features() @ final_w[-1] - 1.0)))
    report.extra["max_mass_error"] = mass_error
    if mass_error > 1e-9:
        report.violations.append(f"predicted total mass drifted by {mass_error:.3g}")
    return [report]


def _sigmoid(seed: int, cfg: VerificationConfig) -> List[EquivalenceReport]:
    result = sigmoid_cdf_counterexample()
    gaps = [abs(result.e_z0 - result.q0), abs(result.e_z1 - result.q1)]
    report = EquivalenceReport("linear-q vs sigmoid-cdf", gaps, cfg.divergence_tol, seed)
    report.extra.update(result.to_dict())
    g1, g2 = result.gradients
    if abs(g1 - 2.0 / 27.0) > 1e-12 or abs(g2 + 4.0 / 27.0) > 1e-12:
        report.violations.append(f"gradient components ({g1}, {g2}) != (2/27, -4/27)")
    if result.q1 != 0.0:
        report.violations.append(f"expected learner moved: Q1 = {result.q1}")
    if not 0.04 <= abs(result.e_z1) <= 0.06:
        report.violations.append(f"|E[Z1]| = {abs(result.e_z1):.4f} outside [0.04, 0.06]")
    return [report]


def _control(seed: int, cfg: VerificationConfig) -> List[EquivalenceReport]:
    mdp, _, rng = _random_setting(seed, cfg, cfg.gamma)
    support = _bracketing_support(mdp, cfg.n_atoms)
    q0, z0 = _matched_tables(mdp, support, rng)
    reports = []
    for rule in ("projected-mixture", "cdf-gradient"):
        reports.append(
            run_coupled_control(
                make_rule("sarsa", q0, cfg.alpha, q_learning=True),
                make_rule(rule, z0, cfg.alpha, q_learning=True),
                mdp,
                SampleSource(seed),
                cfg.sample_steps,
                cfg.sample_tol,
                cfg.control_epsilon,
                seed,
            )
        )
    return reports


def _network_pair(
    seed: int, cfg: VerificationConfig, linear: bool
) -> List[EquivalenceReport]:
    env = CartPole()
    probes = probe_observations(env, 32, SampleSource(seed, (PROBE_STREAM,)))
    if linear:
        basis = FourierBasis(1, env.bounds)
        encoder, input_dim = basis, basis.n_features
        common: Dict[str, Any] = {
            "hidden": (),
            "optimizer": "sgd",
            "learning_rate": 0.01,
            "seed": seed,
        }
        tol = cfg.linear_tol
    else:
        encoder, input_dim = None, CartPole.state_dim
        common = {"seed": seed}
        tol = cfg.divergence_tol

    s51 = MLPAgent(
        AgentConfig.from_algorithm("s51-lite-cdf", **common),
        input_dim,
        env.n_actions,
        encoder,
        env.value_bound,
    )
    dqn = MLPAgent(
        AgentConfig.from_algorithm("dqn-lite", **common),
        input_dim,
        env.n_actions,
        encoder,
    )
    mirror_expectations(s51, dqn)
    name = "dqn-lite vs s51-lite-cdf (" + ("linear, sgd" if linear else "relu, adam") + ")"
    report = run_agent_pair(
        s51, dqn, env, SampleSource(seed), cfg.network_steps, probes, tol, seed, name
    )
    return [report]


def _network_divergence(seed: int, cfg: VerificationConfig) -> List[EquivalenceReport]:
    return _network_pair(seed, cfg, linear=False)


def _network_linear(seed: int, cfg: VerificationConfig) -> List[EquivalenceReport]:
    return _network_pair(seed, cfg, linear=True)


PROPOSITIONS: Dict[str, Proposition] = {
    p.pid: p
    for p in (
        Proposition("P1", "Cramér projection keeps the expectation", False, _projection),
        Proposition("P2", "exact distributional operator tracks T", False, _exact_operator),
        Proposition("P3", "projected distributional operator tracks T", False, _projected_operator),
        Proposition("P4", "exact mixture update tracks SARSA", False, _exact_mixture),
        Proposition("P5", "projected mixture update tracks SARSA", False, _projected_mixture),
        Proposition("P6", "CDF-gradient update at alpha/2c tracks SARSA", False, _cdf_gradient),
        Proposition("P7", "PMF-gradient update breaks equivalence", True, _pmf_counterexample),
        Proposition("P8", "linear CDF semi-gradient tracks linear TD", False, _linear),
        Proposition("P9", "sigmoid CDF model breaks equivalence", True, _sigmoid),
        Proposition("Cor", "equivalent learners act identically under control", False, _control),
        Proposition(
            "NL", "ReLU lite agents drift apart", True, _network_divergence, "network_seeds"
        ),
        Proposition(
            "LC", "linear lite agents stay equivalent", False, _network_linear, "network_seeds"
        ),
    )
}

# The counterexamples are fixed configurations; one seed reproduces them.
SINGLE_SEED = ("P7", "P9")


def resolve_id(pid: str) -> str:
    """
    Canonical spelling of a check id (case-insensitive).

    Raises:
        UnknownPropositionError: If pid is not registered
    """
    lookup = {key.lower(): key for key in PROPOSITIONS}
    key = lookup.get(pid.lower())
    if key is None:
        raise UnknownPropositionError(
            f"Unknown proposition: {pid}. Valid options: {', '.join(PROPOSITIONS)}"
        )
    return key


def _run_seed(pid: str, seed: int, cfg: VerificationConfig) -> List[EquivalenceReport]:
    return PROPOSITIONS[pid].runner(seed, cfg)


def verify_proposition(
    pid: str,
    seeds: Sequence[int],
    config: Optional[VerificationConfig] = None,
    workers: int = 1,
) -> PropositionReport:
    """
    Run one check over seeds and aggregate the verdicts.

    Args:
        pid: Check id such as "P6" or "Cor"
        seeds: Seeds to run; fixed-configuration checks use the first only
        config: Sizes and tolerances (defaults when omitted)
        workers: Processes for the seed fan-out

    Raises:
        UnknownPropositionError: If pid is not registered
    """
    key = resolve_id(pid)
    prop = PROPOSITIONS[key]
    cfg = config or VerificationConfig()
    seeds = list(seeds) or [0]
    if key in SINGLE_SEED:
        seeds = seeds[:1]
    if prop.seed_limit is not None:
        seeds = seeds[: max(1, int(getattr(cfg, prop.seed_limit)))]

    logger.info(f"Verifying {key} ({prop.claim}) on {len(seeds)} seed(s)")
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_seed = list(pool.map(_run_seed, [key] * len(seeds), seeds, [cfg] * len(seeds)))
    else:
        per_seed = [_run_seed(key, seed, cfg) for seed in seeds]

    config_hash = cfg.config_hash()
    result = PropositionReport(key, prop.claim, prop.expect_divergence, config_hash=config_hash)
    for reports in per_seed:
        for report in reports:
            report.config_hash = config_hash
            result.reports.append(report)

    log = logger.info if result.passed else logger.error
    log(result.summary())
    return result
