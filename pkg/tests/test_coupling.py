"""
Tests for the coupling harness and the registered equivalence checks.
"""

import json

import numpy as np
import pytest

from cramerlab.config import VerificationConfig
from cramerlab.core import Support
from cramerlab.coupling import (
    PROPOSITIONS,
    CoupledPair,
    EquivalenceReport,
    Verdict,
    make_rule,
    run_coupled,
    verify_proposition,
)
from cramerlab.coupling.propositions import resolve_id
from cramerlab.envs import SampleSource, TabularPolicy, chain3
from cramerlab.errors import UnknownPropositionError
from cramerlab.learners.tabular import CategoricalZTable, QTable

SMALL = VerificationConfig(
    max_states=4,
    max_actions=2,
    max_reward_atoms=3,
    operator_iterations=30,
    exact_iterations=4,
    sample_steps=400,
    mixture_steps=20,
    projection_samples=100,
    linear_steps=300,
    counterexample_steps=5,
    network_steps=150,
    network_seeds=1,
)


def test_report_verdict_follows_trace():
    report = EquivalenceReport("demo", [0.0, 1e-12, 5e-3, 1e-12], tol=1e-3, seed=0)
    assert report.verdict is Verdict.DIVERGED
    assert report.first_divergence == 2
    assert report.steps == 3
    assert report.to_dict()["first_divergence"] == {"step": 2, "gap": 5e-3}

    quiet = EquivalenceReport("demo", [0.0, 1e-12], tol=1e-3, seed=0)
    assert quiet.verdict is Verdict.EQUIVALENT
    assert "gaps" not in quiet.to_dict(include_trace=False)


def test_coupled_pair_needs_matched_start():
    mdp = chain3()
    support = Support.uniform(-10.0, 10.0, 21)
    shifted = CategoricalZTable.from_values(np.ones((3, 2)), support)
    with pytest.raises(ValueError):
        CoupledPair(
            make_rule("sarsa", QTable.zeros(3, 2), 0.1),
            make_rule("projected-mixture", shifted, 0.1),
            mdp,
            TabularPolicy.uniform(3, 2),
            SampleSource(0),
        )


def test_coupled_run_on_chain():
    """SARSA and the CDF-gradient rule stay together on the chain."""
    mdp = chain3()
    support = Support.uniform(-10.0, 10.0, 51)
    q0 = QTable.zeros(3, 2)
    pair = CoupledPair(
        make_rule("sarsa", q0, 0.2),
        make_rule("cdf-gradient", CategoricalZTable.from_values(q0, support), 0.2),
        mdp,
        TabularPolicy.uniform(3, 2),
        SampleSource(1),
    )
    report = run_coupled(pair, 500, 1e-8, seed=1)

    assert report.steps == 500
    assert report.verdict is Verdict.EQUIVALENT, f"max gap {report.max_gap}"
    assert pair.expected.expectations().max() > 0, "the learners should have seen rewards"


def test_make_rule_rejects_unknown_names():
    with pytest.raises(ValueError, match="Unknown update rule"):
        make_rule("td-lambda", QTable.zeros(1, 1), 0.1)


@pytest.mark.parametrize("pid", ["P1", "P2", "P3", "P4", "P5", "P6", "P8", "Cor"])
def test_equivalence_checks_pass(pid):
    """Checks that claim equivalence find every gap below tolerance."""
    result = verify_proposition(pid, [0, 1], SMALL)

    assert result.passed, result.to_json(include_trace=False)
    assert result.expected_verdict is Verdict.EQUIVALENT
    assert all(r.config_hash == SMALL.config_hash() for r in result.reports)


@pytest.mark.parametrize("pid", ["P7", "P9"])
def test_counterexamples_are_detected(pid):
    """Counterexample checks pass when the divergence shows up, on one seed."""
    result = verify_proposition(pid, [0, 1, 2], SMALL)

    assert result.passed, result.to_json(include_trace=False)
    assert result.expected_verdict is Verdict.DIVERGED
    assert {r.seed for r in result.reports} == {0}


def test_pmf_counterexample_golden_numbers():
    result = verify_proposition("P7", [0], SMALL)
    for report in result.reports:
        alpha = report.extra["alpha"]
        np.testing.assert_allclose(report.extra["direction"], [0.0, -1 / 3, 0.0], atol=1e-12)
        assert report.extra["first_step_expectation"] == pytest.approx(1 - alpha / 3, abs=1e-12)
        assert report.gaps[1] == pytest.approx(alpha / 3, abs=1e-12)
    assert len(result.reports) == len(SMALL.pmf_alphas)


def test_ids_are_case_insensitive():
    assert resolve_id("p6") == "P6"
    assert resolve_id("cor") == "Cor"
    with pytest.raises(UnknownPropositionError):
        verify_proposition("P42", [0], SMALL)


def test_reports_serialize_to_json():
    result = verify_proposition("P1", [0], SMALL)
    data = json.loads(result.to_json())
    assert data["id"] == "P1"
    assert data["passed"] is True
    assert len(data["reports"][0]["gaps"]) == SMALL.projection_samples + 1


def test_all_checks_registered():
    expected = ["P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "P9", "Cor", "NL", "LC"]
    assert list(PROPOSITIONS) == expected


def test_parallel_seeds_match_serial():
    """The process pool returns the same traces in seed order."""
    serial = verify_proposition("P5", [0, 1, 2], SMALL, workers=1)
    parallel = verify_proposition("P5", [0, 1, 2], SMALL, workers=2)
    assert [r.seed for r in parallel.reports] == [0, 1, 2]
    assert [r.gaps for r in parallel.reports] == [r.gaps for r in serial.reports]


@pytest.mark.slow
def test_linear_lite_agents_stay_equivalent():
    result = verify_proposition("LC", [0], SMALL)
    assert result.passed, result.to_json(include_trace=False)


@pytest.mark.slow
def test_relu_lite_agents_drift_apart():
    config = VerificationConfig(network_steps=1000, network_seeds=1)
    result = verify_proposition("NL", [0], config)
    assert result.passed, result.to_json(include_trace=False)


# Exact supports on the dyadic grid hold at most 2^(n+1) + 1 atoms after n rounds.
FULL_BUDGET = VerificationConfig(exact_iterations=12)


@pytest.mark.slow
@pytest.mark.parametrize("pid", ["P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "P9", "Cor"])
def test_checks_pass_at_full_budget(pid):
    """200 operator iterations and 10^4 sampled steps on the default sizes."""
    assert FULL_BUDGET.operator_iterations == 200
    assert FULL_BUDGET.sample_steps == 10_000
    result = verify_proposition(pid, [0, 1, 2], FULL_BUDGET)

    assert result.passed, result.to_json(include_trace=False)
    if pid == "P2":
        sizes = [r.extra["max_support_size"] for r in result.reports]
        assert max(sizes) <= 2**13 + 1
