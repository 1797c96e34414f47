"""
Coupled expected/distributional learners and the runnable equivalence checks.
"""

from cramerlab.coupling.harness import (
    CoupledPair,
    EquivalenceReport,
    Verdict,
    expectation_gap,
    run_agent_pair,
    run_coupled,
    run_coupled_control,
    run_operator_pair,
)
from cramerlab.coupling.propositions import (
    PROPOSITIONS,
    PropositionReport,
    resolve_id,
    verify_proposition,
)
from cramerlab.coupling.rules import RULE_NAMES, OperatorRule, UpdateRule, make_rule

__all__ = [
    "PROPOSITIONS",
    "RULE_NAMES",
    "CoupledPair",
    "EquivalenceReport",
    "OperatorRule",
    "PropositionReport",
    "UpdateRule",
    "Verdict",
    "expectation_gap",
    "make_rule",
    "resolve_id",
    "run_agent_pair",
    "run_coupled",
    "run_coupled_control",
    "run_operator_pair",
    "verify_proposition",
]
