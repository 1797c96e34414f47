"""
Categorical distribution core: supports, projection and Cramér geometry.
"""

from cramerlab.core.distributions import (
    MASS_TOL,
    SUPPORT_CAP,
    Categorical,
    Conversion,
    Distribution,
    GeneralDiscrete,
    Support,
    cdf_direction,
    cramer_distance,
    cramer_distance_general,
    cramer_project,
    expectation,
    grad_cramer_cdf,
    grad_cramer_pmf,
    merge_atoms,
    mix,
    pmf_direction,
    pmf_cdf_convert,
    project_atoms,
    project_atoms_batch,
    to_cdf,
    to_pmf,
)

__all__ = [
    "MASS_TOL",
    "SUPPORT_CAP",
    "Categorical",
    "Conversion",
    "Distribution",
    "GeneralDiscrete",
    "Support",
    "cdf_direction",
    "cramer_distance",
    "cramer_distance_general",
    "cramer_project",
    "expectation",
    "grad_cramer_cdf",
    "grad_cramer_pmf",
    "merge_atoms",
    "mix",
    "pmf_direction",
    "pmf_cdf_convert",
    "project_atoms",
    "project_atoms_batch",
    "to_cdf",
    "to_pmf",
]
