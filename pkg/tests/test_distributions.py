"""
Tests for supports, Cramér projection and the PMF/CDF geometry.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cramerlab.core import (
    Categorical,
    Conversion,
    GeneralDiscrete,
    Support,
    cramer_distance,
    cramer_distance_general,
    cramer_project,
    grad_cramer_cdf,
    grad_cramer_pmf,
    merge_atoms,
    mix,
    pmf_cdf_convert,
    project_atoms,
    project_atoms_batch,
)
from cramerlab.errors import (
    DimensionError,
    MassError,
    SpacingError,
    SupportMismatchError,
    SupportOverflowError,
)

SUPPORT = Support.uniform(-5.0, 5.0, 11)

inner_atoms = st.lists(
    st.tuples(
        st.floats(min_value=-5.0, max_value=5.0, allow_nan=False),
        st.floats(min_value=0.01, max_value=1.0, allow_nan=False),
    ),
    min_size=1,
    max_size=8,
)
grid_weights = st.lists(
    st.floats(min_value=0.0, max_value=1.0, allow_nan=False), min_size=11, max_size=11
).filter(lambda w: sum(w) > 0.01)


def _on_grid(weights):
    mass = np.array(weights)
    return Categorical(SUPPORT, mass / mass.sum())


def test_uniform_support_is_c_spaced():
    """uniform() builds an evenly spaced grid and records its spacing."""
    support = Support.uniform(-10.0, 10.0, 51)

    assert support.size == 51
    assert support.spacing == pytest.approx(0.4)
    assert support.low == -10.0 and support.high == 10.0
    assert support.require_spacing() == pytest.approx(0.4)


def test_support_rejects_bad_grids():
    """Unsorted, short or wrongly spaced grids are refused."""
    with pytest.raises(ValueError):
        Support(np.array([0.0, 2.0, 1.0]))
    with pytest.raises(DimensionError):
        Support(np.array([1.0]))
    with pytest.raises(SpacingError):
        Support(np.array([0.0, 1.0, 3.0]), spacing=1.0)
    with pytest.raises(SpacingError):
        Support(np.array([0.0, 1.0, 3.0])).require_spacing()


def test_support_brackets():
    """brackets() checks [-bound, bound] against the grid ends."""
    assert SUPPORT.brackets(5.0)
    assert not SUPPORT.brackets(5.5)


def test_categorical_mass_check():
    """Improper mass is refused unless the check is switched off."""
    with pytest.raises(MassError):
        Categorical(SUPPORT, np.full(11, 0.2))

    signed = Categorical(SUPPORT, np.full(11, 0.2), check_mass=False)
    assert signed.total_mass == pytest.approx(2.2)
    assert not signed.is_proper


@given(inner_atoms)
@settings(max_examples=200, deadline=None)
def test_projection_preserves_expectation_inside_support(atoms):
    """Projecting atoms that lie within [z_1, z_K] keeps mass and mean."""
    locations = np.array([a for a, _ in atoms])
    masses = np.array([m for _, m in atoms])
    masses = masses / masses.sum()

    projected = project_atoms(locations, masses, SUPPORT)

    assert projected.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(projected >= -1e-15), "projection of nonnegative mass stays nonnegative"
    assert projected @ SUPPORT.atoms == pytest.approx(locations @ masses, abs=1e-9)


def test_projection_splits_between_neighbours():
    """An atom at 0.25 between atoms 0 and 1 gives 3/4 and 1/4."""
    support = Support.c_spaced(0.0, 1.0, 3)
    projected = project_atoms([0.25], [1.0], support)
    np.testing.assert_allclose(projected, [0.75, 0.25, 0.0])


def test_projection_clamps_outside_atoms():
    """Atoms beyond either end collapse onto the nearest end atom."""
    projected = project_atoms([-100.0, 100.0], [0.3, 0.7], SUPPORT)
    assert projected[0] == pytest.approx(0.3)
    assert projected[-1] == pytest.approx(0.7)
    assert projected[1:-1].sum() == 0.0


def test_projection_is_identity_on_support():
    """A categorical already on the support projects to itself."""
    mass = np.arange(1.0, 12.0)
    mass /= mass.sum()
    projected = cramer_project(Categorical(SUPPORT, mass), SUPPORT)
    np.testing.assert_allclose(projected.mass, mass, atol=1e-15)


def test_batch_projection_matches_rowwise():
    """project_atoms_batch agrees with project_atoms row by row."""
    rng = np.random.default_rng(3)
    locations = rng.uniform(-7.0, 7.0, size=(5, 6))
    masses = rng.dirichlet(np.ones(6), size=5)

    batch = project_atoms_batch(locations, masses, SUPPORT)
    for row in range(5):
        np.testing.assert_allclose(
            batch[row], project_atoms(locations[row], masses[row], SUPPORT), atol=1e-14
        )


def test_projection_dimension_mismatch():
    with pytest.raises(DimensionError):
        project_atoms([0.0, 1.0], [1.0], SUPPORT)


def test_conversions_are_inverse():
    """to_cdf is prefix sums and to_pmf undoes it."""
    pmf = np.array([0.1, 0.2, 0.3, 0.4])
    cdf = pmf_cdf_convert(pmf, "to_cdf")

    np.testing.assert_allclose(cdf, [0.1, 0.3, 0.6, 1.0])
    np.testing.assert_allclose(pmf_cdf_convert(cdf, Conversion.TO_PMF), pmf)
    with pytest.raises(ValueError):
        pmf_cdf_convert(pmf, "sideways")


def test_cramer_distance_basic_properties():
    """Zero on itself, symmetric, and exact for two Diracs."""
    p = Categorical.dirac(SUPPORT, -2.0)
    q = Categorical.dirac(SUPPORT, 3.0)

    assert cramer_distance(p, p) == 0.0
    assert cramer_distance(p, q) == pytest.approx(cramer_distance(q, p))
    # F_p - F_q is 1 on [-2, 3): squared distance is the interval length
    assert cramer_distance(p, q) == pytest.approx(np.sqrt(5.0))


def test_cramer_distance_needs_same_support():
    other = Support.uniform(-5.0, 5.0, 21)
    with pytest.raises(SupportMismatchError):
        cramer_distance(Categorical.dirac(SUPPORT, 0.0), Categorical.dirac(other, 0.0))


@given(inner_atoms, grid_weights)
@settings(max_examples=200, deadline=None)
def test_projection_is_the_closest_grid_law(atoms, weights):
    """No distribution on the grid is closer to an in-range law than its projection."""
    masses = np.array([m for _, m in atoms])
    law = GeneralDiscrete.from_atoms([a for a, _ in atoms], masses / masses.sum())
    projected = cramer_project(law, SUPPORT)
    rival = _on_grid(weights)

    best = cramer_distance_general(projected, law)
    assert best <= cramer_distance_general(rival, law) + 1e-9


@given(grid_weights, grid_weights, grid_weights)
@settings(max_examples=200, deadline=None)
def test_cramer_distance_triangle_inequality(a, b, c):
    p, q, r = _on_grid(a), _on_grid(b), _on_grid(c)
    assert cramer_distance(p, r) <= cramer_distance(p, q) + cramer_distance(q, r) + 1e-12


def test_general_distance_agrees_on_shared_support():
    """cramer_distance_general matches cramer_distance for categoricals."""
    p = Categorical(SUPPORT, np.full(11, 1.0 / 11.0))
    q = Categorical.dirac(SUPPORT, 1.0)
    assert cramer_distance_general(p, q) == pytest.approx(cramer_distance(p, q), abs=1e-12)


def test_cdf_direction_step_is_mixture():
    """A CDF step of alpha / 2c along the direction is the alpha-mixture."""
    rng = np.random.default_rng(11)
    p = Categorical(SUPPORT, rng.dirichlet(np.ones(11)))
    target = Categorical(SUPPORT, rng.dirichlet(np.ones(11)))
    alpha = 0.3
    c = SUPPORT.require_spacing()

    stepped = p.cdf + alpha / (2.0 * c) * grad_cramer_cdf(p, target)
    expected = mix(p, target, alpha)

    np.testing.assert_allclose(stepped, expected.cdf, atol=1e-12)
    assert expected.expectation() == pytest.approx(
        (1 - alpha) * p.expectation() + alpha * target.expectation(), abs=1e-12
    )


def test_pmf_direction_last_component_is_zero():
    """The last PMF component has no tail to sum over."""
    p = Categorical.dirac(SUPPORT, -5.0)
    target = Categorical.dirac(SUPPORT, 5.0)
    direction = grad_cramer_pmf(p, target)

    assert direction[-1] == 0.0
    # F_target - F_p = -1 on atoms 0..9, times 2c = 2
    np.testing.assert_allclose(direction[:-1], -2.0 * np.arange(10, 0, -1))


def test_directions_require_c_spacing():
    support = Support(np.array([0.0, 1.0, 3.0]))
    p = Categorical.dirac(support, 0.0)
    with pytest.raises(SpacingError):
        grad_cramer_cdf(p, p)


def test_merge_atoms_sums_coincident_locations():
    locations, masses = merge_atoms([1.0, 0.0, 1.0], [0.25, 0.5, 0.25])
    np.testing.assert_allclose(locations, [0.0, 1.0])
    np.testing.assert_allclose(masses, [0.5, 0.5])


def test_general_discrete_affine_and_mixture():
    """affine shifts and scales, mixture merges atoms."""
    d = GeneralDiscrete.from_atoms([0.0, 2.0], [0.5, 0.5])
    shifted = d.affine(1.0, 0.5)

    np.testing.assert_allclose(shifted.locations, [1.0, 2.0])
    assert shifted.expectation() == pytest.approx(1.5)

    mixed = GeneralDiscrete.mixture([(0.5, d), (0.5, shifted)])
    np.testing.assert_allclose(mixed.locations, [0.0, 1.0, 2.0])
    np.testing.assert_allclose(mixed.mass, [0.25, 0.5, 0.25])
    np.testing.assert_allclose(mixed.cdf_at(np.array([-1.0, 1.0, 5.0])), [0.0, 0.75, 1.0])


def test_general_discrete_cap():
    with pytest.raises(SupportOverflowError):
        GeneralDiscrete.from_atoms(np.arange(10.0), np.full(10, 0.1), cap=5)
