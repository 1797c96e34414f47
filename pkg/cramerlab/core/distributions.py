"""
Categorical return distributions on fixed supports.

Provides the Support grid, signed Categorical distributions over it,
GeneralDiscrete laws with arbitrary atom locations, and the operations the
learners build on: expectation, Cramér distance, Cramér projection, PMF/CDF
conversion and the two Cramér update directions.

All objects are immutable after construction and every operation is a pure
function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from cramerlab.errors import (
    DimensionError,
    MassError,
    SpacingError,
    SupportMismatchError,
    SupportOverflowError,
)

MASS_TOL = 1e-12
MERGE_TOL = 1e-12
SPACING_RTOL = 1e-9
SUPPORT_CAP = 100_000


def _frozen(values: np.ndarray) -> np.ndarray:
    array = np.array(values, dtype=float, copy=True)
    array.setflags(write=False)
    return array


class Conversion(str, Enum):
    """Direction of a PMF/CDF conversion."""

    TO_CDF = "to_cdf"
    TO_PMF = "to_pmf"


@dataclass(frozen=True, eq=False)
class Support:
    """
    Ascending atom grid z_1 < ... < z_K shared by categorical objects.

    Attributes:
        atoms: Atom locations in return units
        spacing: The constant gap c when the grid is c-spaced, else None
    """

    atoms: np.ndarray
    spacing: Optional[float] = None

    def __post_init__(self) -> None:
        atoms = _frozen(self.atoms)
        if atoms.ndim != 1 or atoms.size < 2:
            raise DimensionError(f"support needs at least 2 atoms, got shape {atoms.shape}")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("support atoms must be finite")
        gaps = np.diff(atoms)
        if np.any(gaps <= 0):
            raise ValueError("support atoms must be strictly ascending")
        if self.spacing is not None:
            c = float(self.spacing)
            if c <= 0 or not np.allclose(gaps, c, rtol=SPACING_RTOL, atol=0.0):
                raise SpacingError(f"atoms are not {c}-spaced (gaps {gaps.min()}..{gaps.max()})")
            object.__setattr__(self, "spacing", c)
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def uniform(cls, low: float, high: float, n_atoms: int) -> Support:
        """Build a c-spaced support of n_atoms atoms from low to high inclusive."""
        if n_atoms < 2 or high <= low:
            raise ValueError(f"invalid uniform support: [{low}, {high}] with {n_atoms} atoms")
        c = (high - low) / (n_atoms - 1)
        return cls(np.linspace(low, high, n_atoms), spacing=c)

    @classmethod
    def c_spaced(cls, start: float, spacing: float, n_atoms: int) -> Support:
        """Build z_i = start + (i - 1) * spacing for i = 1..n_atoms."""
        return cls(start + spacing * np.arange(n_atoms), spacing=spacing)

    @property
    def size(self) -> int:
        return int(self.atoms.size)

    @property
    def low(self) -> float:
        return float(self.atoms[0])

    @property
    def high(self) -> float:
        return float(self.atoms[-1])

    def require_spacing(self) -> float:
        """Return c, or raise SpacingError if the grid is not c-spaced."""
        if self.spacing is None:
            raise SpacingError("operation requires a c-spaced support")
        return self.spacing

    def brackets(self, bound: float) -> bool:
        """True when [-bound, bound] lies inside [z_1, z_K]."""
        return self.low <= -bound and self.high >= bound

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Support):
            return NotImplemented
        return self.spacing == other.spacing and np.array_equal(self.atoms, other.atoms)

    def __repr__(self) -> str:
        return f"Support(K={self.size}, [{self.low:g}, {self.high:g}], spacing={self.spacing})"


@dataclass(frozen=True, eq=False)
class Categorical:
    """
    A (possibly signed) mass vector over a Support.

    Signed components are kept as-is: the learners may output improper
    distributions. The unit-mass check can be switched off for update
    trajectories that are known to leave the simplex.

    Attributes:
        support: The atom grid
        mass: PMF view, one entry per atom
        check_mass: Validate sum(mass) == 1 at construction
    """

    support: Support
    mass: np.ndarray
    check_mass: bool = field(default=True, repr=False)

    def __post_init__(self) -> None:
        mass = _frozen(self.mass)
        if mass.shape != (self.support.size,):
            raise DimensionError(
                f"mass has shape {mass.shape}, support has {self.support.size} atoms"
            )
        if not np.all(np.isfinite(mass)):
            raise ValueError("mass must be finite")
        if self.check_mass and abs(mass.sum() - 1.0) > MASS_TOL:
            raise MassError(f"total mass {mass.sum():.15g} is not 1")
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_cdf(
        cls, support: Support, cdf: Sequence[float], check_mass: bool = True
    ) -> Categorical:
        return cls(support, to_pmf(np.asarray(cdf, dtype=float)), check_mass=check_mass)

    @classmethod
    def dirac(cls, support: Support, value: float) -> Categorical:
        """Projection of the Dirac at value onto support."""
        return cls(support, project_atoms([value], [1.0], support))

    @property
    def locations(self) -> np.ndarray:
        return self.support.atoms

    @property
    def pmf(self) -> np.ndarray:
        return self.mass

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.mass)

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    @property
    def is_proper(self) -> bool:
        return bool(np.all(self.mass >= -MASS_TOL) and abs(self.total_mass - 1.0) <= MASS_TOL)

    def expectation(self) -> float:
        return float(self.support.atoms @ self.mass)


@dataclass(frozen=True, eq=False)
class GeneralDiscrete:
    """
    A discrete law on arbitrary ascending locations.

    Holds unprojected targets such as r + gamma * Z before they are
    projected. Use from_atoms to build one from unsorted, possibly
    coincident atoms.
    """

    locations: np.ndarray
    mass: np.ndarray

    def __post_init__(self) -> None:
        locations = _frozen(self.locations)
        mass = _frozen(self.mass)
        if locations.ndim != 1 or locations.shape != mass.shape or locations.size == 0:
            raise DimensionError(
                f"locations {locations.shape} and mass {mass.shape} must be equal 1-d shapes"
            )
        if np.any(np.diff(locations) <= 0):
            raise ValueError("locations must be strictly ascending")
        if np.any(mass < -MASS_TOL):
            raise MassError("general discrete mass must be nonnegative")
        if abs(mass.sum() - 1.0) > MASS_TOL:
            raise MassError(f"total mass {mass.sum():.15g} is not 1")
        object.__setattr__(self, "locations", locations)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_atoms(
        cls,
        locations: Sequence[float],
        masses: Sequence[float],
        cap: int = SUPPORT_CAP,
    ) -> GeneralDiscrete:
        """
        Build a law from unsorted atoms, merging locations within MERGE_TOL.

        Raises:
            SupportOverflowError: If more than cap distinct atoms remain
        """
        locs, mass = merge_atoms(locations, masses)
        if locs.size > cap:
            raise SupportOverflowError(
                f"unprojected support has {locs.size} atoms (cap {cap}); use a projected rule"
            )
        return cls(locs, mass)

    @classmethod
    def dirac(cls, value: float) -> GeneralDiscrete:
        return cls(np.array([float(value)]), np.array([1.0]))

    @classmethod
    def mixture(
        cls, components: Sequence[Tuple[float, GeneralDiscrete]], cap: int = SUPPORT_CAP
    ) -> GeneralDiscrete:
        """Weighted mixture of laws; the weights must sum to 1."""
        locs = np.concatenate([d.locations for _, d in components])
        mass = np.concatenate([w * d.mass for w, d in components])
        return cls.from_atoms(locs, mass, cap=cap)

    @property
    def size(self) -> int:
        return int(self.locations.size)

    def affine(self, shift: float, scale: float, cap: int = SUPPORT_CAP) -> GeneralDiscrete:
        """Law of shift + scale * X."""
        return GeneralDiscrete.from_atoms(shift + scale * self.locations, self.mass, cap=cap)

    def expectation(self) -> float:
        return float(self.locations @ self.mass)

    def cdf_at(self, points: np.ndarray) -> np.ndarray:
        """Right-continuous CDF evaluated at points."""
        cumulative = np.concatenate([[0.0], np.cumsum(self.mass)])
        return cumulative[np.searchsorted(self.locations, points, side="right")]


Distribution = Union[Categorical, GeneralDiscrete]


def merge_atoms(
    locations: Sequence[float], masses: Sequence[float], tol: float = MERGE_TOL
) -> Tuple[np.ndarray, np.ndarray]:
    """Sort atoms and sum the masses of locations closer than tol."""
    locs = np.asarray(locations, dtype=float).ravel()
    mass = np.asarray(masses, dtype=float).ravel()
    if locs.shape != mass.shape:
        raise DimensionError(f"{locs.size} locations but {mass.size} masses")
    if locs.size == 0:
        return locs, mass
    order = np.argsort(locs, kind="stable")
    locs, mass = locs[order], mass[order]
    starts = np.concatenate([[True], np.diff(locs) > tol])
    group = np.cumsum(starts) - 1
    return locs[starts], np.bincount(group, weights=mass)


def expectation(d: Distribution) -> float:
    """Sum of mass times location."""
    return d.expectation()


def _require_same_support(p: Categorical, q: Categorical) -> Support:
    if p.support != q.support:
        raise SupportMismatchError(f"{p.support!r} != {q.support!r}")
    return p.support


def cramer_distance(p: Categorical, q: Categorical) -> float:
    """
    Cramér (l2) distance between two categoricals on one support.

    sqrt(sum_{i<K} (z_{i+1} - z_i) (F_p(z_i) - F_q(z_i))^2)

    Raises:
        SupportMismatchError: If the supports differ
    """
    support = _require_same_support(p, q)
    diff = (p.cdf - q.cdf)[:-1]
    return float(np.sqrt(np.sum(np.diff(support.atoms) * diff**2)))


def cramer_distance_general(p: Distribution, q: Distribution) -> float:
    """Cramér distance between any two discrete laws, over the union of their atoms."""
    grid = np.union1d(p.locations, q.locations)
    if grid.size < 2:
        return 0.0
    diff = (_cdf_on(p, grid) - _cdf_on(q, grid))[:-1]
    return float(np.sqrt(np.sum(np.diff(grid) * diff**2)))


def _cdf_on(d: Distribution, points: np.ndarray) -> np.ndarray:
    cumulative = np.concatenate([[0.0], np.cumsum(d.mass)])
    return cumulative[np.searchsorted(d.locations, points, side="right")]


def project_atoms(
    locations: Sequence[float] | np.ndarray,
    masses: Sequence[float] | np.ndarray,
    support: Support,
) -> np.ndarray:
    """
    Cramér-project weighted atoms onto support and return the PMF.

    An atom at y goes entirely to z_1 when y <= z_1, entirely to z_K when
    y >= z_K, and is otherwise split between its neighbours z_j <= y < z_{j+1}
    in proportion to proximity. Signed masses are projected linearly.
    """
    z = support.atoms
    k = z.size
    y = np.asarray(locations, dtype=float).ravel()
    m = np.asarray(masses, dtype=float).ravel()
    if y.shape != m.shape:
        raise DimensionError(f"{y.size} locations but {m.size} masses")

    out = np.zeros(k)
    below = y <= z[0]
    above = y >= z[-1]
    out[0] += m[below].sum()
    out[-1] += m[above].sum()

    inner = ~(below | above)
    if np.any(inner):
        yi, mi = y[inner], m[inner]
        upper = np.searchsorted(z, yi, side="right")
        lower = upper - 1
        w_upper = (yi - z[lower]) / (z[upper] - z[lower])
        out += np.bincount(lower, weights=mi * (1.0 - w_upper), minlength=k)
        out += np.bincount(upper, weights=mi * w_upper, minlength=k)
    return out


def project_atoms_batch(locations: np.ndarray, masses: np.ndarray, support: Support) -> np.ndarray:
    """
    Row-wise project_atoms.

    Args:
        locations: Array (B, N) of atom locations
        masses: Array (B, N) of their masses
        support: Target grid with K atoms

    Returns:
        Array (B, K) of projected PMFs
    """
    z = support.atoms
    k = z.size
    y = np.asarray(locations, dtype=float)
    m = np.asarray(masses, dtype=float)
    if y.shape != m.shape or y.ndim != 2:
        raise DimensionError(f"locations {y.shape} and masses {m.shape} must be equal 2-d shapes")
    rows = np.broadcast_to(np.arange(y.shape[0])[:, None], y.shape)

    clipped = np.clip(y, z[0], z[-1])
    upper = np.clip(np.searchsorted(z, clipped, side="right"), 1, k - 1)
    lower = upper - 1
    w_upper = np.clip((clipped - z[lower]) / (z[upper] - z[lower]), 0.0, 1.0)
    flat = np.bincount(
        (rows * k + lower).ravel(), weights=(m * (1.0 - w_upper)).ravel(), minlength=y.shape[0] * k
    )
    flat += np.bincount(
        (rows * k + upper).ravel(), weights=(m * w_upper).ravel(), minlength=y.shape[0] * k
    )
    return flat.reshape(y.shape[0], k)


def cramer_project(d: Distribution, target: Support) -> Categorical:
    """Project any discrete law onto target."""
    return Categorical(target, project_atoms(d.locations, d.mass, target), check_mass=False)


def to_cdf(pmf: np.ndarray) -> np.ndarray:
    return np.cumsum(np.asarray(pmf, dtype=float), axis=-1)


def to_pmf(cdf: np.ndarray) -> np.ndarray:
    cdf = np.asarray(cdf, dtype=float)
    return np.concatenate([cdf[..., :1], np.diff(cdf, axis=-1)], axis=-1)


def pmf_cdf_convert(
    v: Sequence[float] | np.ndarray, direction: Union[str, Conversion]
) -> np.ndarray:
    """
    Convert between PMF and CDF coordinates.

    to_cdf applies the lower-triangular all-ones matrix C (prefix sums),
    to_pmf applies its inverse (first element kept, then adjacent differences).
    """
    direction = Conversion(direction)
    if direction is Conversion.TO_CDF:
        return to_cdf(np.asarray(v))
    return to_pmf(np.asarray(v))


def cdf_direction(cdf: np.ndarray, target_cdf: np.ndarray, spacing: float) -> np.ndarray:
    """2c (F_target - F) along the last axis."""
    return 2.0 * spacing * (np.asarray(target_cdf) - np.asarray(cdf))


def pmf_direction(cdf: np.ndarray, target_cdf: np.ndarray, spacing: float) -> np.ndarray:
    """Tail sums over j in [i, K) of 2c (F_target(z_j) - F(z_j)) along the last axis."""
    diff = cdf_direction(cdf, target_cdf, spacing)[..., :-1]
    tail_sums = np.flip(np.cumsum(np.flip(diff, axis=-1), axis=-1), axis=-1)
    return np.concatenate([tail_sums, np.zeros(tail_sums.shape[:-1] + (1,))], axis=-1)


def grad_cramer_cdf(p: Categorical, target: Categorical) -> np.ndarray:
    """
    CDF update direction 2c (F_target - F_p) over all K atoms.

    Adding alpha' times this vector to F_p moves it toward the target; it is
    the negative of the calculus gradient of l2^2 with respect to F_p. With
    alpha' = alpha / 2c the step equals the mixture (1 - alpha) F_p + alpha F_target.

    Raises:
        SupportMismatchError: If the supports differ
        SpacingError: If the support is not c-spaced
    """
    c = _require_same_support(p, target).require_spacing()
    return cdf_direction(p.cdf, target.cdf, c)


def grad_cramer_pmf(p: Categorical, target: Categorical) -> np.ndarray:
    """
    PMF update direction: component i is sum_{i <= j < K} 2c (F_target(z_j) - F_p(z_j)).

    This is the negative gradient of l2^2 with respect to the point masses
    of p. Unlike the CDF direction it does not preserve the expectation, and
    in general it does not preserve total mass either.
    """
    c = _require_same_support(p, target).require_spacing()
    return pmf_direction(p.cdf, target.cdf, c)


def mix(p: Categorical, q: Categorical, alpha: float) -> Categorical:
    """(1 - alpha) p + alpha q on the shared support."""
    support = _require_same_support(p, q)
    return Categorical(support, (1.0 - alpha) * p.mass + alpha * q.mass, check_mass=False)
