"""
Linear function approximation of values and categorical CDFs.

LinearQ predicts Q(x, a) = theta . phi(x, a). LinearZ predicts the CDF of
Z(x, a) at the atoms as W phi(x, a), one row per atom, and maps it to an
expectation with z^T C^-1 (first differences, then a dot product with the
atoms). Both are trained with semi-gradient TD updates; with matched
initial parameters and a shared sample stream their expectations agree
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from loguru import logger

from cramerlab.core import Support, project_atoms, to_cdf, to_pmf
from cramerlab.envs.sampling import TransitionSample
from cramerlab.errors import DimensionError, SpacingError

MASS_RESIDUAL_TOL = 1e-9

PhiFn = Callable[[object, int], np.ndarray]


def _check_dim(expected: int, phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (expected,):
        raise DimensionError(f"feature vector has shape {phi.shape}, model expects ({expected},)")
    return phi


@dataclass(frozen=True, eq=False)
class LinearQ:
    """Linear value model theta (length d)."""

    theta: np.ndarray

    def __post_init__(self) -> None:
        theta = np.array(self.theta, dtype=float, copy=True)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def dim(self) -> int:
        return int(self.theta.size)


@dataclass(frozen=True, eq=False)
class LinearZ:
    """
    Linear CDF model.

    Attributes:
        w: Array (K, d); row i predicts F(z_i)
        support: 1-spaced atom grid
    """

    w: np.ndarray
    support: Support

    def __post_init__(self) -> None:
        w = np.array(self.w, dtype=float, copy=True)
        if w.ndim != 2 or w.shape[0] != self.support.size:
            raise DimensionError(f"W must be ({self.support.size}, d), got {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def dim(self) -> int:
        return int(self.w.shape[1])

    def expectation_weights(self) -> np.ndarray:
        """The vector W^T C^-T z, so that E[Z] = this . phi."""
        return self.w.T @ (to_pmf(np.eye(self.support.size)) @ self.support.atoms)


@dataclass(frozen=True, eq=False)
class ExtendedCDF:
    """
    CDF values at the atoms, extended to the real line.

    F(z) = 0 for z < z_1 and F(z) = F(z_k) for z_k <= z < z_{k+1} (and for
    z >= z_K when k = K). Values may fall outside [0, 1].
    """

    support: Support
    values: np.ndarray

    def __call__(self, z: np.ndarray | float) -> np.ndarray:
        padded = np.concatenate([[0.0], self.values])
        return padded[np.searchsorted(self.support.atoms, z, side="right")]

    @property
    def pmf(self) -> np.ndarray:
        return to_pmf(self.values)

    @property
    def is_proper(self) -> bool:
        """Nondecreasing, within [0, 1] and ending at 1."""
        return bool(
            np.all(np.diff(self.values) >= -1e-12)
            and self.values[0] >= -1e-12
            and abs(self.values[-1] - 1.0) <= MASS_RESIDUAL_TOL
        )


def linear_q_predict(m: LinearQ, phi: np.ndarray) -> float:
    """theta . phi"""
    return float(m.theta @ _check_dim(m.dim, phi))


def linear_cdf_predict(m: LinearZ, phi: np.ndarray) -> ExtendedCDF:
    """W phi as an extended CDF; improper outputs are logged at DEBUG."""
    cdf = ExtendedCDF(m.support, m.w @ _check_dim(m.dim, phi))
    if not cdf.is_proper:
        logger.debug(f"improper predicted CDF, total mass {cdf.values[-1]:.6g}")
    return cdf


def expectation_from_linear_cdf(m: LinearZ, phi: np.ndarray) -> float:
    """z^T C^-1 W phi"""
    return float(m.support.atoms @ to_pmf(m.w @ _check_dim(m.dim, phi)))


def _require_unit_spacing(support: Support) -> None:
    if support.spacing is None or abs(support.spacing - 1.0) > 1e-12:
        raise SpacingError(f"linear CDF learning needs a 1-spaced support, got {support!r}")


def semigradient_q_update(m: LinearQ, t: TransitionSample, phi_fn: PhiFn, alpha: float) -> LinearQ:
    """
    theta <- theta + alpha (r + gamma theta.phi' - theta.phi) phi

    Terminal transitions drop the bootstrap term.
    """
    if alpha <= 0:
        raise ValueError(f"step size must be positive, got {alpha}")
    phi = _check_dim(m.dim, phi_fn(t.x, t.a))
    phi_next = _check_dim(m.dim, phi_fn(t.x_next, t.a_next))
    td_error = t.r + t.discount * (m.theta @ phi_next) - m.theta @ phi
    return LinearQ(m.theta + alpha * td_error * phi)


def projected_target_cdf(m: LinearZ, t: TransitionSample, phi_fn: PhiFn) -> np.ndarray:
    """
    CDF of Pi_C(r + gamma Z(x', a')) from the predicted next CDF.

    The predicted next PMF (differences of W phi') is moved to r + gamma z
    and projected back onto the support. Total mass is kept; expectation is
    kept whenever r + gamma z stays inside [z_1, z_K].
    """
    _require_unit_spacing(m.support)
    next_pmf = to_pmf(m.w @ _check_dim(m.dim, phi_fn(t.x_next, t.a_next)))
    locations = t.r + t.discount * m.support.atoms
    return to_cdf(project_atoms(locations, next_pmf, m.support))


def semigradient_cdf_update(
    m: LinearZ, t: TransitionSample, phi_fn: PhiFn, alpha: float
) -> LinearZ:
    """
    W <- W + alpha (F_target - W phi) phi^T

    A rank-one step toward the projected target CDF.
    """
    if alpha <= 0:
        raise ValueError(f"step size must be positive, got {alpha}")
    phi = _check_dim(m.dim, phi_fn(t.x, t.a))
    target = projected_target_cdf(m, t, phi_fn)
    return LinearZ(m.w + alpha * np.outer(target - m.w @ phi, phi), m.support)


def mass_row(features: np.ndarray) -> np.ndarray:
    """
    Least-squares w with features @ w = 1 for every row.

    Raises:
        ValueError: If no exact solution exists (residual above 1e-9)
    """
    features = np.asarray(features, dtype=float)
    w, *_ = np.linalg.lstsq(features, np.ones(features.shape[0]), rcond=None)
    residual = float(np.max(np.abs(features @ w - 1.0)))
    if residual > MASS_RESIDUAL_TOL:
        raise ValueError(
            f"features cannot represent total mass 1 (residual {residual:.3g}); "
            "add a constant feature"
        )
    return w


def matched_init(
    features: np.ndarray,
    support: Support,
    base_cdf: Optional[np.ndarray] = None,
    perturbation: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> tuple[LinearZ, LinearQ]:
    """
    Build (W0, theta0) with E[Z0(phi)] = Q0(phi) for every phi and F_K = 1 on features.

    Row K of W0 solves features @ w_K = 1, the other rows start at
    base_cdf[i] * w_K (so every input predicts base_cdf) plus an optional
    random perturbation; theta0 is the expectation map of W0.

    Args:
        features: Rows phi on which total mass must equal 1
        support: Atom grid
        base_cdf: Proper CDF every feature row maps to (uniform when omitted)
        perturbation: Scale of random noise added to rows 1..K-1
        rng: Generator for the perturbation
    """
    k = support.size
    w_mass = mass_row(features)
    base = to_cdf(np.full(k, 1.0 / k)) if base_cdf is None else np.asarray(base_cdf, dtype=float)
    w = np.outer(base, w_mass)
    w[-1] = w_mass
    if perturbation > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        w[:-1] += perturbation * rng.standard_normal((k - 1, w.shape[1]))
    z_model = LinearZ(w, support)
    return z_model, LinearQ(z_model.expectation_weights())
