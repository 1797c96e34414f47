"""
Feature maps for linear and network learners.

FourierBasis implements the Fourier cosine basis on a box-normalized state;
the remaining helpers build state-action feature tables for finite MDPs.
"""

from __future__ import annotations

import itertools
from typing import Callable

import numpy as np
from loguru import logger

from cramerlab.errors import DimensionError

PhiFn = Callable[[object, int], np.ndarray]


class FourierBasis:
    """
    Fourier cosine basis of a given order on a bounded box.

    Features are cos(pi * c . x_bar) for every integer coefficient vector
    c in {0..order}^d except the all-zero one, where x_bar is the state
    clamped to bounds and rescaled to [0, 1]^d. That gives (order+1)^d - 1
    features.

    Args:
        order: Highest coefficient per dimension (>= 1)
        bounds: Array (d, 2) of (low, high) per state dimension
    """

    def __init__(self, order: int, bounds: np.ndarray) -> None:
        if order < 1:
            raise ValueError(f"Fourier order must be >= 1, got {order}")
        bounds = np.asarray(bounds, dtype=float)
        if bounds.ndim != 2 or bounds.shape[1] != 2 or np.any(bounds[:, 1] <= bounds[:, 0]):
            raise ValueError(f"bounds must be (d, 2) with low < high, got {bounds.shape}")

        self.order = order
        self.bounds = bounds
        self.coefficients = np.array(
            list(itertools.product(range(order + 1), repeat=bounds.shape[0]))[1:], dtype=float
        )
        logger.debug(
            f"Fourier basis order {order} on {self.state_dim} dims -> {self.n_features} features"
        )

    @property
    def state_dim(self) -> int:
        return int(self.bounds.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.coefficients.shape[0])

    def normalize(self, state: np.ndarray) -> np.ndarray:
        low, high = self.bounds[:, 0], self.bounds[:, 1]
        return (np.clip(state, low, high) - low) / (high - low)

    def __call__(self, state: np.ndarray) -> np.ndarray:
        state = np.asarray(state, dtype=float)
        if state.shape[-1] != self.state_dim:
            raise DimensionError(
                f"state has {state.shape[-1]} dims, basis expects {self.state_dim}"
            )
        return np.cos(np.pi * self.normalize(state) @ self.coefficients.T)


def fourier_features(state: np.ndarray, order: int, bounds: np.ndarray) -> np.ndarray:
    """Fourier features of one state; see FourierBasis."""
    return FourierBasis(order, bounds)(state)


def fourier_feature_count(order: int, state_dim: int) -> int:
    return (order + 1) ** state_dim - 1


class TableFeatures:
    """
    Lookup phi(x, a) = table[x, a] over a finite state-action space.

    Args:
        table: Array (S, A, d)
    """

    def __init__(self, table: np.ndarray) -> None:
        self.table = np.asarray(table, dtype=float)
        if self.table.ndim != 3:
            raise DimensionError(f"feature table must be (S, A, d), got {self.table.shape}")

    @property
    def dim(self) -> int:
        return int(self.table.shape[2])

    def all_features(self) -> np.ndarray:
        """Every phi(x, a) as rows of an (S*A, d) array."""
        return self.table.reshape(-1, self.dim)

    def __call__(self, x: object, a: int) -> np.ndarray:
        return self.table[int(x), int(a)]  # type: ignore[call-overload]


def one_hot_features(n_states: int, n_actions: int) -> TableFeatures:
    """Indicator features: phi(x, a) = e_{x * A + a}."""
    return TableFeatures(np.eye(n_states * n_actions).reshape(n_states, n_actions, -1))


def random_features(
    n_states: int, n_actions: int, dim: int, rng: np.random.Generator
) -> TableFeatures:
    """
    Random features with a constant first coordinate.

    The constant coordinate lets a linear CDF head keep total mass 1 for
    every input. Remaining coordinates are uniform on [-0.5, 0.5].
    """
    table = rng.uniform(-0.5, 0.5, size=(n_states, n_actions, dim))
    table[..., 0] = 1.0
    return TableFeatures(table)


def random_probes(count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Extra probe vectors drawn like random_features rows."""
    probes = rng.uniform(-0.5, 0.5, size=(count, dim))
    probes[:, 0] = 1.0
    return probes
