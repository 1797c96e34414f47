"""
Sigmoid-CDF counterexample for nonlinear distributional TD.

A two-parameter model predicts the CDF (sigma(w1 x1), sigma(w2 x2), 1) on
the support (-1, 0, 1). Starting from a point where its expectation equals
an expected-value learner's prediction, one semi-gradient step toward a
target with the same expectation moves the distributional expectation
away from the expected learner, which does not move at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict

import numpy as np
from loguru import logger

from cramerlab.core import Support, to_pmf

COUNTEREXAMPLE_SUPPORT = Support(np.array([-1.0, 0.0, 1.0]), spacing=1.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class SigmoidCDFModel:
    """
    CDF model psi_W(x) = [sigma(w1 x1), sigma(w2 x2), 1] on z = (-1, 0, 1).

    Attributes:
        w: Parameters (w1, w2)
    """

    w: np.ndarray
    support: Support = field(default=COUNTEREXAMPLE_SUPPORT)

    def __post_init__(self) -> None:
        self.w = np.asarray(self.w, dtype=float)
        if self.w.shape != (2,):
            raise ValueError(f"sigmoid CDF model has 2 parameters, got {self.w.shape}")

    def cdf(self, phi: np.ndarray) -> np.ndarray:
        return np.append(sigmoid(self.w * phi), 1.0)

    def expectation(self, phi: np.ndarray) -> float:
        return float(self.support.atoms @ to_pmf(self.cdf(phi)))

    def direction(self, phi: np.ndarray, target_cdf: np.ndarray) -> np.ndarray:
        """
        Semi-gradient components (psi_i - F_i) * d psi_i / d w_i for i = 1, 2.

        A descent step subtracts this vector from w.
        """
        s = sigmoid(self.w * phi)
        return (s - target_cdf[:2]) * s * (1.0 - s) * phi


@dataclass
class CounterexampleReport:
    """Golden numbers of the sigmoid counterexample."""

    gradients: np.ndarray
    e_z0: float
    q0: float
    e_z1: float
    q1: float
    e_z1_alternate: float
    step_size: float

    @property
    def diverged(self) -> bool:
        return abs(self.e_z1 - self.q1) > 1e-3

    def to_dict(self) -> Dict[str, object]:
        return {
            "gradients": [float(g) for g in self.gradients],
            "e_z0": self.e_z0,
            "q0": self.q0,
            "e_z1": self.e_z1,
            "q1": self.q1,
            "e_z1_alternate": self.e_z1_alternate,
            "step_size": self.step_size,
            "diverged": self.diverged,
        }


def sigmoid_cdf_counterexample(step_size: float = 1.0) -> CounterexampleReport:
    """
    Reproduce the nonlinear counterexample.

    W0 = [-ln 2, ln 2 / 2], phi = (1, 2), target CDF [0, 1, 1] (a Dirac at 0,
    expectation 0). The expected learner starts at theta = 0, so Q0 = 0 and
    its TD error is 0: Q1 = 0. The distributional learner's expectation
    starts at 0 and ends near -0.05 after the descent step W0 - step * g.
    The opposite reading W0 + step * g is reported as e_z1_alternate.
    """
    phi = np.array([1.0, 2.0])
    target = np.array([0.0, 1.0, 1.0])
    model = SigmoidCDFModel(np.array([-math.log(2.0), -math.log(0.5) / 2.0]))

    theta = np.zeros(2)
    q0 = float(theta @ phi)
    target_value = float(model.support.atoms @ to_pmf(target))
    theta_next = theta + step_size * (target_value - q0) * phi
    q1 = float(theta_next @ phi)

    gradients = model.direction(phi, target)
    e_z0 = model.expectation(phi)
    e_z1 = SigmoidCDFModel(model.w - step_size * gradients).expectation(phi)
    e_z1_alternate = SigmoidCDFModel(model.w + step_size * gradients).expectation(phi)

    logger.info(
        f"Sigmoid counterexample: g=({gradients[0]:.6f}, {gradients[1]:.6f}), "
        f"E[Z0]={e_z0:.3g}, E[Z1]={e_z1:.4f}, Q1={q1}"
    )
    return CounterexampleReport(gradients, e_z0, q0, e_z1, q1, e_z1_alternate, step_size)
