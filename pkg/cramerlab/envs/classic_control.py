"""
Classic-control physics: CartPole and Acrobot.

Both follow the widely used published formulations (constants in
docs/environments.md). Dynamics are deterministic; only reset draws from
the stream (four uniforms), so a trajectory is a pure function of the seed
and the action sequence.
"""

from __future__ import annotations

import math

import numpy as np

from cramerlab.envs.base import Environment, StepResult
from cramerlab.envs.sampling import SampleSource


class ClassicControlEnv(Environment):
    """
    Base class for continuous-state control tasks.

    Attributes:
        kind: "cartpole" or "acrobot"
        state_dim: Observation dimension
        bounds: Array (state_dim, 2) of ranges used to normalize features
    """

    DRAWS_PER_RESET = 4
    DRAWS_PER_STEP = 0

    kind: str = ""
    state_dim: int = 0
    bounds: np.ndarray = np.zeros((0, 2))

    @property
    def r_max(self) -> float:
        return 1.0


class CartPole(ClassicControlEnv):
    """
    Cart-pole balancing with Euler integration.

    Two actions push the cart left (0) or right (1) with a fixed force.
    Reward +1 per step; the episode terminates when the pole leans past
    12 degrees or the cart leaves the track, and is truncated at max_steps.
    """

    GRAVITY = 9.8
    MASS_CART = 1.0
    MASS_POLE = 0.1
    TOTAL_MASS = MASS_CART + MASS_POLE
    HALF_LENGTH = 0.5
    POLE_MASS_LENGTH = MASS_POLE * HALF_LENGTH
    FORCE_MAG = 10.0
    TAU = 0.02
    THETA_LIMIT = 12 * 2 * math.pi / 360
    X_LIMIT = 2.4
    RESET_RANGE = 0.05

    kind = "cartpole"
    state_dim = 4
    bounds = np.array([[-2.4, 2.4], [-3.0, 3.0], [-0.21, 0.21], [-3.5, 3.5]])

    def __init__(self, gamma: float = 0.99, max_steps: int = 200) -> None:
        super().__init__("cartpole", 2, gamma, max_steps)

    def _reset(self, source: SampleSource) -> np.ndarray:
        return source.uniform_range(-self.RESET_RANGE, self.RESET_RANGE, 4)

    def _step(self, action: int, source: SampleSource) -> StepResult:
        x, x_dot, theta, theta_dot = self.observation
        force = self.FORCE_MAG if action == 1 else -self.FORCE_MAG
        cos_theta = math.cos(theta)
        sin_theta = math.sin(theta)

        temp = (force + self.POLE_MASS_LENGTH * theta_dot**2 * sin_theta) / self.TOTAL_MASS
        theta_acc = (self.GRAVITY * sin_theta - cos_theta * temp) / (
            self.HALF_LENGTH * (4.0 / 3.0 - self.MASS_POLE * cos_theta**2 / self.TOTAL_MASS)
        )
        x_acc = temp - self.POLE_MASS_LENGTH * theta_acc * cos_theta / self.TOTAL_MASS

        x = x + self.TAU * x_dot
        x_dot = x_dot + self.TAU * x_acc
        theta = theta + self.TAU * theta_dot
        theta_dot = theta_dot + self.TAU * theta_acc

        state = np.array([x, x_dot, theta, theta_dot])
        terminal = bool(
            x < -self.X_LIMIT
            or x > self.X_LIMIT
            or theta < -self.THETA_LIMIT
            or theta > self.THETA_LIMIT
        )
        return StepResult(state, 1.0, terminal)


def _wrap(value: float, low: float, high: float) -> float:
    span = high - low
    while value > high:
        value -= span
    while value < low:
        value += span
    return value


class Acrobot(ClassicControlEnv):
    """
    Two-link underactuated pendulum, torque on the second joint.

    Three actions apply torque -1, 0 or +1. Reward -1 per step until the
    tip rises above the height threshold (that step pays 0 and terminates).
    Integrated with one RK4 step of length DT per action. The observation is
    (cos t1, sin t1, cos t2, sin t2, dt1, dt2).
    """

    DT = 0.2
    LINK_LENGTH_1 = 1.0
    LINK_MASS_1 = 1.0
    LINK_MASS_2 = 1.0
    LINK_COM_POS_1 = 0.5
    LINK_COM_POS_2 = 0.5
    LINK_MOI = 1.0
    GRAVITY = 9.8
    MAX_VEL_1 = 4 * math.pi
    MAX_VEL_2 = 9 * math.pi
    TORQUES = (-1.0, 0.0, 1.0)
    RESET_RANGE = 0.1

    kind = "acrobot"
    state_dim = 6
    bounds = np.array(
        [
            [-1.0, 1.0],
            [-1.0, 1.0],
            [-1.0, 1.0],
            [-1.0, 1.0],
            [-MAX_VEL_1, MAX_VEL_1],
            [-MAX_VEL_2, MAX_VEL_2],
        ]
    )

    def __init__(self, gamma: float = 0.99, max_steps: int = 500) -> None:
        super().__init__("acrobot", len(self.TORQUES), gamma, max_steps)
        self.joint_state = np.zeros(4)

    @staticmethod
    def _observe(s: np.ndarray) -> np.ndarray:
        return np.array(
            [math.cos(s[0]), math.sin(s[0]), math.cos(s[1]), math.sin(s[1]), s[2], s[3]]
        )

    def _reset(self, source: SampleSource) -> np.ndarray:
        self.joint_state = source.uniform_range(-self.RESET_RANGE, self.RESET_RANGE, 4)
        return self._observe(self.joint_state)

    def _derivatives(self, s: np.ndarray, torque: float) -> np.ndarray:
        m1, m2 = self.LINK_MASS_1, self.LINK_MASS_2
        l1 = self.LINK_LENGTH_1
        lc1, lc2 = self.LINK_COM_POS_1, self.LINK_COM_POS_2
        i1 = i2 = self.LINK_MOI
        g = self.GRAVITY
        theta1, theta2, dtheta1, dtheta2 = s

        d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * math.cos(theta2)) + i1 + i2
        d2 = m2 * (lc2**2 + l1 * lc2 * math.cos(theta2)) + i2
        phi2 = m2 * lc2 * g * math.cos(theta1 + theta2 - math.pi / 2.0)
        phi1 = (
            -m2 * l1 * lc2 * dtheta2**2 * math.sin(theta2)
            - 2 * m2 * l1 * lc2 * dtheta2 * dtheta1 * math.sin(theta2)
            + (m1 * lc1 + m2 * l1) * g * math.cos(theta1 - math.pi / 2)
            + phi2
        )
        ddtheta2 = (
            torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1**2 * math.sin(theta2) - phi2
        ) / (m2 * lc2**2 + i2 - d2**2 / d1)
        ddtheta1 = -(d2 * ddtheta2 + phi1) / d1
        return np.array([dtheta1, dtheta2, ddtheta1, ddtheta2])

    def _rk4(self, s: np.ndarray, torque: float) -> np.ndarray:
        h = self.DT
        k1 = self._derivatives(s, torque)
        k2 = self._derivatives(s + h / 2.0 * k1, torque)
        k3 = self._derivatives(s + h / 2.0 * k2, torque)
        k4 = self._derivatives(s + h * k3, torque)
        return s + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    def _step(self, action: int, source: SampleSource) -> StepResult:
        s = self._rk4(self.joint_state, self.TORQUES[action])
        s[0] = _wrap(s[0], -math.pi, math.pi)
        s[1] = _wrap(s[1], -math.pi, math.pi)
        s[2] = min(max(s[2], -self.MAX_VEL_1), self.MAX_VEL_1)
        s[3] = min(max(s[3], -self.MAX_VEL_2), self.MAX_VEL_2)
        self.joint_state = s

        terminal = bool(-math.cos(s[0]) - math.cos(s[1] + s[0]) > 1.0)
        return StepResult(self._observe(s), 0.0 if terminal else -1.0, terminal)
