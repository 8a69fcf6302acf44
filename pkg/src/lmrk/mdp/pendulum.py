"""Single-agent inverted pendulum with classic-control constants."""
from __future__ import annotations

import math

import numpy as np

from .base import AsyncEnv, Continuous, MdpSpec, RoleSpec

G = 10.0
MASS = 1.0
LENGTH = 1.0
DT = 0.05
MAX_SPEED = 8.0
MAX_TORQUE = 2.0
HORIZON = 200


def wrap_angle(theta: float) -> float:
    """Map an angle into (-pi, pi]."""
    return math.pi - (math.pi - theta) % (2 * math.pi)


def pendulum_step(theta: float, theta_dot: float, u: float) -> tuple[tuple[float, float], float]:
    """One semi-implicit Euler step; the reward is charged on the pre-step state."""
    u = min(max(u, -MAX_TORQUE), MAX_TORQUE)
    th = wrap_angle(theta)
    reward = -(th * th + 0.1 * theta_dot * theta_dot + 0.001 * u * u)
    acc = 3 * G / (2 * LENGTH) * math.sin(theta) + 3.0 / (MASS * LENGTH ** 2) * u
    new_dot = min(max(theta_dot + acc * DT, -MAX_SPEED), MAX_SPEED)
    new_theta = wrap_angle(theta + new_dot * DT)
    return (new_theta, new_dot), reward


class Pendulum(AsyncEnv):
    spec = MdpSpec((RoleSpec("pendulum", 3, Continuous(1, -MAX_TORQUE, MAX_TORQUE), 1),))

    def __init__(self, seed: int = 0, horizon: int = HORIZON):
        self.horizon = horizon
        self._rng = np.random.default_rng(seed)
        super().__init__(seed)
        self.theta = 0.0
        self.theta_dot = 0.0
        self.reset()

    def _reset(self):
        self.theta = float(self._rng.uniform(-math.pi, math.pi))
        self.theta_dot = float(self._rng.uniform(-1.0, 1.0))

    def _observe(self, index):
        return np.array([math.cos(self.theta), math.sin(self.theta), self.theta_dot])

    def _advance(self, actions):
        (self.theta, self.theta_dot), r = pendulum_step(
            self.theta, self.theta_dot, float(np.asarray(actions[0]).reshape(-1)[0]))
        return [np.array([r])], False
