"""Point-mass locomotion surrogate: velocity reward, mechanical-power cost.

A drag-limited mass driven by a bounded force. Reward is the new velocity,
the first cost channel the mechanical power |force * velocity|, and a second
channel charges a unit penalty when the commanded force exceeds 90% of the
actuator bound (the self-collision analog, exercising split cost heads).
Optional additive Gaussian noise on the velocity observation stands in for
the dropped domain-randomization fidelity items.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Env


@dataclass
class PointMassState:
    position: float
    velocity: float

    def as_array(self) -> np.ndarray:
        return np.array([self.position, self.velocity])


class PointMassVelocity(Env):
    n_costs = 2

    def __init__(self, drag: float = 1.0, f_max: float = 2.0, dt: float = 0.02,
                 v_max: float = 2.0, obs_noise_std: float = 0.0, episode_len: int = 500,
                 collision_fraction: float = 0.9):
        self.drag = drag
        self.f_max = f_max
        self.dt = dt
        self.v_max = v_max
        self.obs_noise_std = obs_noise_std
        self.episode_len = episode_len
        self.collision_fraction = collision_fraction
        self.obs_dim = 1
        self.action_scale = f_max
        # 100 ms of transient clipped before evaluation statistics
        self.eval_clip_steps = max(1, int(round(0.1 / dt)))
        self.state = PointMassState(0.0, 0.0)
        self._rng = np.random.default_rng(0)

    def observation(self) -> np.ndarray:
        noise = self._rng.normal(0.0, self.obs_noise_std) if self.obs_noise_std > 0 else 0.0
        return np.array([self.state.velocity + noise])

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self._rng = rng
        self.state = PointMassState(0.0, 0.0)
        return self.observation()

    def step(self, action: np.ndarray) -> tuple[np.ndarray, float, np.ndarray, bool]:
        force = float(np.clip(np.asarray(action).reshape(-1)[0], -self.f_max, self.f_max))
        v = self.state.velocity + (force - self.drag * self.state.velocity) * self.dt
        v = float(np.clip(v, -self.v_max, self.v_max))
        self.state = PointMassState(self.state.position + v * self.dt, v)
        reward = v
        power = abs(force * v)
        collision = 1.0 if abs(force) > self.collision_fraction * self.f_max else 0.0
        return self.observation(), reward, np.array([power, collision]), False


def min_feasible_constant_force_cost(env_factory, target_velocity: float, seed: int = 0,
                                     grid_points: int = 401) -> tuple[float, float]:
    """Grid-search oracle over constant-force policies.

    Simulates each force on the grid for one episode and returns
    (min mean total cost among forces whose mean velocity, after the
    transient clip, reaches the target; the force achieving it). Raises if no
    constant force is feasible.
    """
    best = (np.inf, np.nan)
    env = env_factory()
    for force in np.linspace(0.0, env.f_max, grid_points):
        env.reset(np.random.default_rng(seed))
        rewards, costs = [], []
        for _ in range(env.episode_len):
            _, r, c, _ = env.step(np.array([force]))
            rewards.append(r)
            costs.append(c.sum())
        clip = env.eval_clip_steps
        if np.mean(rewards[clip:]) >= target_velocity and np.mean(costs[clip:]) < best[0]:
            best = (float(np.mean(costs[clip:])), float(force))
    if not np.isfinite(best[0]):
        raise ValueError(f"no constant force reaches velocity {target_velocity}")
    return best
