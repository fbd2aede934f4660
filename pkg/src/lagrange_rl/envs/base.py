"""Common environment protocol for the built-in verifiable tasks."""

from __future__ import annotations

import numpy as np


class Env:
    """Single-threaded episodic environment with vector costs.

    Subclasses define ``obs_dim``, ``action_dim``, ``n_costs``,
    ``episode_len`` and ``action_scale`` (actuator bound used for policy
    initialization), plus ``reset(rng)`` and ``step(action)``.
    """

    obs_dim: int
    action_dim: int = 1
    n_costs: int = 1
    episode_len: int
    action_scale: float = 1.0
    eval_clip_steps: int = 0

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def step(self, action: np.ndarray) -> tuple[np.ndarray, float, np.ndarray, bool]:
        """Apply one action; returns (obs, reward, costs, terminal)."""
        raise NotImplementedError
