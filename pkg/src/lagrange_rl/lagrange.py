"""Constrained-objective machinery: reward bounds, multiplier logits, Q_lambda.

The policy-improvement signal is a convex combination of the bound-shifted
reward value and the negated cost value, weighted by the sigmoid of a bounded
multiplier logit. Three constraint regimes share the combination rule and
differ only in where the logit comes from (one scalar, a state head, or a
state+goal head).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

REGIMES = ("expectation", "pointwise", "conditional")


def bound_to_value(per_step_bound: float, discount: float) -> float:
    """Scale a per-step reward bound by the limit of the discount sum."""
    if not 0.0 < discount < 1.0:
        raise ValueError("discount must lie in (0, 1)")
    return per_step_bound / (1.0 - discount)


def lambda_logit_max(epsilon: float) -> float:
    """Logit bound solving (exp(l) + 1)^-1 = epsilon, i.e. weight cap 1 - eps."""
    if not 0.0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 0.5)")
    return float(np.log(1.0 / epsilon - 1.0))


@dataclass
class ConstraintSpec:
    """Reward-bound specification for one experiment.

    ``per_step_bound`` is the per-step reward floor (for the conditional
    regime it is the top of the sampled goal range [0, z_max] and per-state
    bounds come from the observed goal instead).
    """

    regime: str
    per_step_bound: float
    discount: float
    epsilon: float = 1e-3

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        self.logit_max = lambda_logit_max(self.epsilon)
        self.logit_min = -self.logit_max
        self.value_bound = bound_to_value(self.per_step_bound, self.discount)

    @property
    def bound_range(self) -> tuple[float, float]:
        return (0.0, self.per_step_bound)

    def value_bound_for(self, z: np.ndarray | float) -> np.ndarray | float:
        """Per-sample value bound; conditional regime reads it off the goal."""
        return np.asarray(z) / (1.0 - self.discount)


def clamp_logit(logit: np.ndarray | float, spec: ConstraintSpec) -> np.ndarray:
    return np.clip(logit, spec.logit_min, spec.logit_max)


def clamp_logit_grad(logit: np.ndarray | float, grad: np.ndarray | float, spec: ConstraintSpec):
    """Projection-style gradient gate for the clamped logit.

    Passes the gradient inside the bounds, and outside only when the descent
    direction (-grad) points back into the feasible interval; otherwise the
    multiplier would freeze at its initialization on the upper bound.
    """
    logit = np.asarray(logit, dtype=float)
    grad = np.asarray(grad, dtype=float)
    blocked_high = (logit > spec.logit_max) & (grad <= 0)
    blocked_low = (logit < spec.logit_min) & (grad >= 0)
    return np.where(blocked_high | blocked_low, 0.0, grad)


def reward_weight(logit: np.ndarray | float, spec: ConstraintSpec) -> np.ndarray:
    """sigma(lambda') after clamping: the weight on the reward term."""
    z = clamp_logit(logit, spec)
    return 1.0 / (1.0 + np.exp(-z))


def q_lambda_relaxed(q_r, q_c, lam, value_bound):
    """Unnormalized relaxation lambda (q_r - V*) - q_c; lambda >= 0."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("multiplier must be non-negative")
    return lam * (np.asarray(q_r) - value_bound) - np.asarray(q_c)


def q_lambda_normalized(q_r, q_c, logit, spec: ConstraintSpec, value_bound=None):
    """Bounded convex combination w (q_r - V*) - (1 - w) q_c with w = sigma(logit)."""
    if value_bound is None:
        value_bound = spec.value_bound
    w = reward_weight(logit, spec)
    return w * (np.asarray(q_r) - value_bound) - (1.0 - w) * np.asarray(q_c)


def q_lambda_pointwise(q_r, q_c, state_logit, spec: ConstraintSpec):
    """Normalized combination with the critic's per-state multiplier logit."""
    return q_lambda_normalized(q_r, q_c, state_logit, spec)


def q_lambda_conditional(q_r, q_c, state_goal_logit, z, spec: ConstraintSpec):
    """Goal-conditioned combination: V* = z/(1-gamma) read from the bound observation."""
    z = np.asarray(z, dtype=float)
    lo, hi = spec.bound_range
    if np.any(z < lo - 1e-12) or np.any(z > hi + 1e-12):
        warnings.warn("goal outside the trained bound range; behavior degrades quickly",
                      RuntimeWarning, stacklevel=2)
    return q_lambda_normalized(q_r, q_c, state_goal_logit, spec,
                               value_bound=spec.value_bound_for(z))
