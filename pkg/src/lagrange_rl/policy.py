"""Gaussian policy network: one MLP emitting per-state mean and log-std."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import GaussianParams, log_prob, sample
from .nets import MlpSpec, Params, mlp_backward, mlp_forward, mlp_init

LOG_STD_FLOOR = -5.0


@dataclass(frozen=True)
class PolicySpec:
    obs_dim: int
    action_dim: int
    hidden: tuple[int, ...]
    activation: str = "tanh"
    init_log_std: float = 0.0

    @property
    def net(self) -> MlpSpec:
        return MlpSpec(self.obs_dim, self.hidden, 2 * self.action_dim, self.activation)


def policy_init(spec: PolicySpec, rng: np.random.Generator) -> Params:
    """Small final layer; log-std channel biased to the configured start value."""
    params = mlp_init(spec.net, rng, scale=0.01)
    last = len(spec.net.layer_dims) - 1
    params[f"b{last}"][spec.action_dim:] = spec.init_log_std
    return params


def _soft_floor(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Smooth lower bound on log-std: floor + softplus(raw - floor)."""
    x = raw - LOG_STD_FLOOR
    out = LOG_STD_FLOOR + np.where(x > 30.0, x, np.log1p(np.exp(np.minimum(x, 30.0))))
    dout = 1.0 / (1.0 + np.exp(-x))
    return out, dout


def policy_forward(spec: PolicySpec, params: Params, obs: np.ndarray):
    """Map observations to GaussianParams; returns (dist, cache)."""
    out, net_cache = mlp_forward(spec.net, params, obs)
    a = spec.action_dim
    mean = out[..., :a]
    log_std, dlog_std = _soft_floor(out[..., a:])
    return GaussianParams(mean, log_std), (net_cache, dlog_std)


def policy_backward(spec: PolicySpec, params: Params, cache, d_mean: np.ndarray,
                    d_log_std: np.ndarray) -> Params:
    """Chain gradients on (mean, log_std) back to the net parameters."""
    net_cache, dlog_std_draw = cache
    dout = np.concatenate([d_mean, d_log_std * dlog_std_draw], axis=-1)
    _, grads = mlp_backward(spec.net, params, net_cache, dout)
    return grads


def act(spec: PolicySpec, params: Params, obs: np.ndarray, rng: np.random.Generator | None,
        deterministic: bool = False) -> tuple[np.ndarray, float]:
    """Single-state action selection; returns (action, log density at it)."""
    dist, _ = policy_forward(spec, params, np.asarray(obs, dtype=float))
    if deterministic:
        action = dist.mean.copy()
    else:
        action = sample(dist, rng)
    return action, float(log_prob(dist, action))
