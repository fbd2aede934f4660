"""Bias-corrected Adam over parameter dicts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nets import Params, zeros_like_params


@dataclass
class AdamState:
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)


def adam_init(params: Params, learning_rate: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(
        learning_rate=learning_rate, beta1=beta1, beta2=beta2, eps=eps,
        m=zeros_like_params(params), v=zeros_like_params(params),
    )


def adam_step(state: AdamState, params: Params, grads: Params) -> Params:
    """Apply one update; mutates ``state``, returns the new parameter dict.

    Missing keys in ``grads`` are treated as zero gradient. Raises on
    non-finite gradients (a diverged loss upstream).
    """
    new_params: Params = {}
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for k, p in params.items():
        g = grads.get(k)
        if g is None:
            g = np.zeros_like(p)
        elif not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {k!r}")
        m = state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        v = state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g
        new_params[k] = p - state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return new_params
