"""Multi-head critic: shared state torso, per-signal Q heads, multiplier head.

One model predicts the reward value, one value per cost channel, and the
multiplier logit. Targets come from truncated-importance multi-step returns
computed entirely from a delayed copy of the parameters, so they are
constants with respect to the online network.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import log_prob, sample
from .lagrange import ConstraintSpec, clamp_logit, clamp_logit_grad, reward_weight
from .mdp import SegmentBatch, TrajectorySegment, stack_segments
from .nets import (
    MlpSpec,
    Params,
    add_grads,
    mlp_backward,
    mlp_forward,
    mlp_init,
    prefix_params,
    select_params,
)
from .policy import PolicySpec, policy_forward

SCALAR_KEY = "lam_scalar"


@dataclass(frozen=True)
class CriticSpec:
    """Shared torso on observations; Q heads consume [features, action]."""

    obs_dim: int
    action_dim: int
    n_costs: int
    torso_width: int
    head_hidden: tuple[int, ...]
    activation: str = "tanh"
    scalar_multiplier: bool = False
    logit_init: float = 0.0

    @property
    def n_signals(self) -> int:
        return 1 + self.n_costs

    @property
    def torso(self) -> MlpSpec:
        return MlpSpec(self.obs_dim, (), self.torso_width, self.activation, activate_output=True)

    @property
    def q_head(self) -> MlpSpec:
        return MlpSpec(self.torso_width + self.action_dim, self.head_hidden, 1, self.activation)

    @property
    def lambda_head(self) -> MlpSpec:
        return MlpSpec(self.torso_width, (), 1, self.activation)


def critic_init(spec: CriticSpec, rng: np.random.Generator) -> Params:
    params = prefix_params("torso", mlp_init(spec.torso, rng))
    for i in range(spec.n_signals):
        head = mlp_init(spec.q_head, rng, scale=0.1)
        params.update(prefix_params(f"q{i}", head))
    if spec.scalar_multiplier:
        params[SCALAR_KEY] = np.array([spec.logit_init])
    else:
        head = mlp_init(spec.lambda_head, rng)
        head["w0"][:] = 0.0
        head["b0"][:] = spec.logit_init
        params.update(prefix_params("lam", head))
    return params


def critic_features(spec: CriticSpec, params: Params, obs: np.ndarray, with_cache: bool = False):
    feats, cache = mlp_forward(spec.torso, select_params("torso", params), obs)
    return (feats, cache) if with_cache else feats


def critic_q_from_features(spec: CriticSpec, params: Params, feats: np.ndarray,
                           actions: np.ndarray) -> np.ndarray:
    """Q values (rows, n_signals) from precomputed torso features."""
    x = np.concatenate([feats, actions], axis=-1)
    cols = []
    for i in range(spec.n_signals):
        q, _ = mlp_forward(spec.q_head, select_params(f"q{i}", params), x)
        cols.append(q[..., 0])
    return np.stack(cols, axis=-1)


def critic_q(spec: CriticSpec, params: Params, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
    return critic_q_from_features(spec, params, critic_features(spec, params, obs), actions)


def critic_lambda_logit(spec: CriticSpec, params: Params, obs: np.ndarray) -> np.ndarray:
    """Raw multiplier logit per observation row (pre-clamp)."""
    if spec.scalar_multiplier:
        n = 1 if np.asarray(obs).ndim == 1 else len(obs)
        return np.full(n, float(params[SCALAR_KEY][0]))
    feats = critic_features(spec, params, obs)
    logit, _ = mlp_forward(spec.lambda_head, select_params("lam", params), feats)
    return logit[..., 0]


def sync_targets(params: Params) -> Params:
    """Hard copy of the online parameters for target-network use."""
    return {k: v.copy() for k, v in params.items()}


# ---------------------------------------------------------------------------
# Retrace targets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RetraceConfig:
    discount: float
    horizon: int = 10
    target_sync_period: int = 100

    def __post_init__(self):
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        if self.horizon <= 0 or self.target_sync_period <= 0:
            raise ValueError("horizon and target_sync_period must be positive")


def _augment(obs: np.ndarray, goals: np.ndarray | None) -> np.ndarray:
    """Append the observed bound to the observation for goal-conditioned nets."""
    if goals is None:
        return obs
    return np.concatenate([obs, goals[..., None]], axis=-1)


def retrace_targets_batch(batch: SegmentBatch, target_params: Params, spec: CriticSpec,
                          policy_spec: PolicySpec, policy_params: Params, cfg: RetraceConfig,
                          action_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Multi-step corrected targets for every signal: (B, L, n_signals).

    Uses only the target parameters; the expectation over the current policy
    at each successor state is a Monte-Carlo average over ``action_samples``
    draws. Truncated-importance weights c_k = min(1, pi/b) use the recorded
    behavior log densities. Terminal successors bootstrap zero.
    """
    if batch.max_len > cfg.horizon:
        raise ValueError(f"segment length {batch.max_len} exceeds horizon {cfg.horizon}")
    if action_samples <= 0:
        raise ValueError("action_samples must be positive")
    bsz, length = batch.mask.shape
    obs = _augment(batch.states, batch.goals).reshape(bsz * length, -1)
    next_obs = _augment(batch.next_states, batch.goals).reshape(bsz * length, -1)
    actions = batch.actions.reshape(bsz * length, -1)

    q_taken = critic_q(spec, target_params, obs, actions).reshape(bsz, length, spec.n_signals)

    next_dist, _ = policy_forward(policy_spec, policy_params, next_obs)
    sampled = sample(next_dist, rng, n=action_samples)  # (M, B*L, A)
    next_feats = critic_features(spec, target_params, next_obs)
    tiled_feats = np.broadcast_to(next_feats, (action_samples, *next_feats.shape))
    flat_feats = tiled_feats.reshape(action_samples * bsz * length, -1)
    flat_actions = sampled.reshape(action_samples * bsz * length, -1)
    q_next = critic_q_from_features(spec, target_params, flat_feats, flat_actions)
    v_next = q_next.reshape(action_samples, bsz, length, spec.n_signals).mean(axis=0)
    v_next = v_next * ~batch.terminals[..., None]

    cur_dist, _ = policy_forward(policy_spec, policy_params, obs)
    pi_logp = log_prob(cur_dist, actions).reshape(bsz, length)
    trunc = np.exp(np.minimum(0.0, pi_logp - batch.behavior_log_probs))

    signals = np.concatenate([batch.rewards[..., None], batch.costs], axis=-1)
    delta = signals + cfg.discount * v_next - q_taken
    delta = delta * batch.mask[..., None]

    correction = np.zeros((bsz, length, spec.n_signals))
    correction[:, length - 1] = delta[:, length - 1]
    for j in range(length - 2, -1, -1):
        carry = cfg.discount * trunc[:, j + 1, None] * correction[:, j + 1]
        correction[:, j] = delta[:, j] + carry * batch.mask[:, j + 1, None]
    targets = q_taken + correction
    if not np.all(np.isfinite(targets[batch.mask])):
        raise FloatingPointError("non-finite retrace target")
    return targets


def retrace_targets(segment: TrajectorySegment, signal_index: int, target_params: Params,
                    spec: CriticSpec, policy_spec: PolicySpec, policy_params: Params,
                    cfg: RetraceConfig, action_samples: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Per-segment targets for one signal (0 = reward, 1 + i = cost channel i)."""
    batch = stack_segments([segment])
    out = retrace_targets_batch(batch, target_params, spec, policy_spec, policy_params,
                                cfg, action_samples, rng)
    return out[0, : len(segment), signal_index]


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def value_loss(spec: CriticSpec, params: Params, obs: np.ndarray, actions: np.ndarray,
               targets: np.ndarray, signal_index: int):
    """Mean squared error of one Q head against fixed targets; returns (loss, grads)."""
    targets = np.asarray(targets, dtype=float)
    if targets.shape[0] != obs.shape[0]:
        raise ValueError("targets/batch shape mismatch")
    feats, torso_cache = critic_features(spec, params, obs, with_cache=True)
    x = np.concatenate([feats, actions], axis=-1)
    head_params = select_params(f"q{signal_index}", params)
    q, head_cache = mlp_forward(spec.q_head, head_params, x)
    err = q[:, 0] - targets
    loss = float(np.mean(err * err))
    dq = (2.0 * err / err.size)[:, None]
    dx, head_grads = mlp_backward(spec.q_head, head_params, head_cache, dq)
    dfeats = dx[:, : spec.torso_width]
    _, torso_grads = mlp_backward(spec.torso, select_params("torso", params), torso_cache, dfeats)
    grads: Params = {}
    add_grads(grads, prefix_params(f"q{signal_index}", head_grads))
    add_grads(grads, prefix_params("torso", torso_grads))
    return loss, grads


def lambda_loss(spec: CriticSpec, params: Params, obs: np.ndarray, q_reward_detached: np.ndarray,
                constraint: ConstraintSpec, goals: np.ndarray | None = None):
    """Constraint loss sigma(lambda') * (Q_hat_r - V*), no gradient into Q_hat_r.

    Descending this loss raises the multiplier while the reward value sits
    below the bound and lowers it once the bound is met.
    """
    q_hat = np.asarray(q_reward_detached, dtype=float)
    if constraint.regime == "conditional":
        if goals is None:
            raise ValueError("conditional regime requires per-sample goals")
        bound = constraint.value_bound_for(goals)
    else:
        bound = constraint.value_bound
    gap = q_hat - bound

    grads: Params = {}
    if spec.scalar_multiplier:
        raw = np.full_like(gap, float(params[SCALAR_KEY][0]))
    else:
        feats, torso_cache = critic_features(spec, params, obs, with_cache=True)
        head_params = select_params("lam", params)
        raw_out, head_cache = mlp_forward(spec.lambda_head, head_params, feats)
        raw = raw_out[:, 0]
    w = reward_weight(raw, constraint)
    loss = float(np.mean(w * gap))
    dloss_draw = clamp_logit_grad(raw, w * (1.0 - w) * gap / gap.size, constraint)
    if spec.scalar_multiplier:
        grads[SCALAR_KEY] = np.array([float(np.sum(dloss_draw))])
    else:
        dfeats, head_grads = mlp_backward(spec.lambda_head, head_params, head_cache,
                                          dloss_draw[:, None])
        _, torso_grads = mlp_backward(spec.torso, select_params("torso", params),
                                      torso_cache, dfeats)
        add_grads(grads, prefix_params("lam", head_grads))
        add_grads(grads, prefix_params("torso", torso_grads))
    return loss, grads


def combined_critic_loss(spec: CriticSpec, params: Params, batch: SegmentBatch,
                         targets: np.ndarray, constraint: ConstraintSpec, beta: float):
    """Sum of per-signal value losses plus beta times the constraint loss.

    ``targets`` is the (B, L, n_signals) array from retrace_targets_batch.
    Returns (total_loss, grads, diagnostics). A single torso backward pass
    serves every head.
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    obs = _augment(batch.flat(batch.states), None if batch.goals is None else batch.flat(batch.goals))
    actions = batch.flat(batch.actions)
    tgt = targets[batch.mask]
    n = obs.shape[0]

    feats, torso_cache = critic_features(spec, params, obs, with_cache=True)
    x = np.concatenate([feats, actions], axis=-1)
    grads: Params = {}
    dfeats_total = np.zeros_like(feats)
    value_losses = []
    q_hat_reward = None
    for i in range(spec.n_signals):
        head_params = select_params(f"q{i}", params)
        q, head_cache = mlp_forward(spec.q_head, head_params, x)
        if i == 0:
            q_hat_reward = q[:, 0].copy()
        err = q[:, 0] - tgt[:, i]
        value_losses.append(float(np.mean(err * err)))
        dq = (2.0 * err / n)[:, None]
        dx, head_grads = mlp_backward(spec.q_head, head_params, head_cache, dq)
        dfeats_total += dx[:, : spec.torso_width]
        add_grads(grads, prefix_params(f"q{i}", head_grads))

    goals_flat = None if batch.goals is None else batch.flat(batch.goals)
    if constraint.regime == "conditional":
        bound = constraint.value_bound_for(goals_flat)
    else:
        bound = constraint.value_bound
    gap = q_hat_reward - bound
    if spec.scalar_multiplier:
        raw = np.full(n, float(params[SCALAR_KEY][0]))
    else:
        head_params = select_params("lam", params)
        raw_out, lam_cache = mlp_forward(spec.lambda_head, head_params, feats)
        raw = raw_out[:, 0]
    w = reward_weight(raw, constraint)
    lam_loss = float(np.mean(w * gap))
    dloss_draw = clamp_logit_grad(raw, w * (1.0 - w) * gap / n, constraint)
    if spec.scalar_multiplier:
        add_grads(grads, {SCALAR_KEY: np.array([float(np.sum(dloss_draw))])}, scale=beta)
    else:
        dfeats_lam, lam_grads = mlp_backward(spec.lambda_head, head_params, lam_cache,
                                             dloss_draw[:, None])
        dfeats_total += beta * dfeats_lam
        add_grads(grads, prefix_params("lam", lam_grads), scale=beta)

    _, torso_grads = mlp_backward(spec.torso, select_params("torso", params),
                                  torso_cache, dfeats_total)
    add_grads(grads, prefix_params("torso", torso_grads))

    total = float(sum(value_losses) + beta * lam_loss)
    diag = {
        "value_losses": value_losses,
        "lambda_loss": lam_loss,
        "mean_lambda_weight": float(np.mean(w)),
        "mean_q_reward": float(np.mean(q_hat_reward)),
        "mean_gap": float(np.mean(gap)),
    }
    return total, grads, diag
