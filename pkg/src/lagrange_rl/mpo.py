"""Policy improvement: KL-bounded sample reweighting and weighted-MLE fitting.

The E-step turns per-state action values into softmax weights whose
temperature solves a convex dual, keeping the reweighted distribution within
a KL ball around the current policy. The M-step refits the Gaussian policy
to the weighted samples under decoupled mean/covariance KL bounds enforced
with dual variables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .critic import CriticSpec, _augment, critic_features, critic_lambda_logit, critic_q_from_features
from .gaussian import GaussianParams, kl_decoupled, kl_decoupled_grads, log_prob, log_prob_grads, sample
from .lagrange import ConstraintSpec, q_lambda_normalized
from .mdp import SegmentBatch
from .nets import Params, copy_params
from .optim import AdamState, adam_step
from .policy import PolicySpec, policy_backward, policy_forward

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class DualBracketError(RuntimeError):
    """The temperature search bracket cannot satisfy the KL constraint."""


@dataclass(frozen=True)
class EStepConfig:
    kl_bound: float = 0.1
    action_samples: int = 20
    bracket_lo: float = 1e-4
    bracket_hi: float = 1e5
    tolerance: float = 1e-5
    max_iters: int = 200

    def __post_init__(self):
        if self.kl_bound <= 0 or self.bracket_lo <= 0 or self.tolerance <= 0:
            raise ValueError("kl_bound, bracket_lo and tolerance must be positive")
        if self.bracket_hi <= self.bracket_lo:
            raise ValueError("bracket must be increasing")


@dataclass
class MStepConfig:
    epsilon_mean: float = 1e-2
    epsilon_cov: float = 1e-5
    dual_step_size: float = 1e-2
    gradient_steps: int = 5
    kl_slack: float = 0.1


@dataclass
class MpoDuals:
    """Warm-started M-step dual variables."""

    alpha_mean: float = 0.0
    alpha_cov: float = 0.0


def _log_mean_exp(x: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(x, axis=axis, keepdims=True)
    return (m + np.log(np.mean(np.exp(x - m), axis=axis, keepdims=True))).squeeze(axis)


def dual_objective(q_values: np.ndarray, eta: float, kl_bound: float) -> float:
    """g(eta) = eta*eps + eta * mean_s log mean_m exp(q/eta); convex in eta."""
    return float(eta * kl_bound + eta * np.mean(_log_mean_exp(q_values / eta, axis=1)))


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def empirical_kl(weights: np.ndarray) -> float:
    """Mean over states of KL(weights || uniform over the sample set)."""
    m = weights.shape[1]
    w = np.clip(weights, 1e-300, None)
    return float(np.mean(np.sum(weights * np.log(m * w), axis=1)))


def e_step_weights(q_values: np.ndarray, cfg: EStepConfig) -> tuple[np.ndarray, float]:
    """Per-state softmax weights exp(q/eta) with the dual-optimal temperature.

    ``q_values`` has shape (states, samples). Returns (weights, eta). Raises
    DualBracketError when even the largest bracketed temperature leaves the
    mean sample KL above the bound.
    """
    q_values = np.asarray(q_values, dtype=float)
    if q_values.ndim != 2 or q_values.shape[1] < 2:
        raise ValueError("q_values must be (states, samples>=2)")
    if not np.all(np.isfinite(q_values)):
        raise ValueError("non-finite action values in E-step")

    lo, hi = np.log(cfg.bracket_lo), np.log(cfg.bracket_hi)

    def g(logeta: float) -> float:
        return dual_objective(q_values, float(np.exp(logeta)), cfg.kl_bound)

    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(cfg.max_iters):
        if b - a < cfg.tolerance:
            break
        if gc < gd:
            b, d, gd = d, c, gc
            c = b - GOLDEN * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + GOLDEN * (b - a)
            gd = g(d)
    eta = float(np.exp(0.5 * (a + b)))
    weights = _softmax_rows(q_values / eta)
    kl = empirical_kl(weights)
    if kl > cfg.kl_bound * 1.5 + 1e-6:
        raise DualBracketError(
            f"temperature bracket exhausted: eta={eta:.3g}, sample KL {kl:.4f} "
            f"> bound {cfg.kl_bound}, q range {float(q_values.min()):.3g}.."
            f"{float(q_values.max()):.3g}; widen bracket_hi or rescale values"
        )
    return weights, eta


# ---------------------------------------------------------------------------
# M-step
# ---------------------------------------------------------------------------

def m_step_loss_and_grads(policy_spec: PolicySpec, params: Params, obs: np.ndarray,
                          actions: np.ndarray, weights: np.ndarray, old: GaussianParams,
                          alpha_mean: float, alpha_cov: float):
    """Penalized weighted-MLE objective and its parameter gradients.

    Returns (loss, grads, c_mean, c_cov) where the c's are batch-average
    decoupled KL(old || new) parts.
    """
    dist, cache = policy_forward(policy_spec, params, obs)
    n_states = obs.shape[0]
    wide = GaussianParams(dist.mean[:, None, :], dist.log_std[:, None, :])
    lp_mean, lp_log_std, _ = log_prob_grads(wide, actions)
    mle = -float(np.sum(weights * log_prob(wide, actions)) / n_states)

    d_mean = -(weights[..., None] * lp_mean).sum(axis=1) / n_states
    d_log_std = -(weights[..., None] * lp_log_std).sum(axis=1) / n_states

    c_mean_rows, c_cov_rows = kl_decoupled(old, dist)
    c_mean, c_cov = float(np.mean(c_mean_rows)), float(np.mean(c_cov_rows))
    dm_mean, dm_log_std, dc_log_std = kl_decoupled_grads(old, dist)
    d_mean += alpha_mean * dm_mean / n_states
    d_log_std += alpha_mean * dm_log_std / n_states + alpha_cov * dc_log_std / n_states

    grads = policy_backward(policy_spec, params, cache, d_mean, d_log_std)
    loss = mle + alpha_mean * c_mean + alpha_cov * c_cov
    return loss, grads, c_mean, c_cov


def _interpolate(old: Params, new: Params, t: float) -> Params:
    return {k: old[k] + t * (new[k] - old[k]) for k in old}


def m_step_update(policy_spec: PolicySpec, params: Params, obs: np.ndarray, actions: np.ndarray,
                  weights: np.ndarray, cfg: MStepConfig, duals: MpoDuals,
                  adam: AdamState) -> tuple[Params, dict]:
    """Fit the policy to the weighted samples under the decoupled KL bounds.

    Runs ``cfg.gradient_steps`` penalized updates with dual ascent on the
    bound violations, then backtracks the net parameter change if either KL
    part still exceeds its bound by more than the allowed slack.
    """
    old_dist, _ = policy_forward(policy_spec, params, obs)
    old = GaussianParams(old_dist.mean.copy(), old_dist.log_std.copy())
    start = copy_params(params)
    cur = params
    c_mean = c_cov = 0.0
    for _ in range(cfg.gradient_steps):
        _, grads, c_mean, c_cov = m_step_loss_and_grads(
            policy_spec, cur, obs, actions, weights, old, duals.alpha_mean, duals.alpha_cov)
        cur = adam_step(adam, cur, grads)
        if np.isfinite(cfg.epsilon_mean):
            duals.alpha_mean = max(0.0, duals.alpha_mean + cfg.dual_step_size * (c_mean - cfg.epsilon_mean))
        if np.isfinite(cfg.epsilon_cov):
            duals.alpha_cov = max(0.0, duals.alpha_cov + cfg.dual_step_size * (c_cov - cfg.epsilon_cov))

    def kl_parts(p: Params) -> tuple[float, float]:
        dist, _ = policy_forward(policy_spec, p, obs)
        cm, cc = kl_decoupled(old, dist)
        return float(np.mean(cm)), float(np.mean(cc))

    c_mean, c_cov = kl_parts(cur)
    scale = 1.0
    for _ in range(30):
        ok_mean = not np.isfinite(cfg.epsilon_mean) or c_mean <= cfg.epsilon_mean * (1.0 + cfg.kl_slack)
        ok_cov = not np.isfinite(cfg.epsilon_cov) or c_cov <= cfg.epsilon_cov * (1.0 + cfg.kl_slack)
        if ok_mean and ok_cov:
            break
        scale *= 0.5
        cur = _interpolate(start, cur, 0.5)
        c_mean, c_cov = kl_parts(cur)
    diag = {
        "mstep_c_mean": c_mean,
        "mstep_c_cov": c_cov,
        "alpha_mean": duals.alpha_mean,
        "alpha_cov": duals.alpha_cov,
        "backtrack_scale": scale,
    }
    return cur, diag


# ---------------------------------------------------------------------------
# Full improvement step
# ---------------------------------------------------------------------------

def q_lambda_for_samples(critic_spec: CriticSpec, critic_params: Params, obs: np.ndarray,
                         sampled_actions: np.ndarray, constraint: ConstraintSpec,
                         goals: np.ndarray | None) -> np.ndarray:
    """Evaluate the combined improvement signal for (state, sample) pairs.

    ``sampled_actions`` has shape (states, samples, A); returns (states, samples).
    Cost heads are summed into one cost value before the combination.
    """
    n_states, n_samples, _ = sampled_actions.shape
    feats = critic_features(critic_spec, critic_params, obs)
    tiled = np.repeat(feats, n_samples, axis=0)
    flat_actions = sampled_actions.reshape(n_states * n_samples, -1)
    q = critic_q_from_features(critic_spec, critic_params, tiled, flat_actions)
    q = q.reshape(n_states, n_samples, critic_spec.n_signals)
    q_r = q[..., 0]
    q_c = q[..., 1:].sum(axis=-1)
    logit = critic_lambda_logit(critic_spec, critic_params, obs)[:, None]
    if constraint.regime == "conditional":
        if goals is None:
            raise ValueError("conditional regime requires goals")
        return q_lambda_normalized(q_r, q_c, logit, constraint,
                                   value_bound=constraint.value_bound_for(goals)[:, None])
    return q_lambda_normalized(q_r, q_c, logit, constraint)


def policy_improvement_step(batch: SegmentBatch, critic_spec: CriticSpec, critic_params: Params,
                            constraint: ConstraintSpec, policy_spec: PolicySpec,
                            policy_params: Params, e_cfg: EStepConfig, m_cfg: MStepConfig,
                            duals: MpoDuals, adam: AdamState, rng: np.random.Generator,
                            signal: str = "q_lambda") -> tuple[Params, dict]:
    """Sample actions from the current policy, reweight by the improvement
    signal (Q_lambda, or the plain reward value for baseline modes), refit."""
    goals = None if batch.goals is None else batch.flat(batch.goals)
    obs = _augment(batch.flat(batch.states), goals)
    dist, _ = policy_forward(policy_spec, policy_params, obs)
    sampled = sample(dist, rng, n=e_cfg.action_samples)  # (M, S, A)
    sampled = np.moveaxis(sampled, 0, 1)  # (S, M, A)
    if signal == "q_lambda":
        q_vals = q_lambda_for_samples(critic_spec, critic_params, obs, sampled, constraint, goals)
    elif signal == "reward":
        n_states, n_samples, _ = sampled.shape
        feats = critic_features(critic_spec, critic_params, obs)
        tiled = np.repeat(feats, n_samples, axis=0)
        q = critic_q_from_features(critic_spec, critic_params, tiled,
                                   sampled.reshape(n_states * n_samples, -1))
        q_vals = q.reshape(n_states, n_samples, critic_spec.n_signals)[..., 0]
    else:
        raise ValueError(f"unknown improvement signal {signal!r}")
    weights, eta = e_step_weights(q_vals, e_cfg)
    new_params, diag = m_step_update(policy_spec, policy_params, obs, sampled, weights,
                                     m_cfg, duals, adam)
    diag.update({"estep_eta": eta, "estep_kl": empirical_kl(weights)})
    return new_params, diag
