"""Actor/learner orchestration: data collection, critic and policy updates.

Actors run episodes round-robin with independent RNG streams and push
fixed-length segments into the shared replay buffer; a single learner
alternates critic updates (value + constraint losses) with policy
improvement on the combined signal, syncing the target network on a fixed
period. The schedule is deterministic given the master seed and actor count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .critic import (
    CriticSpec,
    RetraceConfig,
    SCALAR_KEY,
    combined_critic_loss,
    retrace_targets_batch,
    sync_targets,
)
from .envs.base import Env
from .lagrange import ConstraintSpec
from .mdp import ReplayBuffer, Transition, TrajectorySegment, stack_segments
from .mpo import EStepConfig, MpoDuals, MStepConfig, policy_improvement_step
from .nets import Params
from .optim import AdamState, adam_init, adam_step
from .policy import PolicySpec, act

MODES = ("constrained", "fixed_alpha", "clipped_alpha", "original", "unconstrained")


def shape_reward(mode: str, reward: float, costs: np.ndarray, alpha: float,
                 per_step_bound: float) -> float:
    """Training-signal reward for the baseline modes; evaluation always uses raw."""
    total_cost = float(np.sum(costs))
    if mode in ("constrained", "unconstrained"):
        return reward
    if mode == "fixed_alpha":
        return reward - alpha * total_cost
    if mode == "clipped_alpha":
        return min(reward, per_step_bound) - alpha * total_cost
    if mode == "original":
        return reward * (4.0 + np.exp(-total_cost * total_cost)) / 5.0
    raise ValueError(f"unknown mode {mode!r}")


def act_episode(policy_spec: PolicySpec, policy_params: Params, env: Env,
                constraint: ConstraintSpec, rng: np.random.Generator, segment_length: int,
                mode: str = "constrained", alpha: float = 0.0,
                deterministic: bool = False) -> list[TrajectorySegment]:
    """Run one episode, returning it chopped into Retrace-sized segments.

    In the conditional regime a goal z ~ U[0, z_max] is sampled once per
    episode, appended to every observation the policy sees and stored on
    each transition.
    """
    obs = env.reset(rng)
    goal = None
    if constraint.regime == "conditional":
        lo, hi = constraint.bound_range
        goal = float(rng.uniform(lo, hi))

    def observed(o: np.ndarray) -> np.ndarray:
        return o if goal is None else np.concatenate([o, [goal]])

    segments: list[TrajectorySegment] = []
    pending: list[Transition] = []
    for _ in range(env.episode_len):
        action, logp = act(policy_spec, policy_params, observed(obs), rng,
                           deterministic=deterministic)
        next_obs, reward, costs, terminal = env.step(action)
        reward = shape_reward(mode, reward, costs, alpha, constraint.per_step_bound)
        pending.append(Transition(
            state=obs, action=action, next_state=next_obs, reward=reward, costs=costs,
            behavior_log_prob=logp, terminal=terminal, goal=goal,
        ))
        obs = next_obs
        if len(pending) == segment_length or terminal:
            segments.append(TrajectorySegment(pending))
            pending = []
        if terminal:
            break
    if pending:
        segments.append(TrajectorySegment(pending))
    return segments


@dataclass
class TrainState:
    """Everything the learner mutates, plus the RNG stream it consumes."""

    learner_step: int
    critic_spec: CriticSpec
    critic_params: Params
    target_params: Params
    policy_spec: PolicySpec
    policy_params: Params
    critic_adam: AdamState
    policy_adam: AdamState
    duals: MpoDuals
    rng: np.random.Generator


@dataclass
class LearnerConfig:
    constraint: ConstraintSpec
    retrace: RetraceConfig
    e_step: EStepConfig
    m_step: MStepConfig
    beta: float
    batch_size: int
    retrace_action_samples: int
    mode: str = "constrained"
    alpha: float = 0.0

    @property
    def improvement_signal(self) -> str:
        return "q_lambda" if self.mode == "constrained" else "reward"


def _project_scalar_logit(state: TrainState, constraint: ConstraintSpec) -> None:
    if SCALAR_KEY in state.critic_params:
        np.clip(state.critic_params[SCALAR_KEY], constraint.logit_min, constraint.logit_max,
                out=state.critic_params[SCALAR_KEY])


def learner_step(state: TrainState, buffer: ReplayBuffer, cfg: LearnerConfig) -> dict:
    """One critic update + one policy improvement; returns the metrics row."""
    segments = buffer.sample_batch(cfg.batch_size, state.rng)
    batch = stack_segments(segments)

    targets = retrace_targets_batch(
        batch, state.target_params, state.critic_spec, state.policy_spec,
        state.policy_params, cfg.retrace, cfg.retrace_action_samples, state.rng)
    beta = cfg.beta if cfg.mode == "constrained" else 0.0
    total, grads, diag = combined_critic_loss(
        state.critic_spec, state.critic_params, batch, targets, cfg.constraint, beta)
    state.critic_params = adam_step(state.critic_adam, state.critic_params, grads)
    _project_scalar_logit(state, cfg.constraint)

    state.policy_params, pi_diag = policy_improvement_step(
        batch, state.critic_spec, state.critic_params, cfg.constraint, state.policy_spec,
        state.policy_params, cfg.e_step, cfg.m_step, state.duals, state.policy_adam,
        state.rng, signal=cfg.improvement_signal)

    state.learner_step += 1
    if state.learner_step % cfg.retrace.target_sync_period == 0:
        state.target_params = sync_targets(state.critic_params)

    row = {
        "critic_loss_total": total,
        "value_loss_reward": diag["value_losses"][0],
        "lambda_loss": diag["lambda_loss"],
        "mean_lambda_weight": diag["mean_lambda_weight"],
        "mean_q_reward": diag["mean_q_reward"],
        "estep_eta": pi_diag["estep_eta"],
        "estep_kl": pi_diag["estep_kl"],
        "mstep_c_mean": pi_diag["mstep_c_mean"],
        "mstep_c_cov": pi_diag["mstep_c_cov"],
    }
    for i, v in enumerate(diag["value_losses"][1:]):
        row[f"value_loss_cost{i}"] = v
    return row


def evaluate(policy_spec: PolicySpec, policy_params: Params, env: Env,
             constraint: ConstraintSpec, n_episodes: int, rng: np.random.Generator,
             z: float | None = None) -> dict:
    """Deterministic-mean evaluation; per-step means over both report windows.

    ``full`` drops the env's declared transient steps; ``last`` is exactly the
    second half of each episode. Overshoot is mean reward minus the per-step
    bound (or z in the conditional regime).
    """
    if constraint.regime == "conditional" and z is None:
        raise ValueError("conditional evaluation needs an explicit z")
    rewards, costs = [], []
    for _ in range(n_episodes):
        obs = env.reset(rng)

        def observed(o: np.ndarray) -> np.ndarray:
            return o if z is None else np.concatenate([o, [z]])

        ep_r, ep_c = [], []
        for _ in range(env.episode_len):
            action, _ = act(policy_spec, policy_params, observed(obs), None, deterministic=True)
            obs, reward, cost_vec, terminal = env.step(action)
            ep_r.append(reward)
            ep_c.append(cost_vec)
            if terminal:
                break
        rewards.append(np.array(ep_r))
        costs.append(np.stack(ep_c))

    bound = constraint.per_step_bound if z is None else z
    clip = env.eval_clip_steps
    out: dict[str, float] = {}
    for window in ("full", "last"):
        r_vals, c_vals = [], []
        for ep_r, ep_c in zip(rewards, costs):
            start = clip if window == "full" else len(ep_r) // 2
            r_vals.append(ep_r[start:])
            c_vals.append(ep_c[start:])
        r_cat = np.concatenate(r_vals)
        c_cat = np.concatenate(c_vals)
        out[f"reward_{window}"] = float(r_cat.mean())
        out[f"overshoot_{window}"] = float(r_cat.mean() - bound)
        for i in range(c_cat.shape[1]):
            out[f"penalty{i}_{window}"] = float(c_cat[:, i].mean())
    return out
