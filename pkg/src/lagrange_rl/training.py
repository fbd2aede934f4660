"""End-to-end training runs: seeding, scheduling, metrics and checkpoints.

A run is bit-reproducible given (config, master seed): every RNG stream is
spawned from one seed sequence, actors are scheduled round-robin and the
learner consumes its own stream.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agent import LearnerConfig, TrainState, act_episode, evaluate, learner_step
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, config_hash, save_config
from .critic import critic_init, sync_targets
from .mdp import ReplayBuffer
from .metrics import MetricsWriter
from .mpo import MpoDuals
from .optim import adam_init
from .policy import policy_init

log = logging.getLogger("lagrange_rl")


def eval_column_names(cfg: ExperimentConfig, n_costs: int) -> list[str]:
    tags = [f"z{z:g}_" for z in cfg.eval_z_values()] or [""]
    cols = []
    for tag in tags:
        for window in ("full", "last"):
            cols.append(f"eval_{tag}reward_{window}")
            cols.append(f"eval_{tag}overshoot_{window}")
            for i in range(n_costs):
                cols.append(f"eval_{tag}penalty{i}_{window}")
    return cols


def metric_columns(cfg: ExperimentConfig, n_costs: int) -> list[str]:
    cols = [
        "learner_step", "critic_loss_total", "value_loss_reward",
    ]
    cols += [f"value_loss_cost{i}" for i in range(n_costs)]
    cols += [
        "lambda_loss", "mean_lambda_weight", "mean_q_reward",
        "estep_eta", "estep_kl", "mstep_c_mean", "mstep_c_cov",
    ]
    return cols + eval_column_names(cfg, n_costs)


@dataclass
class RunHandles:
    """Everything a run needs, prepared once from (config, seed)."""

    cfg: ExperimentConfig
    state: TrainState
    learner_cfg: LearnerConfig
    buffer: ReplayBuffer
    actor_envs: list
    actor_rngs: list
    eval_env: object
    eval_rng_seed: np.random.SeedSequence
    constraint: object


def prepare_run(cfg: ExperimentConfig, seed: int) -> RunHandles:
    root = np.random.SeedSequence(seed)
    init_ss, learner_ss, eval_ss, *actor_ss = root.spawn(3 + cfg.run.number_of_actors)

    env = cfg.make_env()
    constraint = cfg.constraint_spec()
    policy_spec = cfg.policy_spec(env)
    critic_spec = cfg.critic_spec(env)
    init_rng = np.random.default_rng(init_ss)
    critic_params = critic_init(critic_spec, init_rng)
    policy_params = policy_init(policy_spec, init_rng)

    state = TrainState(
        learner_step=0,
        critic_spec=critic_spec,
        critic_params=critic_params,
        target_params=sync_targets(critic_params),
        policy_spec=policy_spec,
        policy_params=policy_params,
        critic_adam=adam_init(critic_params, cfg.optim.critic_learning_rate),
        policy_adam=adam_init(policy_params, cfg.optim.policy_learning_rate),
        duals=MpoDuals(),
        rng=np.random.default_rng(learner_ss),
    )
    learner_cfg = LearnerConfig(
        constraint=constraint,
        retrace=cfg.retrace_config(),
        e_step=cfg.e_step_config(),
        m_step=cfg.m_step_config(),
        beta=cfg.optim.constraint_loss_scale,
        batch_size=cfg.run.batch_size,
        retrace_action_samples=cfg.retrace.action_samples,
        mode=cfg.mode,
        alpha=cfg.alpha,
    )
    buffer = ReplayBuffer(max(1, cfg.run.replay_capacity // cfg.run.segment_length))
    actor_envs = [cfg.make_env() for _ in range(cfg.run.number_of_actors)]
    actor_rngs = [np.random.default_rng(ss) for ss in actor_ss]
    return RunHandles(
        cfg=cfg, state=state, learner_cfg=learner_cfg, buffer=buffer,
        actor_envs=actor_envs, actor_rngs=actor_rngs, eval_env=cfg.make_env(),
        eval_rng_seed=eval_ss, constraint=constraint,
    )


def run_evaluation(handles: RunHandles, eval_index: int) -> dict:
    """Fixed-seed deterministic evaluation; one column group per z (if any)."""
    cfg = handles.cfg
    row = {}
    z_values = cfg.eval_z_values() or [None]
    for zi, z in enumerate(z_values):
        tag = "" if z is None else f"z{z:g}_"
        child = np.random.SeedSequence(
            entropy=handles.eval_rng_seed.entropy, spawn_key=(997, eval_index, zi))
        stats = evaluate(handles.state.policy_spec, handles.state.policy_params,
                         handles.eval_env, handles.constraint, cfg.run.eval_episodes,
                         np.random.default_rng(child), z=z)
        for key, val in stats.items():
            row[f"eval_{tag}{key}"] = val
    return row


def train(cfg: ExperimentConfig, out_dir, seed: int, budget_override: int | None = None) -> Path:
    """Execute a full run; writes metrics.csv, checkpoints/ and final_report.txt."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "checkpoints").mkdir(exist_ok=True)
    save_config(out / "config.cfg", cfg)
    (out / "seed.txt").write_text(f"{seed}\n")

    budget = cfg.run.budget if budget_override is None else budget_override
    handles = prepare_run(cfg, seed)
    state = handles.state
    cfg_hash = config_hash(cfg)
    n_costs = handles.eval_env.n_costs
    columns = metric_columns(cfg, n_costs)

    def checkpoint(tag: str) -> None:
        save_checkpoint(
            out / "checkpoints" / f"{tag}.npz",
            learner_step=state.learner_step,
            critic_params=state.critic_params, target_params=state.target_params,
            policy_params=state.policy_params, critic_adam=state.critic_adam,
            policy_adam=state.policy_adam, alpha_mean=state.duals.alpha_mean,
            alpha_cov=state.duals.alpha_cov, config_hash=cfg_hash,
        )

    episode_idx = 0
    eval_index = 0
    steps_per_episode = max(1, handles.actor_envs[0].episode_len
                            // cfg.run.env_steps_per_learner_step)
    with MetricsWriter(out / "metrics.csv", columns) as writer:
        checkpoint("initial")
        while state.learner_step < budget:
            actor = episode_idx % cfg.run.number_of_actors
            segments = act_episode(
                state.policy_spec, state.policy_params, handles.actor_envs[actor],
                handles.constraint, handles.actor_rngs[actor], cfg.run.segment_length,
                mode=cfg.mode, alpha=cfg.alpha)
            for seg in segments:
                handles.buffer.push_segment(seg)
            episode_idx += 1
            if len(handles.buffer) < cfg.run.min_replay_segments:
                continue
            for _ in range(min(steps_per_episode, budget - state.learner_step)):
                try:
                    row = learner_step(state, handles.buffer, handles.learner_cfg)
                except FloatingPointError as err:
                    checkpoint(f"diverged_step{state.learner_step}")
                    raise RuntimeError(
                        f"training halted at learner step {state.learner_step}: {err}; "
                        f"diagnostic snapshot saved") from err
                row["learner_step"] = state.learner_step
                due_eval = (state.learner_step % cfg.run.eval_period == 0
                            or state.learner_step == budget)
                if due_eval:
                    eval_index += 1
                    row.update(run_evaluation(handles, eval_index))
                writer.write_row(row)
                if state.learner_step % cfg.run.checkpoint_period == 0:
                    checkpoint(f"step{state.learner_step}")
            log.info("episode %d, learner step %d / %d", episode_idx, state.learner_step, budget)
        checkpoint("final")
        writer.flush()

    report = final_report(handles, eval_index + 1)
    (out / "final_report.txt").write_text(report)
    return out


def final_report(handles: RunHandles, eval_index: int) -> str:
    cfg = handles.cfg
    lines = [f"env={cfg.env} mode={cfg.mode} regime={cfg.constraint.regime} "
             f"bound={cfg.constraint.per_step_bound}"]
    row = run_evaluation(handles, eval_index)
    for key in sorted(row):
        lines.append(f"{key} = {row[key]:.6f}")
    return "\n".join(lines) + "\n"


def restore_policy(run_dir) -> tuple[ExperimentConfig, dict]:
    """Load (config, final checkpoint) from a finished run directory."""
    from .config import load_config

    run_dir = Path(run_dir)
    cfg = load_config(run_dir / "config.cfg")
    ckpt = load_checkpoint(run_dir / "checkpoints" / "final.npz")
    return cfg, ckpt
