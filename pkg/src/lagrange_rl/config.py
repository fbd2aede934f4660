"""Experiment configuration: schema, plain-text parsing, shipped presets.

The file format is one ``section.key = value`` assignment per line with
``#`` comments. Keys mirror the hyperparameter-table names where one exists
(hidden_units_policy, discount, constraint_loss_scale, ...). Unknown keys and
malformed values are rejected with the offending line number.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from importlib import resources

import numpy as np

from .critic import CriticSpec, RetraceConfig
from .envs import make_env
from .envs.base import Env
from .lagrange import ConstraintSpec
from .mpo import EStepConfig, MStepConfig
from .policy import PolicySpec


class ConfigError(ValueError):
    """Invalid experiment configuration; message carries the line number."""


@dataclass
class NetworkSection:
    hidden_units_policy: str = "100-100"
    hidden_units_critic: str = "200-200"
    lstm_cells: int = 0
    activation: str = "tanh"
    init_action_std: float = 0.5  # fraction of the actuator bound


@dataclass
class ConstraintSection:
    regime: str = "expectation"
    per_step_bound: float = 0.9
    epsilon: float = 1e-3


@dataclass
class RetraceSection:
    horizon: int = 10
    target_sync_period: int = 100
    action_samples: int = 10


@dataclass
class MpoSection:
    e_step_constraint: float = 0.1
    m_step_constraint_mean: float = 1e-2
    m_step_constraint_cov: float = 1e-5
    action_samples: int = 20
    dual_step_size: float = 1e-2
    m_step_gradient_steps: int = 5
    eta_bracket_lo: float = 1e-4
    eta_bracket_hi: float = 1e5
    eta_tolerance: float = 1e-5
    eta_max_iters: int = 200


@dataclass
class OptimSection:
    policy_learning_rate: float = 1e-5
    critic_learning_rate: float = 1e-4
    constraint_loss_scale: float = 1.0


@dataclass
class RunSection:
    number_of_actors: int = 4
    budget: int = 1000
    replay_capacity: int = 1_000_000  # transitions
    segment_length: int = 10
    batch_size: int = 16
    min_replay_segments: int = 100
    env_steps_per_learner_step: int = 10
    eval_period: int = 500
    eval_episodes: int = 2
    eval_z_grid: str = ""
    checkpoint_period: int = 5000


@dataclass
class ExperimentConfig:
    env: str = "cartpole"
    env_table_file: str = ""
    env_obs_noise_std: float = 0.0
    mode: str = "constrained"
    alpha: float = 0.0
    discount: float = 0.99
    network: NetworkSection = field(default_factory=NetworkSection)
    constraint: ConstraintSection = field(default_factory=ConstraintSection)
    retrace: RetraceSection = field(default_factory=RetraceSection)
    mpo: MpoSection = field(default_factory=MpoSection)
    optim: OptimSection = field(default_factory=OptimSection)
    run: RunSection = field(default_factory=RunSection)

    # ------------------------------------------------------------------
    # Builders for the runtime objects
    # ------------------------------------------------------------------
    def make_env(self) -> Env:
        kwargs = {}
        if self.env == "tabular":
            kwargs["table_file"] = self.env_table_file
        if self.env == "pointmass":
            kwargs["obs_noise_std"] = self.env_obs_noise_std
        return make_env(self.env, **kwargs)

    def constraint_spec(self) -> ConstraintSpec:
        return ConstraintSpec(
            regime=self.constraint.regime,
            per_step_bound=self.constraint.per_step_bound,
            discount=self.discount,
            epsilon=self.constraint.epsilon,
        )

    def policy_spec(self, env: Env) -> PolicySpec:
        obs_dim = env.obs_dim + (1 if self.constraint.regime == "conditional" else 0)
        if self.network.lstm_cells:
            raise ConfigError("recurrent trunks are not wired into training; set lstm_cells = 0")
        return PolicySpec(
            obs_dim=obs_dim,
            action_dim=env.action_dim,
            hidden=tuple(int(w) for w in self.network.hidden_units_policy.split("-")),
            activation=self.network.activation,
            init_log_std=float(np.log(self.network.init_action_std * env.action_scale)),
        )

    def critic_spec(self, env: Env) -> CriticSpec:
        widths = [int(w) for w in self.network.hidden_units_critic.split("-")]
        constraint = self.constraint_spec()
        obs_dim = env.obs_dim + (1 if constraint.regime == "conditional" else 0)
        return CriticSpec(
            obs_dim=obs_dim,
            action_dim=env.action_dim,
            n_costs=env.n_costs,
            torso_width=widths[0],
            head_hidden=tuple(widths[1:]),
            activation=self.network.activation,
            scalar_multiplier=constraint.regime == "expectation",
            logit_init=constraint.logit_max,
        )

    def retrace_config(self) -> RetraceConfig:
        return RetraceConfig(
            discount=self.discount,
            horizon=self.retrace.horizon,
            target_sync_period=self.retrace.target_sync_period,
        )

    def e_step_config(self) -> EStepConfig:
        return EStepConfig(
            kl_bound=self.mpo.e_step_constraint,
            action_samples=self.mpo.action_samples,
            bracket_lo=self.mpo.eta_bracket_lo,
            bracket_hi=self.mpo.eta_bracket_hi,
            tolerance=self.mpo.eta_tolerance,
            max_iters=self.mpo.eta_max_iters,
        )

    def m_step_config(self) -> MStepConfig:
        return MStepConfig(
            epsilon_mean=self.mpo.m_step_constraint_mean,
            epsilon_cov=self.mpo.m_step_constraint_cov,
            dual_step_size=self.mpo.dual_step_size,
            gradient_steps=self.mpo.m_step_gradient_steps,
        )

    def eval_z_values(self) -> list[float]:
        if self.constraint.regime != "conditional":
            return []
        text = self.run.eval_z_grid.strip()
        if not text:
            return [0.0, self.constraint.per_step_bound]
        return [float(t) for t in text.split(",") if t.strip()]


_SECTION_TYPES = {
    "network": NetworkSection, "constraint": ConstraintSection, "retrace": RetraceSection,
    "mpo": MpoSection, "optim": OptimSection, "run": RunSection,
}


def _coerce(raw: str, target_type: type, where: str):
    raw = raw.strip()
    try:
        if target_type is float:
            return float(raw)
        if target_type is int:
            as_float = float(raw)
            if as_float != int(as_float):
                raise ValueError(raw)
            return int(as_float)
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {target_type.__name__}") from None


def parse_config(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    top_fields = {f.name: f for f in fields(ExperimentConfig)}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#")[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.rstrip()!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        where = f"line {lineno} ({key})"
        if "." in key:
            section_name, _, attr = key.partition(".")
            section_type = _SECTION_TYPES.get(section_name)
            if section_type is None:
                raise ConfigError(f"{where}: unknown section {section_name!r}")
            section_fields = {f.name: f for f in fields(section_type)}
            if attr not in section_fields:
                raise ConfigError(f"{where}: unknown key")
            section = getattr(cfg, section_name)
            value = _coerce(raw, type(getattr(section, attr)), where)
            setattr(section, attr, value)
        else:
            if key not in top_fields or key in _SECTION_TYPES:
                raise ConfigError(f"{where}: unknown key")
            value = _coerce(raw, type(getattr(cfg, key)), where)
            setattr(cfg, key, value)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    from .agent import MODES
    from .lagrange import REGIMES

    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {cfg.mode!r}")
    if cfg.constraint.regime not in REGIMES:
        raise ConfigError(f"constraint.regime must be one of {REGIMES}")
    if not 0.0 < cfg.discount < 1.0:
        raise ConfigError("discount must lie in (0, 1)")
    if not 0.0 < cfg.constraint.epsilon < 0.5:
        raise ConfigError("constraint.epsilon must lie in (0, 0.5)")
    if cfg.env not in ("cartpole", "pointmass", "tabular"):
        raise ConfigError(f"unknown env {cfg.env!r}")
    if cfg.env == "tabular" and not cfg.env_table_file:
        raise ConfigError("tabular env requires env_table_file")
    for name, value in (("run.budget", cfg.run.budget),):
        if value < 0:
            raise ConfigError(f"{name} must be non-negative")
    for name, value in (
        ("run.number_of_actors", cfg.run.number_of_actors),
        ("run.segment_length", cfg.run.segment_length),
        ("run.batch_size", cfg.run.batch_size),
        ("run.env_steps_per_learner_step", cfg.run.env_steps_per_learner_step),
        ("run.eval_period", cfg.run.eval_period),
        ("run.eval_episodes", cfg.run.eval_episodes),
        ("retrace.horizon", cfg.retrace.horizon),
        ("retrace.target_sync_period", cfg.retrace.target_sync_period),
    ):
        if value <= 0:
            raise ConfigError(f"{name} must be positive")
    if cfg.run.segment_length > cfg.retrace.horizon:
        raise ConfigError("run.segment_length must not exceed retrace.horizon")


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(ExperimentConfig):
        value = getattr(cfg, f.name)
        if f.name in _SECTION_TYPES:
            for sub in fields(value):
                lines.append(f"{f.name}.{sub.name} = {getattr(value, sub.name)}")
        else:
            lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()[:16]


def load_config(path) -> ExperimentConfig:
    """Parse a config file; relative table paths resolve against its directory."""
    from pathlib import Path

    path = Path(path)
    cfg = parse_config(path.read_text())
    if cfg.env_table_file and not Path(cfg.env_table_file).is_absolute():
        cfg.env_table_file = str((path.parent / cfg.env_table_file).resolve())
    return cfg


def save_config(path, cfg: ExperimentConfig) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_config(cfg))


def load_preset(name: str) -> ExperimentConfig:
    """Load a shipped preset (cartpole, pointmass, tabular, *_desk).

    Relative table-file paths in presets resolve against the presets
    directory.
    """
    from pathlib import Path

    base = resources.files("lagrange_rl").joinpath("presets")
    cfg = parse_config(base.joinpath(f"{name}.cfg").read_text())
    if cfg.env_table_file and not Path(cfg.env_table_file).is_absolute():
        cfg.env_table_file = str(base.joinpath(cfg.env_table_file))
    return cfg
