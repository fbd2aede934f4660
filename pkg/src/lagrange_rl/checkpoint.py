"""Versioned checkpoint container: named tensors, optimizer state, config hash."""

from __future__ import annotations

import numpy as np

from .nets import Params
from .optim import AdamState

CHECKPOINT_VERSION = 1


def _pack(prefix: str, params: Params, out: dict) -> None:
    for k, v in params.items():
        out[f"{prefix}::{k}"] = v


def _unpack(prefix: str, data) -> Params:
    tag = f"{prefix}::"
    return {k[len(tag):]: data[k].copy() for k in data.files if k.startswith(tag)}


def _pack_adam(prefix: str, adam: AdamState, out: dict) -> None:
    out[f"{prefix}::__meta"] = np.array(
        [adam.learning_rate, adam.beta1, adam.beta2, adam.eps, float(adam.step_count)])
    _pack(f"{prefix}::m", adam.m, out)
    _pack(f"{prefix}::v", adam.v, out)


def _unpack_adam(prefix: str, data) -> AdamState:
    meta = data[f"{prefix}::__meta"]
    return AdamState(
        learning_rate=float(meta[0]), beta1=float(meta[1]), beta2=float(meta[2]),
        eps=float(meta[3]), step_count=int(meta[4]),
        m=_unpack(f"{prefix}::m", data), v=_unpack(f"{prefix}::v", data),
    )


def save_checkpoint(path, *, learner_step: int, critic_params: Params, target_params: Params,
                    policy_params: Params, critic_adam: AdamState, policy_adam: AdamState,
                    alpha_mean: float, alpha_cov: float, config_hash: str) -> None:
    payload: dict = {
        "checkpoint_version": np.array(CHECKPOINT_VERSION),
        "learner_step": np.array(learner_step),
        "alpha_mean": np.array(alpha_mean),
        "alpha_cov": np.array(alpha_cov),
        "config_hash": np.array(config_hash),
    }
    _pack("critic", critic_params, payload)
    _pack("target", target_params, payload)
    _pack("policy", policy_params, payload)
    _pack_adam("critic_adam", critic_adam, payload)
    _pack_adam("policy_adam", policy_adam, payload)
    np.savez(path, **payload)


def load_checkpoint(path) -> dict:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["checkpoint_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        return {
            "learner_step": int(data["learner_step"]),
            "alpha_mean": float(data["alpha_mean"]),
            "alpha_cov": float(data["alpha_cov"]),
            "config_hash": str(data["config_hash"]),
            "critic_params": _unpack("critic", data),
            "target_params": _unpack("target", data),
            "policy_params": _unpack("policy", data),
            "critic_adam": _unpack_adam("critic_adam", data),
            "policy_adam": _unpack_adam("policy_adam", data),
        }
