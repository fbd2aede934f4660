"""Diagonal-Gaussian policy distributions: densities, sampling, decoupled KL.

All functions are vectorized: ``mean``/``log_std``/``action`` may be ``(A,)``
or ``(B, A)``; reductions happen over the last axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class GaussianParams:
    """Per-state mean and diagonal covariance (as log standard deviations)."""

    mean: np.ndarray
    log_std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.log_std = np.asarray(self.log_std, dtype=float)
        if self.mean.shape != self.log_std.shape:
            raise ValueError("mean and log_std shapes differ")
        if not np.all(np.isfinite(self.log_std)):
            raise ValueError("log_std must be finite")

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]


def log_prob(p: GaussianParams, action: np.ndarray) -> np.ndarray:
    """Log density of the diagonal Gaussian at ``action`` (sum over dims)."""
    action = np.asarray(action, dtype=float)
    z = (action - p.mean) / p.std
    return -0.5 * np.sum(z * z + 2.0 * p.log_std + LOG_2PI, axis=-1)


def log_prob_grads(p: GaussianParams, action: np.ndarray):
    """d log_prob / d(mean, log_std, action), shapes matching the inputs."""
    action = np.asarray(action, dtype=float)
    inv_var = np.exp(-2.0 * p.log_std)
    diff = action - p.mean
    d_mean = diff * inv_var
    d_log_std = diff * diff * inv_var - 1.0
    return d_mean, d_log_std, -d_mean


def sample(p: GaussianParams, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Draw actions; with ``n`` the samples get a leading axis of length n."""
    shape = p.mean.shape if n is None else (n, *p.mean.shape)
    return p.mean + p.std * rng.standard_normal(shape)


def kl_decoupled(old: GaussianParams, new: GaussianParams) -> tuple[np.ndarray, np.ndarray]:
    """Split KL(old || new) into mean and covariance parts.

    The mean part is 0.5 (mu - mu_old)^T Sigma^-1 (mu - mu_old) and the
    covariance part 0.5 (tr(Sigma^-1 Sigma_old) - n + ln det Sigma/Sigma_old),
    both with Sigma taken from ``new``. Their sum is the full Gaussian KL.
    """
    if old.dim != new.dim:
        raise ValueError("dimension mismatch")
    inv_var = np.exp(-2.0 * new.log_std)
    var_old = np.exp(2.0 * old.log_std)
    diff = new.mean - old.mean
    c_mean = 0.5 * np.sum(diff * diff * inv_var, axis=-1)
    c_cov = 0.5 * np.sum(var_old * inv_var - 1.0 + 2.0 * (new.log_std - old.log_std), axis=-1)
    return c_mean, c_cov


def kl_decoupled_grads(old: GaussianParams, new: GaussianParams):
    """Gradients of (c_mean, c_cov) w.r.t. the *new* mean and log_std.

    Returns (d_cmean_dmean, d_cmean_dlogstd, d_ccov_dlogstd); c_cov does not
    depend on the new mean.
    """
    inv_var = np.exp(-2.0 * new.log_std)
    var_old = np.exp(2.0 * old.log_std)
    diff = new.mean - old.mean
    d_cmean_dmean = diff * inv_var
    d_cmean_dlogstd = -diff * diff * inv_var
    d_ccov_dlogstd = 1.0 - var_old * inv_var
    return d_cmean_dmean, d_cmean_dlogstd, d_ccov_dlogstd


def kl_direct(old: GaussianParams, new: GaussianParams) -> np.ndarray:
    """Gaussian KL(old || new) from the textbook closed form (oracle path)."""
    var_ratio = np.exp(2.0 * (old.log_std - new.log_std))
    diff = new.mean - old.mean
    return np.sum(
        new.log_std - old.log_std + 0.5 * (var_ratio + diff * diff * np.exp(-2.0 * new.log_std)) - 0.5,
        axis=-1,
    )
