"""Numerical property suite: gradient checks, estimator identities, fuzz.

Each check returns (name, passed, detail). The CLI ``check`` subcommand and
the acceptance tests run the same list.
"""

from __future__ import annotations

import numpy as np

from .critic import (
    CriticSpec,
    RetraceConfig,
    critic_init,
    critic_q,
    lambda_loss,
    retrace_targets,
    value_loss,
)
from .envs import CartPoleSwingup
from .envs.cartpole import CartPoleState
from .gaussian import GaussianParams, kl_decoupled, kl_direct, log_prob, log_prob_grads, sample
from .gradcheck import grad_check
from .lagrange import ConstraintSpec, q_lambda_normalized, reward_weight
from .mdp import Transition, TrajectorySegment
from .mpo import (
    EStepConfig,
    MpoDuals,
    MStepConfig,
    dual_objective,
    e_step_weights,
    m_step_loss_and_grads,
    m_step_update,
)
from .nets import LstmSpec, MlpSpec, add_grads, lstm_backward, lstm_init, lstm_step, mlp_backward, mlp_forward, mlp_init
from .optim import adam_init
from .policy import PolicySpec, policy_forward, policy_init

GRAD_TOL = 1e-4


def check_gradients() -> list[tuple[str, bool, str]]:
    """Finite-difference verification of every analytic gradient path."""
    rng = np.random.default_rng(101)
    results = []

    for activation in ("tanh", "elu"):
        spec = MlpSpec(4, (7, 5), 3, activation)
        params = mlp_init(spec, rng)
        x = rng.standard_normal((6, 4))

        def mlp_loss(p):
            y, cache = mlp_forward(spec, p, x)
            _, grads = mlp_backward(spec, p, cache, 2.0 * y)
            return float(np.sum(y * y)), grads

        err = grad_check(mlp_loss, params)
        results.append((f"grad mlp_{activation}", err <= GRAD_TOL, f"rel err {err:.2e}"))

    lspec = LstmSpec(3, 5)
    lparams = lstm_init(lspec, rng)
    xs = rng.standard_normal((4, 2, 3))

    def lstm_loss(p):
        h = np.zeros((2, 5))
        c = np.zeros((2, 5))
        caches = []
        for t in range(xs.shape[0]):
            (h, c), cache = lstm_step(lspec, p, xs[t], (h, c))
            caches.append(cache)
        loss = float(np.sum(h * h) + np.sum(c * c))
        dh, dc = 2.0 * h, 2.0 * c
        grads: dict = {}
        for t in reversed(range(xs.shape[0])):
            _, dh, dc, g = lstm_backward(lspec, p, caches[t], dh, dc)
            add_grads(grads, g)
        return loss, grads

    err = grad_check(lstm_loss, lparams)
    results.append(("grad lstm_cell", err <= GRAD_TOL, f"rel err {err:.2e}"))

    pspec = PolicySpec(4, 2, (8,), init_log_std=-0.2)
    pparams = policy_init(pspec, rng)
    obs = rng.standard_normal((5, 4))
    acts = rng.standard_normal((5, 2))

    def logp_loss(p):
        from .policy import policy_backward

        dist, cache = policy_forward(pspec, p, obs)
        lp = log_prob(dist, acts)
        d_mean, d_log_std, _ = log_prob_grads(dist, acts)
        grads = policy_backward(pspec, p, cache, d_mean, d_log_std)
        return float(np.sum(lp)), grads

    err = grad_check(logp_loss, pparams)
    results.append(("grad policy_log_prob", err <= GRAD_TOL, f"rel err {err:.2e}"))

    cspec = CriticSpec(4, 2, 1, torso_width=6, head_hidden=(6,), scalar_multiplier=False,
                       logit_init=1.0)
    cparams = critic_init(cspec, rng)
    cacts = rng.standard_normal((5, 2))
    targets = rng.standard_normal(5)
    err = grad_check(lambda p: value_loss(cspec, p, obs, cacts, targets, 0), cparams)
    results.append(("grad value_loss", err <= GRAD_TOL, f"rel err {err:.2e}"))

    constraint = ConstraintSpec("pointwise", 0.9, 0.99)
    q_hat = rng.standard_normal(5) * 5
    err = grad_check(lambda p: lambda_loss(cspec, p, obs, q_hat, constraint), cparams)
    results.append(("grad lambda_loss", err <= GRAD_TOL, f"rel err {err:.2e}"))

    dist, _ = policy_forward(pspec, pparams, obs)
    sampled = np.moveaxis(sample(dist, rng, n=6), 0, 1)
    weights = rng.dirichlet(np.ones(6), size=5)
    old = GaussianParams(dist.mean + 0.1, dist.log_std - 0.05)

    def mstep_loss(p):
        loss, grads, _, _ = m_step_loss_and_grads(pspec, p, obs, sampled, weights, old, 0.7, 1.3)
        return loss, grads

    err = grad_check(mstep_loss, pparams)
    results.append(("grad m_step_loss", err <= GRAD_TOL, f"rel err {err:.2e}"))
    return results


def check_retrace() -> list[tuple[str, bool, str]]:
    """Brute-force identity on a 3-step chain and the Bellman fixed point."""
    rng = np.random.default_rng(11)
    cspec = CriticSpec(2, 1, 1, torso_width=6, head_hidden=(6,), scalar_multiplier=True,
                       logit_init=0.0)
    pspec = PolicySpec(2, 1, (6,), init_log_std=0.0)
    pparams = policy_init(pspec, rng)
    cfg = RetraceConfig(discount=0.99, horizon=10)

    states = [np.array([float(i), 1.0]) for i in range(4)]
    rewards = [1.0, 2.0, 3.0]
    trs = [Transition(states[i], np.zeros(1), states[i + 1], rewards[i], np.zeros(1), -50.0)
           for i in range(3)]
    seg = TrajectorySegment(trs)
    zero_params = {k: np.zeros_like(v) for k, v in critic_init(cspec, rng).items()}
    got = retrace_targets(seg, 0, zero_params, cspec, pspec, pparams, cfg, 4,
                          np.random.default_rng(0))
    expected = np.array([1 + 0.99 * 2 + 0.99**2 * 3, 2 + 0.99 * 3, 3.0])
    err = float(np.max(np.abs(got - expected)))
    results = [("retrace 3-step brute force", err <= 1e-10, f"max err {err:.2e}")]

    # Bellman fixed point: reward depends only on the state index, the chain
    # is deterministic, and a constant-output critic equal to the true value
    # must reproduce itself exactly.
    gamma = 0.9
    cfg2 = RetraceConfig(discount=gamma, horizon=10)
    reward_value = 0.7
    q_const = reward_value / (1.0 - gamma)
    cspec2 = CriticSpec(2, 1, 1, torso_width=4, head_hidden=(), scalar_multiplier=True,
                        logit_init=0.0)
    params2 = critic_init(cspec2, rng)
    for key in list(params2):
        params2[key] = np.zeros_like(params2[key])
    params2["q0/b0"] = np.array([q_const])
    params2["q1/b0"] = np.array([q_const])
    trs2 = [Transition(states[i], np.zeros(1), states[i + 1], reward_value, np.zeros(1), -50.0)
            for i in range(3)]
    got2 = retrace_targets(TrajectorySegment(trs2), 0, params2, cspec2, pspec, pparams,
                           cfg2, 3, np.random.default_rng(0))
    err2 = float(np.max(np.abs(got2 - q_const)))
    results.append(("retrace bellman fixed point", err2 <= 1e-10, f"max err {err2:.2e}"))
    return results


def check_q_lambda(n: int = 100_000) -> list[tuple[str, bool, str]]:
    """Fuzz the convex-combination bounds and the monotonicity identity."""
    rng = np.random.default_rng(17)
    constraint = ConstraintSpec("pointwise", 0.5, 0.99, epsilon=1e-3)
    q_r = rng.uniform(-50, 50, size=n)
    q_c = rng.uniform(-50, 50, size=n)
    logit = rng.uniform(-12, 12, size=n)
    val = q_lambda_normalized(q_r, q_c, logit, constraint)
    lo = np.minimum(q_r - constraint.value_bound, -q_c)
    hi = np.maximum(q_r - constraint.value_bound, -q_c)
    inside = np.all((val >= lo - 1e-9) & (val <= hi + 1e-9))
    results = [("q_lambda convex bounds", bool(inside), f"{n} fuzzed inputs")]

    h = 1e-6
    clamped = np.clip(logit, constraint.logit_min + 10 * h, constraint.logit_max - 10 * h)
    up = q_lambda_normalized(q_r, q_c, clamped + h, constraint)
    dn = q_lambda_normalized(q_r, q_c, clamped - h, constraint)
    fd = (up - dn) / (2 * h)
    w = reward_weight(clamped, constraint)
    analytic = w * (1 - w) * (q_r - constraint.value_bound + q_c)
    scale = np.maximum(np.abs(analytic), 1.0)
    mono_ok = bool(np.all(np.abs(fd - analytic) / scale < 1e-3))
    sign_ok = bool(np.all(np.sign(np.round(fd, 12)) ==
                          np.sign(np.round(analytic, 12)) ))
    results.append(("q_lambda monotonicity", mono_ok and sign_ok,
                    "d/dlogit matches w(1-w)(q_r - V* + q_c)"))
    return results


def check_e_step() -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(23)
    q = rng.standard_normal((16, 12)) * 4.0
    cfg = EStepConfig(kl_bound=0.1)
    weights, eta = e_step_weights(q, cfg)
    etas = np.exp(np.linspace(np.log(cfg.bracket_lo), np.log(cfg.bracket_hi), 400_001))
    values = [dual_objective(q, float(e), cfg.kl_bound) for e in etas[:: 4000]]
    coarse = etas[::4000][int(np.argmin(values))]
    fine = etas[np.abs(np.log(etas) - np.log(coarse)) < 0.2]
    eta_grid = fine[int(np.argmin([dual_objective(q, float(e), cfg.kl_bound) for e in fine]))]
    rel = abs(eta - eta_grid) / eta_grid
    return [("e-step dual vs grid search", rel <= 1e-3, f"rel err {rel:.2e}")]


def check_kl_identity() -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(29)
    old = GaussianParams(rng.standard_normal((64, 4)), 0.4 * rng.standard_normal((64, 4)))
    new = GaussianParams(rng.standard_normal((64, 4)), 0.4 * rng.standard_normal((64, 4)))
    c_mean, c_cov = kl_decoupled(old, new)
    err = float(np.max(np.abs(c_mean + c_cov - kl_direct(old, new))))
    nonneg = bool(np.all(c_mean >= 0) and np.all(c_cov >= 0))
    return [("decoupled KL sum identity", err <= 1e-10 and nonneg, f"max err {err:.2e}")]


def check_cartpole_energy() -> list[tuple[str, bool, str]]:
    env = CartPoleSwingup()
    env.state = CartPoleState(0.0, 0.0, 2.5, 0.0)
    e0 = env.energy()
    drift = 0.0
    for _ in range(1000):
        env.step(np.zeros(1))
        drift = max(drift, abs(env.energy() - e0))
    rel = drift / abs(e0)
    return [("cartpole energy drift", rel <= 0.01, f"{rel:.4%} over 1000 zero-force steps")]


def check_m_step_kl(steps: int = 40) -> list[tuple[str, bool, str]]:
    """Short-run: post-update KL parts within bounds + slack on every batch."""
    rng = np.random.default_rng(31)
    pspec = PolicySpec(3, 1, (16,), init_log_std=0.0)
    params = policy_init(pspec, rng)
    cfg = MStepConfig(epsilon_mean=1e-2, epsilon_cov=1e-4, gradient_steps=5)
    duals = MpoDuals()
    adam = adam_init(params, 5e-3)
    worst_mean = worst_cov = 0.0
    for _ in range(steps):
        obs = rng.standard_normal((32, 3))
        dist, _ = policy_forward(pspec, params, obs)
        acts = np.moveaxis(sample(dist, rng, n=8), 0, 1)
        q = rng.standard_normal((32, 8))
        weights, _ = e_step_weights(q, EStepConfig(kl_bound=0.1))
        params, diag = m_step_update(pspec, params, obs, acts, weights, cfg, duals, adam)
        worst_mean = max(worst_mean, diag["mstep_c_mean"])
        worst_cov = max(worst_cov, diag["mstep_c_cov"])
    ok = worst_mean <= cfg.epsilon_mean * 1.1 + 1e-12 and worst_cov <= cfg.epsilon_cov * 1.1 + 1e-12
    return [("m-step KL within bounds", ok,
             f"worst c_mean {worst_mean:.2e} (eps 1e-2), worst c_cov {worst_cov:.2e} (eps 1e-4)")]


def run_all_checks() -> list[tuple[str, bool, str]]:
    results = []
    results += check_gradients()
    results += check_retrace()
    results += check_q_lambda()
    results += check_e_step()
    results += check_kl_identity()
    results += check_cartpole_energy()
    results += check_m_step_kl()
    return results
