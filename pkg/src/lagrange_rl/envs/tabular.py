"""Small tabular constrained MDPs with an exact reference solver.

The solver enumerates deterministic stationary policies (the vertices of the
discounted-occupancy polytope) and, for a single reward bound, also checks
every pairwise mix across the bound line, which is sufficient to reach the
constrained optimum. It returns the optimal expected discounted cost, the
occupancy measure and the induced stationary policy.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .base import Env

MAX_ENUMERATED_POLICIES = 2**20


@dataclass
class TabularCmdp:
    transitions: np.ndarray  # P[s, a, s'], row-stochastic
    rewards: np.ndarray      # R[s, a]
    costs: np.ndarray        # C[s, a]
    discount: float
    initial_distribution: np.ndarray

    def __post_init__(self):
        self.transitions = np.asarray(self.transitions, dtype=float)
        self.rewards = np.asarray(self.rewards, dtype=float)
        self.costs = np.asarray(self.costs, dtype=float)
        self.initial_distribution = np.asarray(self.initial_distribution, dtype=float)
        n_s, n_a, n_s2 = self.transitions.shape
        if n_s != n_s2:
            raise ValueError("transition tensor must be (S, A, S)")
        if self.rewards.shape != (n_s, n_a) or self.costs.shape != (n_s, n_a):
            raise ValueError("reward/cost tables must be (S, A)")
        if not np.allclose(self.transitions.sum(axis=2), 1.0, atol=1e-12):
            raise ValueError("transition rows must sum to 1")
        if not (np.all(np.isfinite(self.rewards)) and np.all(np.isfinite(self.costs))):
            raise ValueError("tables must be finite")
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]

    def evaluate_policy(self, policy: np.ndarray) -> tuple[float, float]:
        """Expected discounted (reward, cost) from the initial distribution.

        ``policy`` is (S, A) row-stochastic.
        """
        policy = np.asarray(policy, dtype=float)
        p_pi = np.einsum("sa,sat->st", policy, self.transitions)
        r_pi = np.sum(policy * self.rewards, axis=1)
        c_pi = np.sum(policy * self.costs, axis=1)
        inv = np.linalg.inv(np.eye(self.n_states) - self.discount * p_pi)
        return (float(self.initial_distribution @ inv @ r_pi),
                float(self.initial_distribution @ inv @ c_pi))

    def occupancy(self, policy: np.ndarray) -> np.ndarray:
        """Discounted state-action occupancy d[s, a] (sums to 1/(1-gamma))."""
        policy = np.asarray(policy, dtype=float)
        p_pi = np.einsum("sa,sat->st", policy, self.transitions)
        d_state = np.linalg.solve(
            np.eye(self.n_states) - self.discount * p_pi.T, self.initial_distribution)
        return d_state[:, None] * policy


@dataclass
class CmdpSolution:
    feasible: bool
    cost: float = np.nan
    reward: float = np.nan
    policy: np.ndarray | None = None
    occupancy: np.ndarray | None = None


def _deterministic_policies(m: TabularCmdp):
    for choice in product(range(m.n_actions), repeat=m.n_states):
        policy = np.zeros((m.n_states, m.n_actions))
        policy[np.arange(m.n_states), choice] = 1.0
        yield policy


def solve_cmdp_exact(m: TabularCmdp, per_step_bound: float) -> CmdpSolution:
    """Minimize expected discounted cost s.t. expected discounted reward >= bound.

    ``per_step_bound`` is in per-step reward units; the value-space bound is
    per_step_bound / (1 - discount). ``-inf`` disables the constraint.
    """
    if m.n_states * m.n_actions > 200:
        raise ValueError("instance too large for exact enumeration")
    if m.n_actions**m.n_states > MAX_ENUMERATED_POLICIES:
        raise ValueError("too many deterministic policies to enumerate")
    value_bound = -np.inf if np.isneginf(per_step_bound) else per_step_bound / (1.0 - m.discount)

    policies = list(_deterministic_policies(m))
    values = np.array([m.evaluate_policy(p) for p in policies])  # (n, 2): reward, cost
    rewards, costs = values[:, 0], values[:, 1]

    if np.max(rewards) < value_bound - 1e-12:
        return CmdpSolution(feasible=False)

    feasible = rewards >= value_bound - 1e-12
    best_idx = int(np.argmin(np.where(feasible, costs, np.inf)))
    best_cost = costs[best_idx]
    best_occ = m.occupancy(policies[best_idx])

    # Mixing two vertices across the bound line can only help when one side
    # is infeasible but cheap.
    if np.isfinite(value_bound):
        for i in range(len(policies)):
            if feasible[i]:
                continue
            for j in range(len(policies)):
                if not feasible[j] or rewards[j] <= rewards[i]:
                    continue
                t = (value_bound - rewards[i]) / (rewards[j] - rewards[i])
                mixed_cost = costs[i] + t * (costs[j] - costs[i])
                if mixed_cost < best_cost - 1e-15:
                    best_cost = mixed_cost
                    best_occ = (1.0 - t) * m.occupancy(policies[i]) + t * m.occupancy(policies[j])

    d_state = best_occ.sum(axis=1, keepdims=True)
    policy = np.where(d_state > 1e-300, best_occ / np.maximum(d_state, 1e-300), 1.0 / m.n_actions)
    reward, cost = m.evaluate_policy(policy)
    return CmdpSolution(feasible=True, cost=cost, reward=reward, policy=policy, occupancy=best_occ)


def random_cmdp(n_states: int, n_actions: int, discount: float,
                rng: np.random.Generator) -> TabularCmdp:
    """Seeded dense instance: Dirichlet transition rows, U[0,1] tables."""
    transitions = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    return TabularCmdp(
        transitions=transitions,
        rewards=rng.uniform(0.0, 1.0, size=(n_states, n_actions)),
        costs=rng.uniform(0.0, 1.0, size=(n_states, n_actions)),
        discount=discount,
        initial_distribution=np.full(n_states, 1.0 / n_states),
    )


# ---------------------------------------------------------------------------
# Plain-text table format
# ---------------------------------------------------------------------------

def load_cmdp(path) -> TabularCmdp:
    """Read a CMDP from a text file.

    Grammar: a header line ``states actions discount``, then the P table as
    S*A lines of S probabilities (state-major, action-minor), then S lines of
    A rewards, then S lines of A costs, then one line with the S initial
    probabilities. ``#`` comments and blank lines are ignored.
    """
    with open(path) as fh:
        rows = [line.split("#")[0].split() for line in fh]
    tokens = [t for row in rows for t in row]
    if len(tokens) < 3:
        raise ValueError("truncated CMDP file")
    n_s, n_a = int(tokens[0]), int(tokens[1])
    discount = float(tokens[2])
    need = 3 + n_s * n_a * n_s + 2 * n_s * n_a + n_s
    if len(tokens) != need:
        raise ValueError(f"expected {need} numbers, found {len(tokens)}")
    vals = np.array([float(t) for t in tokens[3:]])
    i = 0
    transitions = vals[i : i + n_s * n_a * n_s].reshape(n_s, n_a, n_s); i += n_s * n_a * n_s
    rewards = vals[i : i + n_s * n_a].reshape(n_s, n_a); i += n_s * n_a
    costs = vals[i : i + n_s * n_a].reshape(n_s, n_a); i += n_s * n_a
    initial = vals[i : i + n_s]
    return TabularCmdp(transitions, rewards, costs, discount, initial)


def save_cmdp(path, m: TabularCmdp) -> None:
    def fmt(row) -> str:
        return " ".join(repr(float(x)) for x in row)

    with open(path, "w") as fh:
        fh.write(f"{m.n_states} {m.n_actions} {m.discount}\n")
        fh.write("# transition rows P[s,a,:]\n")
        for s in range(m.n_states):
            for a in range(m.n_actions):
                fh.write(fmt(m.transitions[s, a]) + "\n")
        fh.write("# rewards R[s,:]\n")
        for s in range(m.n_states):
            fh.write(fmt(m.rewards[s]) + "\n")
        fh.write("# costs C[s,:]\n")
        for s in range(m.n_states):
            fh.write(fmt(m.costs[s]) + "\n")
        fh.write("# initial distribution\n")
        fh.write(fmt(m.initial_distribution) + "\n")


class TabularCmdpEnv(Env):
    """Continuous-action wrapper: one-hot states, actions binned over [-1, 1]."""

    n_costs = 1

    def __init__(self, model: TabularCmdp, episode_len: int = 50):
        self.model = model
        self.episode_len = episode_len
        self.obs_dim = model.n_states
        self.action_scale = 1.0
        self._state = 0
        self._rng = np.random.default_rng(0)

    def bin_action(self, action: float) -> int:
        n = self.model.n_actions
        idx = int(np.floor((action + 1.0) / 2.0 * n))
        return min(max(idx, 0), n - 1)

    def bin_probabilities(self, mean: float, std: float) -> np.ndarray:
        """Exact bin probabilities of a Gaussian action under the binning."""
        from math import erf

        n = self.model.n_actions
        edges = -1.0 + 2.0 * np.arange(1, n) / n
        cdf = np.array([0.5 * (1.0 + erf((e - mean) / (std * np.sqrt(2.0)))) for e in edges])
        probs = np.diff(np.concatenate([[0.0], cdf, [1.0]]))
        return probs / probs.sum()

    def observation(self) -> np.ndarray:
        obs = np.zeros(self.model.n_states)
        obs[self._state] = 1.0
        return obs

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self._rng = rng
        self._state = int(rng.choice(self.model.n_states, p=self.model.initial_distribution))
        return self.observation()

    def step(self, action: np.ndarray) -> tuple[np.ndarray, float, np.ndarray, bool]:
        a = self.bin_action(float(np.asarray(action).reshape(-1)[0]))
        s = self._state
        reward = float(self.model.rewards[s, a])
        cost = float(self.model.costs[s, a])
        self._state = int(self._rng.choice(self.model.n_states, p=self.model.transitions[s, a]))
        return self.observation(), reward, np.array([cost]), False
