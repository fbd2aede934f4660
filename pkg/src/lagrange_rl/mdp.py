"""Transitions, fixed-length trajectory segments and a ring replay buffer.

Segments (not single transitions) are the storage unit so the multi-step
return estimator always sees contiguous windows. The buffer supports
concurrent appends from many actors and batch reads from one learner; a lock
plus read-only array views keep samples consistent.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass

import numpy as np

DUMP_VERSION = 1


@dataclass
class Transition:
    """One environment step: (s, a, s', r, c, log b(a|s), terminal[, goal])."""

    state: np.ndarray
    action: np.ndarray
    next_state: np.ndarray
    reward: float
    costs: np.ndarray
    behavior_log_prob: float
    terminal: bool = False
    goal: float | None = None

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=float)
        self.action = np.asarray(self.action, dtype=float)
        self.next_state = np.asarray(self.next_state, dtype=float)
        self.costs = np.asarray(self.costs, dtype=float)
        self.reward = float(self.reward)
        self.behavior_log_prob = float(self.behavior_log_prob)
        if not np.isfinite(self.behavior_log_prob):
            raise ValueError("behavior_log_prob must be finite")


class SegmentError(ValueError):
    """A segment violates the chaining invariants (data-collection bug)."""


@dataclass
class TrajectorySegment:
    """A contiguous window of transitions from one episode."""

    transitions: list[Transition]

    def __post_init__(self):
        if not self.transitions:
            raise SegmentError("empty segment")
        arity = self.transitions[0].costs.shape
        has_goal = self.transitions[0].goal is not None
        for i, t in enumerate(self.transitions):
            if t.costs.shape != arity:
                raise SegmentError("cost arity varies within segment")
            if (t.goal is not None) != has_goal:
                raise SegmentError("goal must be present for all transitions or none")
            if i + 1 < len(self.transitions):
                if t.terminal:
                    raise SegmentError(f"transition {i} is terminal but not last")
                if not np.array_equal(t.next_state, self.transitions[i + 1].state):
                    raise SegmentError(f"next_state of step {i} does not chain to step {i + 1}")

    def __len__(self) -> int:
        return len(self.transitions)

    @property
    def cost_arity(self) -> int:
        return int(self.transitions[0].costs.size)

    # Stacked views used by the learner.
    def states(self) -> np.ndarray:
        return np.stack([t.state for t in self.transitions])

    def actions(self) -> np.ndarray:
        return np.stack([t.action for t in self.transitions])

    def next_states(self) -> np.ndarray:
        return np.stack([t.next_state for t in self.transitions])

    def rewards(self) -> np.ndarray:
        return np.array([t.reward for t in self.transitions])

    def costs(self) -> np.ndarray:
        return np.stack([t.costs for t in self.transitions])

    def behavior_log_probs(self) -> np.ndarray:
        return np.array([t.behavior_log_prob for t in self.transitions])

    def terminals(self) -> np.ndarray:
        return np.array([t.terminal for t in self.transitions])

    def goals(self) -> np.ndarray | None:
        if self.transitions[0].goal is None:
            return None
        return np.array([t.goal for t in self.transitions])


class ReplayBuffer:
    """Bounded FIFO of segments with uniform with-replacement sampling."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self._segments: deque[TrajectorySegment] = deque()
        self._lock = threading.Lock()
        self._total_pushed = 0

    def __len__(self) -> int:
        with self._lock:
            return len(self._segments)

    @property
    def total_pushed(self) -> int:
        return self._total_pushed

    def push_segment(self, segment: TrajectorySegment) -> None:
        if not isinstance(segment, TrajectorySegment):
            segment = TrajectorySegment(list(segment))
        for t in segment.transitions:
            for arr in (t.state, t.action, t.next_state, t.costs):
                arr.setflags(write=False)
        with self._lock:
            self._segments.append(segment)
            self._total_pushed += 1
            while len(self._segments) > self.capacity:
                self._segments.popleft()

    def sample_batch(self, batch_size: int, rng: np.random.Generator | int) -> list[TrajectorySegment]:
        if isinstance(rng, (int, np.integer)):
            rng = np.random.default_rng(rng)
        if batch_size <= 0:
            raise ValueError("batch_size must be positive")
        with self._lock:
            if not self._segments:
                raise IndexError("cannot sample from an empty replay buffer")
            idx = rng.integers(0, len(self._segments), size=batch_size)
            return [self._segments[i] for i in idx]

    def snapshot(self) -> list[TrajectorySegment]:
        with self._lock:
            return list(self._segments)


@dataclass
class SegmentBatch:
    """Segments stacked into padded (B, L, ...) arrays with a validity mask."""

    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    rewards: np.ndarray
    costs: np.ndarray
    behavior_log_probs: np.ndarray
    terminals: np.ndarray
    mask: np.ndarray
    goals: np.ndarray | None = None

    @property
    def n_segments(self) -> int:
        return self.states.shape[0]

    @property
    def max_len(self) -> int:
        return self.states.shape[1]

    def flat(self, field: np.ndarray) -> np.ndarray:
        """Select valid steps of a padded (B, L, ...) array as (T, ...)."""
        return field[self.mask]


def stack_segments(segments: list[TrajectorySegment]) -> SegmentBatch:
    max_len = max(len(s) for s in segments)
    b = len(segments)
    obs_dim = segments[0].transitions[0].state.size
    act_dim = segments[0].transitions[0].action.size
    arity = segments[0].cost_arity
    has_goal = segments[0].transitions[0].goal is not None

    def padded(shape, dtype=float):
        return np.zeros((b, max_len, *shape), dtype=dtype)

    batch = SegmentBatch(
        states=padded((obs_dim,)),
        actions=padded((act_dim,)),
        next_states=padded((obs_dim,)),
        rewards=np.zeros((b, max_len)),
        costs=padded((arity,)),
        behavior_log_probs=np.zeros((b, max_len)),
        terminals=np.zeros((b, max_len), dtype=bool),
        mask=np.zeros((b, max_len), dtype=bool),
        goals=np.zeros((b, max_len)) if has_goal else None,
    )
    for i, seg in enumerate(segments):
        n = len(seg)
        batch.states[i, :n] = seg.states()
        batch.actions[i, :n] = seg.actions()
        batch.next_states[i, :n] = seg.next_states()
        batch.rewards[i, :n] = seg.rewards()
        batch.costs[i, :n] = seg.costs()
        batch.behavior_log_probs[i, :n] = seg.behavior_log_probs()
        batch.terminals[i, :n] = seg.terminals()
        batch.mask[i, :n] = True
        if has_goal:
            batch.goals[i, :n] = seg.goals()
    return batch


# ---------------------------------------------------------------------------
# Structured dump/load for offline inspection
# ---------------------------------------------------------------------------

def save_segments(path, segments: list[TrajectorySegment]) -> None:
    """Write segments to an .npz container with a versioned header."""
    if not segments:
        raise ValueError("nothing to save")
    arity = segments[0].cost_arity
    has_goal = segments[0].goals() is not None
    lengths = np.array([len(s) for s in segments])
    payload = {
        "dump_version": np.array(DUMP_VERSION),
        "cost_arity": np.array(arity),
        "has_goal": np.array(int(has_goal)),
        "segment_lengths": lengths,
        "states": np.concatenate([s.states() for s in segments]),
        "actions": np.concatenate([s.actions() for s in segments]),
        "next_states": np.concatenate([s.next_states() for s in segments]),
        "rewards": np.concatenate([s.rewards() for s in segments]),
        "costs": np.concatenate([s.costs() for s in segments]),
        "behavior_log_probs": np.concatenate([s.behavior_log_probs() for s in segments]),
        "terminals": np.concatenate([s.terminals() for s in segments]),
    }
    if has_goal:
        payload["goals"] = np.concatenate([s.goals() for s in segments])
    np.savez(path, **payload)


def load_segments(path) -> list[TrajectorySegment]:
    with np.load(path) as data:
        version = int(data["dump_version"])
        if version != DUMP_VERSION:
            raise ValueError(f"unsupported trajectory dump version {version}")
        arity = int(data["cost_arity"])
        has_goal = bool(int(data["has_goal"]))
        lengths = data["segment_lengths"]
        goals = data["goals"] if has_goal else None
        segments = []
        start = 0
        for n in lengths:
            trs = []
            for j in range(start, start + int(n)):
                costs = data["costs"][j]
                assert costs.size == arity
                trs.append(Transition(
                    state=data["states"][j],
                    action=data["actions"][j],
                    next_state=data["next_states"][j],
                    reward=float(data["rewards"][j]),
                    costs=costs,
                    behavior_log_prob=float(data["behavior_log_probs"][j]),
                    terminal=bool(data["terminals"][j]),
                    goal=float(goals[j]) if goals is not None else None,
                ))
            segments.append(TrajectorySegment(trs))
            start += int(n)
    return segments
