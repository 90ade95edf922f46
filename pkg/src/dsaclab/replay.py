"""Replay buffers for demonstrations and agent samples, plus the demo file format."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .envs import EnvSpec, Trajectory, is_absorbing

DEMO_FORMAT_VERSION = 1


class DemoFormatError(ValueError):
    """Demo file is unreadable or structurally invalid."""


class DemoVersionError(DemoFormatError):
    pass


class EnvMismatchError(ValueError):
    """Demo file was recorded on a different environment than requested."""


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: np.ndarray
    next_obs: np.ndarray
    bootstrap_mask: float = 1.0
    source: str = "sample"
    # task reward; only the expert learner reads it
    env_reward: float = 0.0


@dataclass
class Batch:
    """Column-stacked minibatch."""

    obs: np.ndarray
    actions: np.ndarray
    next_obs: np.ndarray
    masks: np.ndarray
    env_rewards: np.ndarray

    def __len__(self) -> int:
        return len(self.obs)

    @classmethod
    def concat(cls, batches) -> "Batch":
        return cls(*(np.concatenate([getattr(b, f) for b in batches]) for f in
                     ("obs", "actions", "next_obs", "masks", "env_rewards")))


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions, sampled uniformly with replacement."""

    def __init__(self, capacity: int, source: str = "sample"):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.source = source
        self._obs = self._act = self._next = None
        self._mask = np.zeros(0)
        self._rew = np.zeros(0)
        self._start = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def _allocate(self, obs_dim: int, act_dim: int) -> None:
        # grow lazily so unbounded demo buffers do not preallocate huge arrays
        n = min(self.capacity, 1024)
        self._obs = np.zeros((n, obs_dim))
        self._act = np.zeros((n, act_dim))
        self._next = np.zeros((n, obs_dim))
        self._mask = np.zeros(n)
        self._rew = np.zeros(n)

    def _grow(self) -> None:
        n = min(self.capacity, 2 * len(self._mask))
        order = (self._start + np.arange(self._size)) % len(self._mask)
        for attr in ("_obs", "_act", "_next", "_mask", "_rew"):
            old = getattr(self, attr)[order]
            new = np.zeros((n, *old.shape[1:]))
            new[: self._size] = old
            setattr(self, attr, new)
        self._start = 0

    @property
    def obs_dim(self) -> int | None:
        return None if self._obs is None else self._obs.shape[1]

    def push(self, t: Transition) -> None:
        obs, act, nxt = (np.asarray(x, dtype=np.float64) for x in (t.obs, t.action, t.next_obs))
        if obs.shape != nxt.shape:
            raise ValueError("obs and next_obs dims differ")
        if self._obs is None:
            self._allocate(obs.shape[0], act.shape[0])
        elif obs.shape[0] != self._obs.shape[1] or act.shape[0] != self._act.shape[1]:
            raise ValueError(
                f"transition dims ({obs.shape[0]}, {act.shape[0]}) do not match buffer "
                f"({self._obs.shape[1]}, {self._act.shape[1]})"
            )
        if self._size == len(self._mask) and self._size < self.capacity:
            self._grow()
        cap = len(self._mask)
        if self._size < cap:
            i = (self._start + self._size) % cap
            self._size += 1
        else:
            i = self._start
            self._start = (self._start + 1) % cap
        self._obs[i], self._act[i], self._next[i] = obs, act, nxt
        self._mask[i] = t.bootstrap_mask
        self._rew[i] = t.env_reward

    def push_trajectory(self, traj: Trajectory, env_rewards=None) -> int:
        transitions = trajectory_transitions(traj, self.source, env_rewards)
        for t in transitions:
            self.push(t)
        return len(transitions)

    def _index(self, k: np.ndarray) -> np.ndarray:
        return (self._start + k) % len(self._mask)

    def __getitem__(self, k: int) -> Transition:
        """k-th oldest transition."""
        if not 0 <= k < self._size:
            raise IndexError(k)
        i = int(self._index(np.asarray(k)))
        return Transition(
            self._obs[i].copy(), self._act[i].copy(), self._next[i].copy(),
            float(self._mask[i]), self.source, float(self._rew[i]),
        )

    def sample_indices(self, m: int, rng: np.random.Generator) -> np.ndarray:
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        if m < 1:
            raise ValueError("minibatch size must be >= 1")
        return self._index(rng.integers(0, self._size, size=m))

    def sample_batch(self, m: int, rng: np.random.Generator) -> Batch:
        i = self.sample_indices(m, rng)
        return Batch(self._obs[i], self._act[i], self._next[i], self._mask[i], self._rew[i])

    def all(self) -> Batch:
        i = self._index(np.arange(self._size))
        return Batch(self._obs[i], self._act[i], self._next[i], self._mask[i], self._rew[i])


def sample_minibatch(buf: ReplayBuffer, m: int, rng: np.random.Generator) -> list[Transition]:
    """``m`` transitions drawn uniformly with replacement."""
    idx = buf.sample_indices(m, rng)
    order = (idx - buf._start) % len(buf._mask)
    return [buf[int(k)] for k in order]


def trajectory_transitions(traj: Trajectory, source: str = "sample", env_rewards=None) -> list[Transition]:
    masks = traj.bootstrap_masks()
    rewards = np.zeros(len(traj)) if env_rewards is None else np.asarray(env_rewards, dtype=np.float64)
    if len(rewards) < len(traj):
        # the absorbing self-loop earns nothing
        rewards = np.concatenate([rewards, np.zeros(len(traj) - len(rewards))])
    return [
        Transition(traj.observations[t], traj.actions[t], traj.observations[t + 1], float(masks[t]), source, float(rewards[t]))
        for t in range(len(traj))
    ]


def demo_buffer(trajectories) -> ReplayBuffer:
    buf = ReplayBuffer(capacity=sum(len(t) for t in trajectories) or 1, source="demo")
    for traj in trajectories:
        buf.push_trajectory(traj)
    return buf


# ---------------------------------------------------------------- demo files


def save_demos(trajectories, path, env: EnvSpec, seed: int) -> None:
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("refusing to save an empty demonstration set")
    wrapped = {t.wrapped for t in trajectories}
    if len(wrapped) != 1:
        raise ValueError("cannot mix wrapped and unwrapped trajectories in one file")
    doc = {
        "format_version": DEMO_FORMAT_VERSION,
        "env": env.name,
        "env_spec": env.to_json(),
        "wrapped": wrapped.pop(),
        "seed": int(seed),
        "trajectories": [
            {
                "obs": t.observations.tolist(),
                "actions": t.actions.tolist(),
                "terminal": bool(t.terminal),
                "truncated": bool(t.truncated),
                "env_return": float(t.env_return),
            }
            for t in trajectories
        ],
    }
    # repr round-trips float64 exactly; json uses it
    Path(path).write_text(json.dumps(doc, indent=1))


@dataclass
class DemoFile:
    env: str
    env_spec: dict
    wrapped: bool
    seed: int
    trajectories: list[Trajectory]


def load_demos(path, expected_env: EnvSpec | None = None) -> DemoFile:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise DemoFormatError(f"corrupt demo file {path}: {e}") from e
    if not isinstance(doc, dict):
        raise DemoFormatError(f"corrupt demo file {path}: top level is not an object")
    if doc.get("format_version") != DEMO_FORMAT_VERSION:
        raise DemoVersionError(f"demo file version {doc.get('format_version')!r}, expected {DEMO_FORMAT_VERSION}")
    try:
        env, spec, wrapped = doc["env"], doc["env_spec"], bool(doc["wrapped"])
        trajs = [
            Trajectory(
                np.asarray(t["obs"], dtype=np.float64),
                np.asarray(t["actions"], dtype=np.float64),
                bool(t["terminal"]),
                bool(t["truncated"]),
                float(t["env_return"]),
                wrapped,
            )
            for t in doc["trajectories"]
        ]
        seed = int(doc["seed"])
    except (KeyError, TypeError, ValueError) as e:
        raise DemoFormatError(f"corrupt demo file {path}: {e}") from e
    if expected_env is not None:
        if env != expected_env.name:
            raise EnvMismatchError(f"demos were recorded on {env!r}, run uses {expected_env.name!r}")
        if spec != json.loads(json.dumps(expected_env.to_json())):
            raise EnvMismatchError(f"demo env constants differ from current {expected_env.name!r}")
    return DemoFile(env, spec, wrapped, seed, trajs)


def absorbing_flags(obs: np.ndarray, wrapped: bool) -> np.ndarray:
    if not wrapped:
        return np.zeros(len(obs), dtype=bool)
    return is_absorbing(obs)
