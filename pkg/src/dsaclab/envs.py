"""Toy continuous-control tasks and the absorbing-state trajectory wrapper."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class StepResult:
    next_obs: np.ndarray
    env_reward: float
    terminal: bool
    truncated: bool

    def __post_init__(self):
        if self.terminal and self.truncated:
            raise ValueError("a step cannot be both terminal and truncated")
        if not math.isfinite(self.env_reward):
            raise ValueError("environment reward must be finite")


@dataclass(frozen=True)
class EnvSpec:
    name: str
    obs_dim: int
    act_dim: int
    time_limit: int
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.time_limit < 1:
            raise ValueError("time_limit must be >= 1")

    def to_json(self) -> dict:
        return asdict(self)


POINT_GOAL_SPEC = EnvSpec(
    "point_goal_v1",
    obs_dim=4,
    act_dim=2,
    time_limit=200,
    constants={"damping": 0.95, "accel": 0.1, "dt": 0.05, "goal": [0.8, 0.8], "goal_radius": 0.1},
)

PENDULUM_SPEC = EnvSpec(
    "pendulum_v1",
    obs_dim=3,
    act_dim=1,
    time_limit=200,
    constants={"g": 10.0, "m": 1.0, "l": 1.0, "dt": 0.05, "max_speed": 8.0, "max_torque": 2.0},
)


def _finite(x: np.ndarray, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite {what}")
    return x


def point_goal_dynamics(state, action, spec: EnvSpec = POINT_GOAL_SPEC):
    """One step of the damped point mass. Returns (next_state, reward, reached_goal)."""
    state = _finite(state, "state")
    action = np.clip(_finite(action, "action"), -1.0, 1.0)
    c = spec.constants
    pos, vel = state[:2], state[2:]
    vel = c["damping"] * vel + c["accel"] * action
    pos = pos + c["dt"] * vel
    dist = float(np.linalg.norm(pos - np.asarray(c["goal"])))
    return np.concatenate([pos, vel]), -dist, dist < c["goal_radius"]


def angle_normalize(theta: float) -> float:
    return ((theta + math.pi) % (2 * math.pi)) - math.pi


def pendulum_dynamics(obs, action, spec: EnvSpec = PENDULUM_SPEC):
    """Swing-up pendulum from (cos, sin, theta_dot). Returns (next_obs, reward)."""
    obs = _finite(obs, "state")
    cos_t, sin_t, theta_dot = obs
    if abs(cos_t * cos_t + sin_t * sin_t - 1.0) > 1e-6:
        raise ValueError("pendulum observation has unnormalised (cos, sin) pair")
    c = spec.constants
    torque = c["max_torque"] * float(np.clip(_finite(action, "action"), -1.0, 1.0)[0])
    theta = math.atan2(sin_t, cos_t)
    g, m, length, dt = c["g"], c["m"], c["l"], c["dt"]
    reward = -(angle_normalize(theta) ** 2 + 0.1 * theta_dot**2 + 0.001 * torque**2)
    theta_ddot = -3 * g / (2 * length) * math.sin(theta + math.pi) + 3.0 / (m * length**2) * torque
    theta_dot = float(np.clip(theta_dot + theta_ddot * dt, -c["max_speed"], c["max_speed"]))
    theta = theta + theta_dot * dt
    return np.array([math.cos(theta), math.sin(theta), theta_dot]), reward


class Env:
    """Episodic wrapper holding the step counter; subclasses define the physics."""

    spec: EnvSpec

    def __init__(self):
        self.state: np.ndarray | None = None
        self.t = 0

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.state = self._initial_state(rng)
        self.t = 0
        return self.state.copy()

    def step(self, action) -> StepResult:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        if self.t >= self.spec.time_limit:
            raise RuntimeError("episode already ended; call reset()")
        next_obs, reward, terminal = self._advance(self.state, np.asarray(action, dtype=np.float64))
        self.t += 1
        truncated = not terminal and self.t >= self.spec.time_limit
        self.state = next_obs
        if terminal or truncated:
            # block further steps until reset
            self.t = self.spec.time_limit
        return StepResult(next_obs.copy(), float(reward), bool(terminal), bool(truncated))

    def _initial_state(self, rng) -> np.ndarray:
        raise NotImplementedError

    def _advance(self, state, action):
        raise NotImplementedError


class PointGoalEnv(Env):
    spec = POINT_GOAL_SPEC

    def _initial_state(self, rng):
        return np.concatenate([rng.uniform(-1.0, 1.0, size=2), np.zeros(2)])

    def _advance(self, state, action):
        return point_goal_dynamics(state, action, self.spec)


class PendulumEnv(Env):
    spec = PENDULUM_SPEC

    def _initial_state(self, rng):
        theta = rng.uniform(-math.pi, math.pi)
        return np.array([math.cos(theta), math.sin(theta), rng.uniform(-1.0, 1.0)])

    def _advance(self, state, action):
        next_obs, reward = pendulum_dynamics(state, action, self.spec)
        return next_obs, reward, False


ENVIRONMENTS = {"point_goal_v1": PointGoalEnv, "pendulum_v1": PendulumEnv}


def make_env(name: str) -> Env:
    try:
        return ENVIRONMENTS[name]()
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None


def env_spec(name: str) -> EnvSpec:
    return make_env(name).spec


# ---------------------------------------------------------------- absorbing states


def augment(obs, is_absorbing: bool = False) -> np.ndarray:
    """Append the absorbing indicator; the absorbing state is (0, ..., 0, 1)."""
    obs = np.asarray(obs, dtype=np.float64)
    out = np.zeros(obs.shape[:-1] + (obs.shape[-1] + 1,))
    if is_absorbing:
        out[..., -1] = 1.0
    else:
        out[..., :-1] = obs
    return out


def absorbing_state(obs_dim: int) -> np.ndarray:
    return augment(np.zeros(obs_dim), is_absorbing=True)


def is_absorbing(obs) -> np.ndarray | bool:
    obs = np.asarray(obs)
    return obs[..., -1] == 1.0


@dataclass
class Trajectory:
    """One episode: ``observations`` has one more row than ``actions``.

    Transition ``t`` is ``(observations[t], actions[t], observations[t+1])``.
    ``wrapped`` marks trajectories whose observations carry the absorbing
    indicator column.
    """

    observations: np.ndarray
    actions: np.ndarray
    terminal: bool
    truncated: bool
    env_return: float = 0.0
    wrapped: bool = False

    def __post_init__(self):
        self.observations = np.asarray(self.observations, dtype=np.float64)
        self.actions = np.asarray(self.actions, dtype=np.float64)
        if self.actions.ndim != 2 or self.observations.ndim != 2:
            raise ValueError("observations and actions must be 2-D arrays")
        if len(self.actions) == 0:
            raise ValueError("trajectory has no transitions")
        if len(self.observations) != len(self.actions) + 1:
            raise ValueError("need exactly one more observation than actions")
        if self.terminal and self.truncated:
            raise ValueError("trajectory cannot be both terminal and truncated")

    def __len__(self) -> int:
        return len(self.actions)

    def bootstrap_masks(self) -> np.ndarray:
        masks = np.ones(len(self))
        if self.terminal and not self.wrapped:
            masks[-1] = 0.0
        return masks

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            np.array_equal(self.observations, other.observations)
            and np.array_equal(self.actions, other.actions)
            and self.terminal == other.terminal
            and self.truncated == other.truncated
            and self.env_return == other.env_return
            and self.wrapped == other.wrapped
        )


def wrap_for_absorbing_states(traj: Trajectory) -> Trajectory:
    """Route true terminations into a self-looping absorbing state.

    Time-limit truncations keep their transitions (observations just gain a
    zero indicator column). A terminal episode has its final next-state
    replaced by the absorbing state and gains one ``(s_a, 0, s_a)`` transition.
    Already-wrapped trajectories are returned as-is.
    """
    if len(traj) == 0:
        raise ValueError("cannot wrap an empty trajectory")
    if traj.wrapped:
        return traj
    obs = np.hstack([traj.observations, np.zeros((len(traj.observations), 1))])
    actions = traj.actions
    if traj.terminal:
        s_a = absorbing_state(traj.observations.shape[1])
        obs = np.vstack([obs[:-1], s_a, s_a])
        actions = np.vstack([actions, np.zeros((1, actions.shape[1]))])
    return replace(traj, observations=obs, actions=actions, wrapped=True)
