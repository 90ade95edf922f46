import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsaclab.envs import (
    PENDULUM_SPEC,
    PendulumEnv,
    PointGoalEnv,
    StepResult,
    Trajectory,
    augment,
    is_absorbing,
    make_env,
    pendulum_dynamics,
    point_goal_dynamics,
    wrap_for_absorbing_states,
)


def test_point_goal_terminal_at_goal():
    _, reward, done = point_goal_dynamics(np.array([0.8, 0.8, 0.0, 0.0]), np.zeros(2))
    assert done and reward == 0.0


def test_point_goal_rest_is_fixed_point():
    state = np.array([-0.3, 0.5, 0.0, 0.0])
    nxt, reward, done = point_goal_dynamics(state, np.zeros(2))
    np.testing.assert_array_equal(nxt, state)
    assert not done and reward < 0


def test_point_goal_dynamics_formula():
    state = np.array([0.0, 0.0, 0.2, -0.1])
    nxt, reward, _ = point_goal_dynamics(state, np.array([1.0, 0.5]))
    v = 0.95 * np.array([0.2, -0.1]) + 0.1 * np.array([1.0, 0.5])
    np.testing.assert_allclose(nxt, np.concatenate([0.05 * v, v]))
    assert reward == pytest.approx(-np.linalg.norm(0.05 * v - 0.8))


def test_point_goal_truncates_after_time_limit():
    env = PointGoalEnv()
    env.reset(np.random.default_rng(0))
    env.state = np.array([-1.0, -1.0, 0.0, 0.0])
    results = [env.step(np.zeros(2)) for _ in range(200)]
    assert not any(r.truncated or r.terminal for r in results[:-1])
    assert results[-1].truncated and not results[-1].terminal
    with pytest.raises(RuntimeError):
        env.step(np.zeros(2))


def test_point_goal_rejects_non_finite():
    with pytest.raises(ValueError):
        point_goal_dynamics(np.array([np.nan, 0, 0, 0]), np.zeros(2))


def test_step_result_flags_exclusive():
    with pytest.raises(ValueError):
        StepResult(np.zeros(2), 0.0, True, True)


def test_pendulum_upright_equilibrium():
    obs = np.array([1.0, 0.0, 0.0])
    nxt, reward = pendulum_dynamics(obs, np.zeros(1))
    assert reward == 0.0
    np.testing.assert_allclose(nxt, obs, atol=1e-15)


def test_pendulum_hanging_equilibrium():
    # theta = pi: sin(theta + pi) = 0, so zero torque means zero acceleration
    obs = np.array([-1.0, 0.0, 0.0])
    nxt, _ = pendulum_dynamics(obs, np.zeros(1))
    assert math.atan2(nxt[1], nxt[0]) == pytest.approx(math.pi, abs=1e-12) or math.atan2(nxt[1], nxt[0]) == pytest.approx(-math.pi, abs=1e-12)
    assert abs(nxt[2]) < 1e-12


def test_pendulum_rejects_unnormalised():
    with pytest.raises(ValueError):
        pendulum_dynamics(np.array([1.0, 0.5, 0.0]), np.zeros(1))


@settings(max_examples=200, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(-8, 8), st.floats(-1, 1))
def test_pendulum_keeps_unit_circle(theta, theta_dot, torque):
    nxt, reward = pendulum_dynamics(np.array([math.cos(theta), math.sin(theta), theta_dot]), np.array([torque]))
    assert abs(nxt[0] ** 2 + nxt[1] ** 2 - 1.0) < 1e-6
    assert abs(nxt[2]) <= 8.0
    assert math.isfinite(reward) and reward <= 0


def test_pendulum_never_terminal_truncates_at_200():
    env = PendulumEnv()
    env.reset(np.random.default_rng(1))
    results = [env.step(np.array([0.3])) for _ in range(PENDULUM_SPEC.time_limit)]
    assert not any(r.terminal for r in results)
    assert [r.truncated for r in results].index(True) == 199


@pytest.mark.parametrize("name", ["point_goal_v1", "pendulum_v1"])
def test_reset_deterministic_given_seed(name):
    a = make_env(name).reset(np.random.default_rng(7))
    b = make_env(name).reset(np.random.default_rng(7))
    assert a.tobytes() == b.tobytes()


def test_point_goal_rewards_non_positive():
    env = PointGoalEnv()
    rng = np.random.default_rng(3)
    for _ in range(5):
        env.reset(rng)
        while True:
            r = env.step(rng.uniform(-1, 1, 2))
            assert r.env_reward <= 0
            if r.terminal or r.truncated:
                break


def test_unknown_env():
    with pytest.raises(ValueError):
        make_env("cartpole")


def test_augment():
    np.testing.assert_array_equal(augment(np.array([1.0, 2.0])), [1.0, 2.0, 0.0])
    np.testing.assert_array_equal(augment(np.array([5.0, -3.0]), is_absorbing=True), [0.0, 0.0, 1.0])
    assert augment(np.zeros(7)).shape == (8,)


# ---------------------------------------------------------------- wrapper


def _trajectory(rng, length, terminal, obs_dim=3, act_dim=2):
    return Trajectory(
        rng.normal(size=(length + 1, obs_dim)),
        rng.uniform(-1, 1, size=(length, act_dim)),
        terminal=terminal,
        truncated=not terminal,
        env_return=float(rng.normal()),
    )


def test_truncated_episode_keeps_length(rng):
    traj = _trajectory(rng, 200, terminal=False)
    out = wrap_for_absorbing_states(traj)
    assert len(out) == 200
    assert not np.any(is_absorbing(out.observations))
    np.testing.assert_array_equal(out.observations[:, :-1], traj.observations)
    np.testing.assert_array_equal(out.actions, traj.actions)


def test_terminal_episode_gains_self_loop(rng):
    traj = _trajectory(rng, 57, terminal=True)
    out = wrap_for_absorbing_states(traj)
    assert len(out) == 58
    s_a = np.array([0.0, 0.0, 0.0, 1.0])
    np.testing.assert_array_equal(out.observations[57], s_a)  # next-state of transition 57
    np.testing.assert_array_equal(out.observations[58], s_a)
    np.testing.assert_array_equal(out.actions[57], np.zeros(2))
    np.testing.assert_array_equal(out.observations[:57, :-1], traj.observations[:57])
    assert np.all(out.bootstrap_masks() == 1.0)


def test_wrapper_idempotent(rng):
    for terminal in (True, False):
        once = wrap_for_absorbing_states(_trajectory(rng, 10, terminal))
        assert wrap_for_absorbing_states(once) == once


def test_unwrapped_terminal_mask():
    traj = Trajectory(np.zeros((4, 2)), np.zeros((3, 1)), terminal=True, truncated=False)
    assert traj.bootstrap_masks().tolist() == [1.0, 1.0, 0.0]


def test_empty_trajectory_rejected():
    with pytest.raises(ValueError):
        Trajectory(np.zeros((1, 2)), np.zeros((0, 1)), terminal=True, truncated=False)
