"""Environment contracts: determinism, rewards, bounds, and the LQR oracle."""

import numpy as np
import pytest

from mpcmfrl.envs import LqrEnv, lqr_optimal_action, make_env, riccati_gain
from mpcmfrl.errors import ConfigError, NumericError, UnsupportedOperationError

ALL_ENVS = ["pendulum", "cartpole", "pointmass", "lqr"]


def test_unknown_env_name():
    with pytest.raises(ConfigError):
        make_env("mountaincar")


def test_reset_seeded_determinism():
    env = make_env("pendulum")
    s1 = env.reset(np.random.default_rng(7))
    s2 = env.reset(np.random.default_rng(7))
    assert np.array_equal(s1, s2)


def test_reset_different_seeds_differ():
    env = make_env("pendulum")
    s1 = env.reset(np.random.default_rng(7))
    s2 = env.reset(np.random.default_rng(8))
    assert not np.array_equal(s1, s2)


def test_lqr_zero_noise_init_is_fixed():
    env = make_env("lqr", init_noise=0.0)
    for seed in (0, 1, 99):
        assert np.array_equal(env.reset(np.random.default_rng(seed)), LqrEnv.x0)


@pytest.mark.parametrize("name", ALL_ENVS)
def test_step_bit_identical_repeat(name):
    env = make_env(name)
    rng = np.random.default_rng(3)
    state = env.reset(rng)
    action = rng.uniform(env.spec.action_low, env.spec.action_high)
    first = env.step(state, action)
    second = env.step(state, action)
    assert np.array_equal(first[0], second[0]) and first[1] == second[1]


@pytest.mark.parametrize("name", ALL_ENVS)
def test_reward_fn_matches_step(name):
    env = make_env(name)
    rng = np.random.default_rng(11)
    state = env.reset(rng)
    for _ in range(20):
        action = rng.uniform(2 * env.spec.action_low, 2 * env.spec.action_high)
        _, reward = env.step(state, action)
        assert reward == float(env.reward(state, action))
        state, _ = env.step(state, action)


@pytest.mark.parametrize("name", ALL_ENVS)
def test_batched_matches_single(name):
    env = make_env(name)
    rng = np.random.default_rng(5)
    states = np.array([env.reset(rng) for _ in range(8)])
    actions = rng.uniform(env.spec.action_low, env.spec.action_high, size=(8, env.spec.action_dim))
    batch_next = env.dynamics(states, actions)
    batch_rew = env.reward(states, actions)
    for i in range(8):
        assert np.array_equal(batch_next[i], env.dynamics(states[i], actions[i]))
        assert batch_rew[i] == env.reward(states[i], actions[i])


def test_lqr_origin_fixed_point():
    env = make_env("lqr")
    next_state, reward = env.step(np.zeros(2), np.zeros(1))
    assert np.array_equal(next_state, np.zeros(2))
    assert reward == 0.0


def test_lqr_reward_unit_state():
    env = make_env("lqr")
    assert env.reward(np.array([1.0, 0.0]), np.zeros(1)) == -1.0


def test_pendulum_upright_equilibrium():
    env = make_env("pendulum")
    next_state, reward = env.step(np.array([1.0, 0.0, 0.0]), np.zeros(1))
    assert np.array_equal(next_state, np.array([1.0, 0.0, 0.0]))
    assert reward == 0.0  # the per-step maximum


def test_pendulum_reward_hanging_down():
    env = make_env("pendulum")
    # theta = pi, no velocity, no torque: reward is -pi^2
    reward = float(env.reward(np.array([-1.0, 0.0, 0.0]), np.zeros(1)))
    assert reward == pytest.approx(-np.pi**2, abs=1e-12)


def test_actions_clipped_not_rejected():
    for name in ALL_ENVS:
        env = make_env(name)
        state = env.reset(np.random.default_rng(0))
        big = 100.0 * env.spec.action_high
        assert np.array_equal(env.step(state, big)[0], env.step(state, env.spec.action_high)[0])


def test_nonfinite_input_rejected():
    env = make_env("pendulum")
    with pytest.raises(NumericError):
        env.step(np.array([np.nan, 0.0, 0.0]), np.zeros(1))
    with pytest.raises(NumericError):
        env.reward(np.array([1.0, 0.0, 0.0]), np.array([np.inf]))


def test_rollout_chains():
    env = make_env("pointmass")
    rng = np.random.default_rng(1)
    state = env.reset(rng)
    states, next_states = [], []
    for _ in range(env.spec.horizon):
        action = rng.uniform(env.spec.action_low, env.spec.action_high)
        nxt, _ = env.step(state, action)
        states.append(state)
        next_states.append(nxt)
        state = nxt
    assert np.array_equal(np.array(states)[1:], np.array(next_states)[:-1])


def cartpole_reference_step(state, force):
    """Independent transcription of the documented cartpole equations."""
    g, mc, mp, half = 9.8, 1.0, 0.1, 0.5
    dt = 0.02
    x, x_dot, theta, theta_dot = state
    force = min(max(force, -10.0), 10.0)
    total = mc + mp
    tmp = (force + mp * half * theta_dot * theta_dot * np.sin(theta)) / total
    theta_acc = (g * np.sin(theta) - np.cos(theta) * tmp) / (
        half * (4.0 / 3.0 - mp * np.cos(theta) ** 2 / total))
    x_acc = tmp - mp * half * theta_acc * np.cos(theta) / total
    new_x_dot = x_dot + x_acc * dt
    new_theta_dot = theta_dot + theta_acc * dt
    return np.array([x + new_x_dot * dt, new_x_dot, theta + new_theta_dot * dt, new_theta_dot])


def test_cartpole_matches_reference_reimplementation():
    env = make_env("cartpole")
    rng = np.random.default_rng(17)
    for _ in range(50):
        state = rng.uniform(-1.0, 1.0, size=4)
        force = rng.uniform(-12.0, 12.0)
        ours = env.dynamics(state, np.array([force]))
        ref = cartpole_reference_step(state, force)
        assert np.max(np.abs(ours - ref)) < 1e-12


# --- Riccati oracle -------------------------------------------------------------

def _riccati_cost_matrix(A, B, Q, R, gamma, iters=20000, tol=1e-13):
    """Independent value iteration for the cost matrix P."""
    P = Q.copy()
    for _ in range(iters):
        K = gamma * np.linalg.solve(R + gamma * B.T @ P @ B, B.T @ P @ A)
        Acl = A - B @ K
        P_next = Q + K.T @ R @ K + gamma * Acl.T @ P @ Acl
        if np.max(np.abs(P_next - P)) < tol:
            return P_next
        P = P_next
    return P


def test_riccati_gain_fixed_point_residual():
    env = make_env("lqr")
    gamma = 0.99
    K = riccati_gain(env.A, env.B, env.Q, env.Rc, gamma=gamma)
    P = _riccati_cost_matrix(env.A, env.B, env.Q, env.Rc, gamma)
    K_again = gamma * np.linalg.solve(env.Rc + gamma * env.B.T @ P @ env.B,
                                      env.B.T @ P @ env.A)
    assert np.max(np.abs(K - K_again)) < 1e-8
    Acl = env.A - env.B @ K
    residual = env.Q + K.T @ env.Rc @ K + gamma * Acl.T @ P @ Acl - P
    assert np.max(np.abs(residual)) < 1e-8


def test_lqr_optimal_action_zero_state():
    env = make_env("lqr")
    assert np.array_equal(lqr_optimal_action(env, np.zeros(2)), np.zeros(1))


def test_lqr_optimal_action_wrong_env():
    with pytest.raises(UnsupportedOperationError):
        lqr_optimal_action(make_env("pendulum"), np.zeros(3))


def _discounted_rollout(env, x0, controller, horizon, gamma):
    state = x0.copy()
    total = 0.0
    for h in range(horizon):
        state, reward = env.step(state, controller(state))
        total += gamma**h * reward
    return total


def test_riccati_beats_constant_actions():
    env = make_env("lqr", init_noise=0.0)
    gamma = 0.99
    K = riccati_gain(env.A, env.B, env.Q, env.Rc, gamma=gamma)
    x0 = LqrEnv.x0
    ric = _discounted_rollout(env, x0, lambda s: -(K @ s), env.spec.horizon, gamma)
    for const in np.linspace(-2.0, 2.0, 41):
        action = np.array([const])
        ret = _discounted_rollout(env, x0, lambda s: action, env.spec.horizon, gamma)
        assert ric >= ret


def test_riccati_beats_random_open_loop_sequences():
    """Brute-force oracle: no random 20-step open-loop plan beats the gain."""
    env = make_env("lqr", init_noise=0.0)
    gamma = 0.99
    horizon = 20
    K = riccati_gain(env.A, env.B, env.Q, env.Rc, gamma=gamma)
    x0 = np.array([0.5, 0.0])
    ric = _discounted_rollout(env, x0, lambda s: -(K @ s), horizon, gamma)
    rng = np.random.default_rng(123)
    seqs = rng.uniform(env.spec.action_low, env.spec.action_high, size=(10_000, horizon, 1))
    states = np.broadcast_to(x0, (10_000, 2)).copy()
    returns = np.zeros(10_000)
    for h in range(horizon):
        returns += gamma**h * env.reward(states, seqs[:, h, :])
        states = env.dynamics(states, seqs[:, h, :])
    assert ric > returns.max()


def test_named_reset_convenience():
    from mpcmfrl.envs import reset

    assert np.array_equal(reset("pendulum", 5), reset("pendulum", 5))
    assert np.array_equal(reset("lqr", 0, init_noise=0.0), LqrEnv.x0)
    with pytest.raises(ConfigError):
        reset("acrobot", 1)
