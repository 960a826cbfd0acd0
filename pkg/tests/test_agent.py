"""Policy/value learner: sampling, log-densities, returns/advantages, TRPO."""

import numpy as np
import pytest
from scipy import stats

from mpcmfrl.agent import (AgentConfig, GaussianPolicy, PolicyBehavior, UniformBehavior,
                           ValueFunction, collect_rollouts, compute_returns_and_advantages,
                           discounted_returns, fit_value, surrogate_and_grad, trpo_update)
from mpcmfrl.envs import Trajectory, make_env
from mpcmfrl.neuralnet import Mlp


def make_policy(state_dim=3, action_dim=1, seed=0, hidden=(16, 16)):
    return GaussianPolicy(state_dim, action_dim, hidden=hidden,
                          rng=np.random.default_rng(seed))


class TestSampling:
    def test_vanishing_std_is_nearly_deterministic(self):
        policy = make_policy(seed=1)
        policy.log_std[:] = -5.0
        state = np.array([0.3, -0.2, 0.5])
        mean = policy.mean_action(state)
        rng = np.random.default_rng(2)
        draws = np.array([policy.sample(state, rng) for _ in range(100)])
        assert np.max(np.abs(draws - mean)) < 5 * np.exp(-5.0)

    def test_log_std_clamped(self):
        policy = make_policy()
        flat = policy.params_flat()
        flat[-1] = -20.0
        policy.set_params_flat(flat)
        assert policy.log_std[-1] == -5.0

    def test_seeded_determinism(self):
        policy = make_policy(seed=3)
        state = np.zeros(3)
        a1 = policy.sample(state, np.random.default_rng(4))
        a2 = policy.sample(state, np.random.default_rng(4))
        assert np.array_equal(a1, a2)

    def test_monte_carlo_mean(self):
        policy = make_policy(seed=5, action_dim=2)
        state = np.array([0.5, 0.5, -1.0])
        n = 100_000
        states = np.tile(state, (n, 1))
        samples = policy.sample(states, np.random.default_rng(6))
        mean = policy.mean_action(state)
        tol = 4.0 * policy.std / np.sqrt(n)
        assert np.all(np.abs(samples.mean(axis=0) - mean) < tol)

    def test_mean_action_zero_init(self):
        policy = GaussianPolicy(3, 2)
        assert np.array_equal(policy.mean_action(np.ones(3)), np.zeros(2))

    def test_mean_action_ignores_log_std(self):
        policy = make_policy(seed=7)
        state = np.array([1.0, 2.0, 3.0])
        before = policy.mean_action(state)
        policy.log_std[:] = 2.0
        assert np.array_equal(policy.mean_action(state), before)


class TestLogProb:
    def test_density_at_mean_unit_std(self):
        policy = make_policy(seed=8, action_dim=2)
        policy.log_std[:] = 0.0
        state = np.array([0.1, 0.2, 0.3])
        mean = policy.mean_action(state)
        lp = policy.log_prob(state, mean)
        assert lp == pytest.approx(-np.log(2 * np.pi), abs=1e-12)

    def test_matches_scipy(self):
        policy = make_policy(seed=9, action_dim=3)
        policy.log_std = np.array([0.2, -0.4, 0.1])
        rng = np.random.default_rng(10)
        for _ in range(20):
            state = rng.normal(size=3)
            action = rng.normal(size=3)
            mean = policy.mean_action(state)
            ref = stats.multivariate_normal(mean=mean, cov=np.diag(policy.std**2)).logpdf(action)
            assert policy.log_prob(state, action)[0] == pytest.approx(ref, abs=1e-12)

    def test_sample_log_prob_consistent(self):
        policy = make_policy(seed=11)
        rng = np.random.default_rng(12)
        state = rng.normal(size=3)
        action = policy.sample(state, rng)
        assert np.isfinite(policy.log_prob(state, action))

    def test_gradient_matches_finite_differences(self):
        policy = make_policy(seed=13, hidden=(8,))
        rng = np.random.default_rng(14)
        states = rng.normal(size=(6, 3))
        actions = rng.normal(size=(6, 1))
        old_lp = policy.log_prob(states, actions)
        # at identical parameters the surrogate gradient with A=1 is the
        # gradient of the mean log-probability
        _, analytic = surrogate_and_grad(policy, states, actions, np.ones(6), old_lp)

        def mean_log_prob(flat):
            probe = policy.copy()
            probe.set_params_flat(flat)
            return float(np.mean(probe.log_prob(states, actions)))

        flat0 = policy.params_flat()
        numeric = np.zeros_like(flat0)
        h = 1e-5
        for i in range(len(flat0)):
            up, down = flat0.copy(), flat0.copy()
            up[i] += h
            down[i] -= h
            numeric[i] = (mean_log_prob(up) - mean_log_prob(down)) / (2 * h)
        rel = np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric)
        assert rel < 1e-4


class TestReturnsAndAdvantages:
    def test_single_step(self):
        assert discounted_returns(np.array([1.0]), 0.9)[0] == 1.0

    def test_three_constant_rewards(self):
        g = discounted_returns(np.ones(3), 0.5)
        assert g[0] == 1.75 and g[1] == 1.5 and g[2] == 1.0

    def test_recursion_equals_direct_sum(self):
        rng = np.random.default_rng(15)
        rewards = rng.normal(size=37)
        gamma = 0.97
        g = discounted_returns(rewards, gamma)
        for t in range(len(rewards)):
            direct = sum(gamma ** (i - t) * rewards[i] for i in range(t, len(rewards)))
            assert g[t] == pytest.approx(direct, abs=1e-12)

    def _random_trajectory(self, rng, length=20, state_dim=3, action_dim=1):
        states = rng.normal(size=(length + 1, state_dim))
        return Trajectory(states=states[:-1], actions=rng.normal(size=(length, action_dim)),
                          next_states=states[1:], rewards=rng.normal(size=length))

    def test_lambda_one_advantage_identity(self):
        rng = np.random.default_rng(16)
        trajs = [self._random_trajectory(rng) for _ in range(3)]
        value_fn = ValueFunction(3, hidden=(8,), rng=np.random.default_rng(17))
        gamma = 0.95
        batch = compute_returns_and_advantages(trajs, value_fn, gamma, lam=1.0)
        expected = batch.returns - value_fn.predict(batch.states)
        assert np.max(np.abs(batch.raw_advantages - expected)) < 1e-10

    def test_normalization(self):
        rng = np.random.default_rng(18)
        trajs = [self._random_trajectory(rng) for _ in range(2)]
        value_fn = ValueFunction(3, hidden=(8,), rng=np.random.default_rng(19))
        batch = compute_returns_and_advantages(trajs, value_fn, 0.9, 0.95)
        assert batch.advantages.mean() == pytest.approx(0.0, abs=1e-10)
        assert batch.advantages.std() == pytest.approx(1.0, abs=1e-10)

    def test_scaling_invariance(self):
        rng = np.random.default_rng(20)
        trajs = [self._random_trajectory(rng) for _ in range(2)]
        value_fn = ValueFunction(3, hidden=(8,), rng=np.random.default_rng(21))
        base = compute_returns_and_advantages(trajs, value_fn, 0.9, 0.95)
        scaled = [Trajectory(states=t.states, actions=t.actions, next_states=t.next_states,
                             rewards=t.rewards) for t in trajs]
        other = compute_returns_and_advantages(scaled, value_fn, 0.9, 0.95)
        # same inputs give the same normalization; scaling raw advantages by a
        # positive constant leaves the normalized values unchanged
        c = 3.7
        renormalized = (c * base.raw_advantages - (c * base.raw_advantages).mean()) \
            / (c * base.raw_advantages).std()
        assert np.max(np.abs(renormalized - base.advantages)) < 1e-10
        assert np.array_equal(base.advantages, other.advantages)


class TestTrpo:
    def test_zero_advantages_leave_policy(self):
        policy = make_policy(seed=22)
        rng = np.random.default_rng(23)
        states = rng.normal(size=(10, 3))
        actions = rng.normal(size=(10, 1))
        before = policy.params_flat()
        diag = trpo_update(policy, states, actions, np.zeros(10), AgentConfig())
        assert not diag["accepted"]
        assert np.array_equal(policy.params_flat(), before)

    def test_surrogate_gradient_is_vanilla_policy_gradient(self):
        policy = make_policy(seed=24, hidden=(8,))
        rng = np.random.default_rng(25)
        states = rng.normal(size=(8, 3))
        actions = rng.normal(size=(8, 1))
        advantages = rng.normal(size=8)
        old_lp = policy.log_prob(states, actions)
        _, grad = surrogate_and_grad(policy, states, actions, advantages, old_lp)
        # per-sample log-prob gradients accumulated by hand
        vanilla = np.zeros_like(grad)
        for i in range(8):
            _, gi = surrogate_and_grad(policy, states[i : i + 1], actions[i : i + 1],
                                       advantages[i : i + 1], old_lp[i : i + 1])
            vanilla += gi / 8.0
        assert np.max(np.abs(grad - vanilla)) < 1e-10

    def test_accepted_update_respects_trust_region(self):
        policy = make_policy(seed=26)
        config = AgentConfig()
        rng = np.random.default_rng(27)
        for _ in range(10):
            states = rng.normal(size=(32, 3))
            actions = policy.sample(states, rng)
            advantages = rng.normal(size=32)
            advantages = (advantages - advantages.mean()) / advantages.std()
            diag = trpo_update(policy, states, actions, advantages, config)
            if diag["accepted"]:
                assert diag["kl"] <= 1.5 * config.kl_delta + 1e-12
                assert diag["improvement"] >= 0.0

    def test_gaussian_bandit_converges(self):
        # single state, reward -(a - 2)^2: the mean should move to 2
        policy = make_policy(state_dim=1, action_dim=1, seed=28, hidden=(8,))
        config = AgentConfig()
        rng = np.random.default_rng(29)
        state = np.zeros((64, 1))
        for _ in range(100):
            actions = policy.sample(state, rng)
            rewards = -((actions[:, 0] - 2.0) ** 2)
            adv = (rewards - rewards.mean()) / max(rewards.std(), 1e-8)
            trpo_update(policy, state, actions, adv, config)
        assert abs(policy.mean_action(np.zeros(1))[0] - 2.0) < 0.2


class TestFitValue:
    def test_zero_targets(self):
        value_fn = ValueFunction(2, hidden=(16,), rng=np.random.default_rng(30))
        rng = np.random.default_rng(31)
        states = rng.normal(size=(100, 2))
        fit_value(value_fn, states, np.zeros(100), epochs=300, rng=rng, lr=1e-2)
        assert np.max(np.abs(value_fn.predict(states))) < 1e-2

    def test_epochs_zero_noop(self):
        value_fn = ValueFunction(2, hidden=(8,), rng=np.random.default_rng(32))
        before = value_fn.net.params_flat()
        fit_value(value_fn, np.zeros((5, 2)), np.ones(5), epochs=0,
                  rng=np.random.default_rng(33))
        assert np.array_equal(value_fn.net.params_flat(), before)

    def test_linear_target_realizable(self):
        env = make_env("lqr")
        rng = np.random.default_rng(34)
        states = np.array([env.reset(rng) for _ in range(300)])
        targets = 0.5 * states[:, 0] - 0.3 * states[:, 1] + 0.1
        value_fn = ValueFunction(2, hidden=(32, 32), rng=np.random.default_rng(35))
        final = fit_value(value_fn, states, targets, epochs=300, rng=rng, lr=1e-2)
        assert final < 1e-3


class TestCollectRollouts:
    def test_exactly_one_episode(self):
        env = make_env("lqr")
        trajs = collect_rollouts(env, UniformBehavior(env), env.spec.horizon,
                                 np.random.default_rng(36))
        assert len(trajs) == 1 and len(trajs[0]) == env.spec.horizon

    def test_trajectories_chain_and_respect_bounds(self):
        env = make_env("pendulum")
        policy = make_policy(seed=37)
        trajs = collect_rollouts(env, PolicyBehavior(policy), 600, np.random.default_rng(38))
        assert sum(len(t) for t in trajs) == 600
        for traj in trajs:
            traj.validate_chain()
            assert np.all(traj.actions >= env.spec.action_low)
            assert np.all(traj.actions <= env.spec.action_high)

    def test_uniform_action_mean(self):
        env = make_env("pendulum")
        trajs = collect_rollouts(env, UniformBehavior(env), 50_000,
                                 np.random.default_rng(39))
        actions = np.concatenate([t.actions for t in trajs])
        box_width = float(env.spec.action_high[0] - env.spec.action_low[0])
        sigma = box_width / np.sqrt(12.0) / np.sqrt(len(actions))
        assert abs(actions.mean()) < 3 * sigma

    def test_seeded_determinism(self):
        env = make_env("pointmass")
        t1 = collect_rollouts(env, UniformBehavior(env), 200, np.random.default_rng(40))
        t2 = collect_rollouts(env, UniformBehavior(env), 200, np.random.default_rng(40))
        for a, b in zip(t1, t2):
            assert np.array_equal(a.states, b.states)
            assert np.array_equal(a.rewards, b.rewards)
