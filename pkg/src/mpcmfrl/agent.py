"""Model-free learner: Gaussian policy, value function, GAE, and the
trust-region policy update.

The policy is a diagonal Gaussian: an MLP produces the mean, a single
state-independent log-std vector (clamped to [-5, 2]) the spread. The policy
update maximizes the importance-weighted surrogate mean(ratio * advantage)
under a mean-KL trust region, solved by conjugate gradient on the Fisher
system plus a halving line search. Fisher-vector products use the closed
form for diagonal Gaussians: J' diag(1/sigma^2) J for the mean network
(forward-mode J v, then reverse-mode J' u) and the constant 2 per log-std
coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import Env, Trajectory
from .errors import ConfigError
from .neuralnet import Adam, Mlp, mse_loss_and_grad

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


class GaussianPolicy:
    def __init__(self, state_dim: int, action_dim: int, hidden: tuple[int, ...] = (32, 32),
                 rng: np.random.Generator | None = None, init_log_std: float = 0.0):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.mean_net = Mlp([state_dim, *hidden, action_dim], rng=rng)
        # near-zero initial mean keeps early exploration centered
        self.mean_net.weights[-1] *= 0.01
        self.log_std = np.full(action_dim, float(np.clip(init_log_std, LOG_STD_MIN, LOG_STD_MAX)))

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)

    def mean_action(self, state: np.ndarray) -> np.ndarray:
        return self.mean_net.forward(state)

    def sample(self, state: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        mean = self.mean_net.forward(state)
        return mean + self.std * rng.standard_normal(mean.shape)

    def log_prob(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        mean = np.atleast_2d(self.mean_net.forward(states))
        actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
        z = (actions - mean) / self.std
        return -0.5 * np.sum(z * z, axis=-1) - np.sum(self.log_std) \
            - 0.5 * self.action_dim * np.log(2.0 * np.pi)

    # flat parameters: mean-net weights/biases then the log-std vector
    @property
    def n_params(self) -> int:
        return self.mean_net.n_params + self.action_dim

    def params_flat(self) -> np.ndarray:
        return np.concatenate([self.mean_net.params_flat(), self.log_std])

    def set_params_flat(self, flat: np.ndarray) -> None:
        self.mean_net.set_params_flat(flat[: self.mean_net.n_params])
        self.log_std = np.clip(flat[self.mean_net.n_params :], LOG_STD_MIN, LOG_STD_MAX)

    def copy(self) -> "GaussianPolicy":
        clone = GaussianPolicy.__new__(GaussianPolicy)
        clone.state_dim = self.state_dim
        clone.action_dim = self.action_dim
        clone.mean_net = self.mean_net.copy()
        clone.log_std = self.log_std.copy()
        return clone

    def to_dict(self) -> dict:
        return {"mean_net": self.mean_net.to_dict(), "log_std": self.log_std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianPolicy":
        net = Mlp.from_dict(data["mean_net"])
        policy = cls.__new__(cls)
        policy.state_dim = net.input_dim
        policy.action_dim = net.output_dim
        policy.mean_net = net
        policy.log_std = np.array(data["log_std"], dtype=np.float64)
        return policy


class ValueFunction:
    """State-value estimator; the net regresses normalized targets internally
    so return magnitudes far from unit scale fit quickly, while predictions
    stay in raw return units."""

    def __init__(self, state_dim: int, hidden: tuple[int, ...] = (32, 32),
                 rng: np.random.Generator | None = None):
        self.net = Mlp([state_dim, *hidden, 1], rng=rng)
        self.target_mean = 0.0
        self.target_std = 1.0

    def predict(self, states: np.ndarray) -> np.ndarray:
        out = self.net.forward(states)
        return out[..., 0] * self.target_std + self.target_mean

    def to_dict(self) -> dict:
        return {"net": self.net.to_dict(), "target_mean": self.target_mean,
                "target_std": self.target_std}

    @classmethod
    def from_dict(cls, data: dict) -> "ValueFunction":
        vf = cls.__new__(cls)
        vf.net = Mlp.from_dict(data["net"])
        vf.target_mean = data.get("target_mean", 0.0)
        vf.target_std = data.get("target_std", 1.0)
        return vf


@dataclass
class AgentConfig:
    gamma: float = 0.9
    lam: float = 0.95
    kl_delta: float = 0.01
    cg_iters: int = 10
    cg_damping: float = 0.1
    value_epochs: int = 10
    value_batch_size: int = 64
    value_lr: float = 1e-3
    episodes_per_iteration: int = 5

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("discount gamma must be in (0, 1)")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("GAE lambda must be in [0, 1]")
        if self.kl_delta <= 0.0:
            raise ConfigError("KL step must be positive")


@dataclass
class RolloutBatch:
    states: np.ndarray
    actions: np.ndarray
    returns: np.ndarray
    advantages: np.ndarray       # normalized to mean 0 / std 1
    raw_advantages: np.ndarray


def discounted_returns(rewards: np.ndarray, gamma: float) -> np.ndarray:
    """Backward recursion G_t = r_t + gamma G_{t+1} with G after the end = 0."""
    out = np.zeros_like(rewards, dtype=np.float64)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def compute_returns_and_advantages(
    trajectories: list[Trajectory], value_fn: ValueFunction, gamma: float, lam: float
) -> RolloutBatch:
    """Per-step returns and GAE(lambda) advantages, normalized across the batch.

    Episodes are fixed length; the value beyond the last step is treated as 0.
    """
    all_states, all_actions, all_returns, all_adv = [], [], [], []
    for traj in trajectories:
        rewards = traj.rewards.astype(np.float64)
        returns = discounted_returns(rewards, gamma)
        values = value_fn.predict(traj.states)
        next_values = np.concatenate([values[1:], [0.0]])
        deltas = rewards + gamma * next_values - values
        adv = np.zeros_like(deltas)
        acc = 0.0
        for t in range(len(deltas) - 1, -1, -1):
            acc = deltas[t] + gamma * lam * acc
            adv[t] = acc
        all_states.append(traj.states)
        all_actions.append(traj.behavior_actions)
        all_returns.append(returns)
        all_adv.append(adv)
    raw = np.concatenate(all_adv)
    normalized = (raw - raw.mean()) / max(raw.std(), 1e-8)
    return RolloutBatch(
        states=np.concatenate(all_states),
        actions=np.concatenate(all_actions),
        returns=np.concatenate(all_returns),
        advantages=normalized,
        raw_advantages=raw,
    )


def _gaussian_kl(mean_old, log_std_old, mean_new, log_std_new) -> float:
    """Mean over states of KL(old || new) for diagonal Gaussians."""
    var_old = np.exp(2.0 * log_std_old)
    var_new = np.exp(2.0 * log_std_new)
    per_dim = (log_std_new - log_std_old
               + (var_old + (mean_old - mean_new) ** 2) / (2.0 * var_new) - 0.5)
    return float(np.sum(per_dim) / mean_old.shape[0])


def _conjugate_gradient(fvp, b: np.ndarray, iters: int, tol: float = 1e-10) -> np.ndarray:
    x = np.zeros_like(b)
    r = b.copy()
    p = b.copy()
    r_dot = r @ r
    for _ in range(iters):
        if r_dot < tol:
            break
        Ap = fvp(p)
        alpha = r_dot / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        r_dot_new = r @ r
        p = r + (r_dot_new / r_dot) * p
        r_dot = r_dot_new
    return x


def surrogate_and_grad(
    policy: GaussianPolicy,
    states: np.ndarray,
    actions: np.ndarray,
    advantages: np.ndarray,
    old_log_probs: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Importance-weighted surrogate mean(ratio * A) and its parameter gradient."""
    n = states.shape[0]
    means, acts = policy.mean_net.forward_cached(states)
    std = policy.std
    z = (actions - means) / std
    log_probs = (-0.5 * np.sum(z * z, axis=-1) - np.sum(policy.log_std)
                 - 0.5 * policy.action_dim * np.log(2.0 * np.pi))
    ratio = np.exp(log_probs - old_log_probs)
    surrogate = float(np.mean(ratio * advantages))
    weight = (ratio * advantages / n)[:, None]
    mean_grads = policy.mean_net.backward(acts, weight * z / std)
    log_std_grad = np.sum(weight * (z * z - 1.0), axis=0)
    return surrogate, np.concatenate([Mlp.flatten_grads(mean_grads), log_std_grad])


def trpo_update(
    policy: GaussianPolicy,
    states: np.ndarray,
    actions: np.ndarray,
    advantages: np.ndarray,
    config: AgentConfig,
) -> dict:
    """One trust-region step; mutates the policy only when a step is accepted.

    Returns diagnostics: accepted flag, measured mean KL, surrogate
    improvement, step fraction, and gradient norm.
    """
    states = np.asarray(states, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)

    old_params = policy.params_flat()
    old_means, acts = policy.mean_net.forward_cached(states)
    old_log_std = policy.log_std.copy()
    old_log_probs = policy.log_prob(states, actions)
    n = states.shape[0]
    var_old = np.exp(2.0 * old_log_std)

    _, grad = surrogate_and_grad(policy, states, actions, advantages, old_log_probs)
    surrogate_old = float(np.mean(advantages))
    diagnostics = {"accepted": False, "kl": 0.0, "improvement": 0.0,
                   "step_fraction": 0.0, "grad_norm": float(np.linalg.norm(grad))}
    if diagnostics["grad_norm"] < 1e-12 or not np.all(np.isfinite(grad)):
        return diagnostics

    n_mean = policy.mean_net.n_params

    def fvp(v: np.ndarray) -> np.ndarray:
        jv = policy.mean_net.jvp(acts, v[:n_mean])
        mean_block = Mlp.flatten_grads(policy.mean_net.backward(acts, jv / var_old / n))
        log_std_block = 2.0 * v[n_mean:]
        return np.concatenate([mean_block, log_std_block]) + config.cg_damping * v

    direction = _conjugate_gradient(fvp, grad, config.cg_iters)
    shs = float(direction @ fvp(direction))
    if shs <= 0.0 or not np.isfinite(shs):
        return diagnostics
    full_step = np.sqrt(2.0 * config.kl_delta / shs) * direction

    for halving in range(10):
        frac = 0.5**halving
        policy.set_params_flat(old_params + frac * full_step)
        new_means = policy.mean_net.forward(states)
        kl = _gaussian_kl(old_means, old_log_std, new_means, policy.log_std)
        surrogate, _ = surrogate_and_grad(policy, states, actions, advantages, old_log_probs)
        improvement = surrogate - surrogate_old
        if (np.isfinite(kl) and np.isfinite(improvement)
                and kl <= 1.5 * config.kl_delta and improvement >= 0.0):
            diagnostics.update(accepted=True, kl=kl, improvement=improvement, step_fraction=frac)
            return diagnostics
    policy.set_params_flat(old_params)
    return diagnostics


def fit_value(
    value_fn: ValueFunction,
    states: np.ndarray,
    returns: np.ndarray,
    epochs: int,
    rng: np.random.Generator,
    batch_size: int = 64,
    optimizer: Adam | None = None,
    lr: float = 1e-3,
) -> float:
    """Adam MSE regression of V(s) onto empirical returns; returns final loss.

    The regression runs on targets standardized to the current batch's scale
    (stored on the value function), so the reported final loss is in raw
    return units while the optimization is well conditioned.
    """
    states = np.asarray(states, dtype=np.float64)
    raw_targets = np.asarray(returns, dtype=np.float64)[:, None]
    if states.shape[0] != raw_targets.shape[0]:
        raise ConfigError("states and returns must have equal length")
    if epochs == 0:
        loss, _ = mse_loss_and_grad(value_fn.predict(states)[:, None], raw_targets)
        return loss
    value_fn.target_mean = float(raw_targets.mean())
    value_fn.target_std = float(max(raw_targets.std(), 1e-8))
    targets = (raw_targets - value_fn.target_mean) / value_fn.target_std
    if optimizer is None:
        optimizer = Adam(value_fn.net.n_params, lr=lr)
    n = states.shape[0]
    steps_per_epoch = int(np.ceil(n / batch_size))
    for _ in range(epochs):
        for _ in range(steps_per_epoch):
            idx = rng.integers(0, n, size=min(batch_size, n))
            out, acts = value_fn.net.forward_cached(states[idx])
            _, d_out = mse_loss_and_grad(out, targets[idx])
            grads = Mlp.flatten_grads(value_fn.net.backward(acts, d_out))
            value_fn.net.set_params_flat(optimizer.step(value_fn.net.params_flat(), grads))
    final, _ = mse_loss_and_grad(value_fn.predict(states)[:, None], raw_targets)
    return final


class PolicyBehavior:
    """Collects with the stochastic Gaussian policy."""

    def __init__(self, policy: GaussianPolicy):
        self.policy = policy

    def act(self, state: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.policy.sample(state, rng)


class UniformBehavior:
    """Collects with i.i.d. uniform actions over the action box."""

    def __init__(self, env: Env):
        self.low = env.spec.action_low
        self.high = env.spec.action_high

    def act(self, state: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.low, self.high)


def collect_rollouts(env: Env, behavior, n_steps: int, rng: np.random.Generator) -> list[Trajectory]:
    """Run whole episodes until at least n_steps transitions are gathered.

    The recorded action is the clipped action actually applied by the env.
    """
    trajectories = []
    steps = 0
    while steps < n_steps:
        state = env.reset(rng)
        states, raw_actions, actions, next_states, rewards = [], [], [], [], []
        for _ in range(env.spec.horizon):
            raw = np.asarray(behavior.act(state, rng), dtype=np.float64)
            action = env.clip_action(raw)
            next_state, reward = env.step(state, action)
            states.append(state)
            raw_actions.append(raw)
            actions.append(action)
            next_states.append(next_state)
            rewards.append(reward)
            state = next_state
        trajectories.append(Trajectory(
            states=np.array(states), actions=np.array(actions),
            next_states=np.array(next_states), rewards=np.array(rewards),
            raw_actions=np.array(raw_actions)))
        steps += env.spec.horizon
    return trajectories
