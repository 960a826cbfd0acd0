"""Deterministic analytic control environments.

All four tasks have closed-form dynamics and rewards that are functions of
(state, action) only, so they can be evaluated on model-predicted states.
Dynamics and rewards are pure functions and accept either a single state
``(state_dim,)`` or a batch ``(n, state_dim)``; the batched and single-sample
code paths produce bit-identical floats (elementwise arithmetic only, plus
2-element dot products for the linear system).

Update equations (semi-implicit Euler: velocities first, then positions):

pendulum  (state = [cos th, sin th, thdot], torque u in [-2, 2], dt = 0.05)
    thdot' = clip(thdot + (3 g / (2 l) sin th + 3 / (m l^2) u) dt, -8, 8)
    d      = thdot' dt
    cos'   = cos th cos d - sin th sin d     (rotation by d)
    sin'   = sin th cos d + cos th sin d
    reward = -(th^2 + 0.1 thdot^2 + 0.001 u^2),  th = atan2(sin, cos)
    g = 10, m = 1, l = 1, episode length 200
    start: th = pi + U(-1, 1), thdot = U(-1, 1)  (hanging, swing-up required)

cartpole  (state = [x, xdot, th, thdot], force F in [-10, 10], dt = 0.02)
    tmp    = (F + mp l thdot^2 sin th) / (mc + mp)
    thacc  = (g sin th - cos th tmp) / (l (4/3 - mp cos^2 th / (mc + mp)))
    xacc   = tmp - mp l thacc cos th / (mc + mp)
    xdot'  = xdot + xacc dt;   x'  = x + xdot' dt
    thdot' = thdot + thacc dt; th' = th + thdot' dt
    reward = 1 - 0.05 |x|  if |th| <= 0.4 rad, else -10;  start: U(-0.05, 0.05)^4
    g = 9.8, mc = 1.0, mp = 0.1, l = 0.5 (half pole), episode length 200

pointmass (state = [px, py, vx, vy], accel a in [-1, 1]^2, dt = 0.05)
    v' = v + a dt;  p' = p + v' dt
    reward = -|p - goal|_2 - 0.01 |a|^2,  goal = (1, 1), episode length 100
    start: p = U(-0.1, 0.1)^2, v = 0

lqr       (state x in R^2, action a in [-2, 2], exact discrete time)
    x' = A x + B a,  A = [[1, 0.1], [0, 1]],  B = [[0.005], [0.1]]
    reward = -(x^T Q x + a^T Rc a),  Q = I, Rc = [[0.1]], episode length 50
    start x0 = (1, 0) plus U(-0.1, 0.1)^2 init noise (zero in exact mode)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError, UnsupportedOperationError


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    horizon: int

    def __post_init__(self):
        if not np.all(self.action_low < self.action_high):
            raise ConfigError(f"{self.name}: action_low must be < action_high elementwise")
        if self.horizon < 1:
            raise ConfigError(f"{self.name}: horizon must be >= 1")


@dataclass
class Trajectory:
    """One episode: arrays row-aligned so row i is the transition (s, a, s', r).

    ``actions`` holds what the environment executed (clipped to bounds);
    ``raw_actions``, when present, holds the behavior policy's samples before
    clipping, which is what likelihood-ratio policy updates must see.
    """

    states: np.ndarray       # (T, state_dim)
    actions: np.ndarray      # (T, action_dim), already clipped to bounds
    next_states: np.ndarray  # (T, state_dim)
    rewards: np.ndarray      # (T,)
    raw_actions: np.ndarray | None = None

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def behavior_actions(self) -> np.ndarray:
        return self.actions if self.raw_actions is None else self.raw_actions

    def validate_chain(self) -> None:
        if not np.array_equal(self.states[1:], self.next_states[:-1]):
            raise ValueError("trajectory transitions do not chain")

    @property
    def total_reward(self) -> float:
        return float(self.rewards.sum())


def _check_finite(name: str, *arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError(f"non-finite input to {name}")


class Env:
    """Base for stateless environments; subclasses implement _dynamics/_reward."""

    spec: EnvSpec

    def clip_action(self, action: np.ndarray) -> np.ndarray:
        return np.clip(action, self.spec.action_low, self.spec.action_high)

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def dynamics(self, state: np.ndarray, action: np.ndarray) -> np.ndarray:
        """True next state for raw (unclipped) actions; clips internally."""
        state = np.asarray(state, dtype=np.float64)
        action = np.asarray(action, dtype=np.float64)
        _check_finite(f"{self.spec.name}.dynamics", state, action)
        return self._dynamics(state, self.clip_action(action))

    def reward(self, state: np.ndarray, action: np.ndarray) -> np.ndarray:
        """Per-step reward for raw actions; the action is clipped as in step."""
        state = np.asarray(state, dtype=np.float64)
        action = np.asarray(action, dtype=np.float64)
        _check_finite(f"{self.spec.name}.reward", state, action)
        return self._reward(state, self.clip_action(action))

    def step(self, state: np.ndarray, action: np.ndarray) -> tuple[np.ndarray, float]:
        state = np.asarray(state, dtype=np.float64)
        action = np.asarray(action, dtype=np.float64)
        _check_finite(f"{self.spec.name}.step", state, action)
        a = self.clip_action(action)
        return self._dynamics(state, a), float(self._reward(state, a))

    def _dynamics(self, state, action):
        raise NotImplementedError

    def _reward(self, state, action):
        raise NotImplementedError


class PendulumEnv(Env):
    g = 10.0
    m = 1.0
    l = 1.0
    dt = 0.05
    max_speed = 8.0
    max_torque = 2.0

    def __init__(self):
        self.spec = EnvSpec(
            name="pendulum",
            state_dim=3,
            action_dim=1,
            action_low=np.array([-self.max_torque]),
            action_high=np.array([self.max_torque]),
            horizon=200,
        )

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        # swing-up task: episodes start hanging near the bottom, so reaching
        # the upright region requires deliberate energy pumping
        theta = np.pi + rng.uniform(-1.0, 1.0)
        theta_dot = rng.uniform(-1.0, 1.0)
        return np.array([np.cos(theta), np.sin(theta), theta_dot])

    def _dynamics(self, state, action):
        cos_t = state[..., 0]
        sin_t = state[..., 1]
        theta_dot = state[..., 2]
        u = action[..., 0]
        acc = 3.0 * self.g / (2.0 * self.l) * sin_t + 3.0 / (self.m * self.l**2) * u
        new_dot = np.clip(theta_dot + acc * self.dt, -self.max_speed, self.max_speed)
        d = new_dot * self.dt
        cos_d, sin_d = np.cos(d), np.sin(d)
        return np.stack(
            [cos_t * cos_d - sin_t * sin_d, sin_t * cos_d + cos_t * sin_d, new_dot],
            axis=-1,
        )

    def _reward(self, state, action):
        theta = np.arctan2(state[..., 1], state[..., 0])
        return -(theta**2 + 0.1 * state[..., 2] ** 2 + 0.001 * action[..., 0] ** 2)


class CartpoleEnv(Env):
    g = 9.8
    cart_mass = 1.0
    pole_mass = 0.1
    half_length = 0.5
    dt = 0.02
    force_mag = 10.0
    theta_limit = 0.4

    def __init__(self):
        self.spec = EnvSpec(
            name="cartpole",
            state_dim=4,
            action_dim=1,
            action_low=np.array([-self.force_mag]),
            action_high=np.array([self.force_mag]),
            horizon=200,
        )

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-0.05, 0.05, size=4)

    def _dynamics(self, state, action):
        x, x_dot = state[..., 0], state[..., 1]
        theta, theta_dot = state[..., 2], state[..., 3]
        force = action[..., 0]
        total_mass = self.cart_mass + self.pole_mass
        cos_t, sin_t = np.cos(theta), np.sin(theta)
        tmp = (force + self.pole_mass * self.half_length * theta_dot**2 * sin_t) / total_mass
        theta_acc = (self.g * sin_t - cos_t * tmp) / (
            self.half_length * (4.0 / 3.0 - self.pole_mass * cos_t**2 / total_mass)
        )
        x_acc = tmp - self.pole_mass * self.half_length * theta_acc * cos_t / total_mass
        new_x_dot = x_dot + x_acc * self.dt
        new_theta_dot = theta_dot + theta_acc * self.dt
        return np.stack(
            [x + new_x_dot * self.dt, new_x_dot, theta + new_theta_dot * self.dt, new_theta_dot],
            axis=-1,
        )

    def _reward(self, state, action):
        upright = np.abs(state[..., 2]) <= self.theta_limit
        return np.where(upright, 1.0 - 0.05 * np.abs(state[..., 0]), -10.0)


class PointmassEnv(Env):
    dt = 0.05
    goal = np.array([1.0, 1.0])

    def __init__(self):
        self.spec = EnvSpec(
            name="pointmass",
            state_dim=4,
            action_dim=2,
            action_low=np.array([-1.0, -1.0]),
            action_high=np.array([1.0, 1.0]),
            horizon=100,
        )

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        pos = rng.uniform(-0.1, 0.1, size=2)
        return np.array([pos[0], pos[1], 0.0, 0.0])

    def _dynamics(self, state, action):
        new_v = state[..., 2:4] + action * self.dt
        new_p = state[..., 0:2] + new_v * self.dt
        return np.concatenate([new_p, new_v], axis=-1)

    def _reward(self, state, action):
        dist = np.sqrt(np.sum((state[..., 0:2] - self.goal) ** 2, axis=-1))
        return -dist - 0.01 * np.sum(action**2, axis=-1)


class LqrEnv(Env):
    A = np.array([[1.0, 0.1], [0.0, 1.0]])
    B = np.array([[0.005], [0.1]])
    Q = np.eye(2)
    Rc = np.array([[0.1]])
    x0 = np.array([1.0, 0.0])

    def __init__(self, init_noise: float = 0.1):
        self.init_noise = init_noise
        self.spec = EnvSpec(
            name="lqr",
            state_dim=2,
            action_dim=1,
            action_low=np.array([-2.0]),
            action_high=np.array([2.0]),
            horizon=50,
        )

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        if self.init_noise == 0.0:
            return self.x0.copy()
        return self.x0 + rng.uniform(-self.init_noise, self.init_noise, size=2)

    def _dynamics(self, state, action):
        return state @ self.A.T + action @ self.B.T

    def _reward(self, state, action):
        xQx = np.sum((state @ self.Q) * state, axis=-1)
        aRa = np.sum((action @ self.Rc) * action, axis=-1)
        return -(xQx + aRa)


_ENVS = {
    "pendulum": PendulumEnv,
    "cartpole": CartpoleEnv,
    "pointmass": PointmassEnv,
    "lqr": LqrEnv,
}


def make_env(name: str, **kwargs) -> Env:
    try:
        cls = _ENVS[name]
    except KeyError:
        raise ConfigError(f"unknown environment {name!r}; choose from {sorted(_ENVS)}") from None
    return cls(**kwargs)


def reset(env_name: str, seed: int, **env_kwargs) -> np.ndarray:
    """Seeded initial state of a named environment (fresh rng per call)."""
    return make_env(env_name, **env_kwargs).reset(np.random.default_rng(seed))


def riccati_gain(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    gamma: float = 0.99,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> np.ndarray:
    """Discounted infinite-horizon LQR gain K (optimal action is -K x).

    Value iteration on the cost matrix P:
        K = gamma (R + gamma B'PB)^-1 B'PA
        P <- Q + K'RK + gamma (A - BK)' P (A - BK)
    until the sup-norm change in P is below ``tol``.
    """
    P = Q.copy()
    for _ in range(max_iter):
        BtPB = B.T @ P @ B
        K = gamma * np.linalg.solve(R + gamma * BtPB, B.T @ P @ A)
        Acl = A - B @ K
        P_next = Q + K.T @ R @ K + gamma * Acl.T @ P @ Acl
        if np.max(np.abs(P_next - P)) < tol:
            return gamma * np.linalg.solve(R + gamma * B.T @ P_next @ B, B.T @ P_next @ A)
        P = P_next
    raise RuntimeError("Riccati iteration did not converge")


def lqr_optimal_action(env: Env, state: np.ndarray, gamma: float = 0.99) -> np.ndarray:
    """Riccati-controller action for the linear task; errors on other envs."""
    if not isinstance(env, LqrEnv):
        raise UnsupportedOperationError("lqr_optimal_action requires the lqr environment")
    K = riccati_gain(env.A, env.B, env.Q, env.Rc, gamma=gamma)
    return -(K @ np.asarray(state, dtype=np.float64))
