"""Sampling-based receding-horizon planner.

Planning has three stages. Trajectory sampling rolls N candidate action
sequences through the forward model under a proposal distribution (uniform
box, the Gaussian policy evaluated at each simulated state, or an iteratively
refit CEM Gaussian). Trajectory evaluation scores each candidate as

    G = sum_{h=1}^{H} gamma^(h-1) R(s_h, a_h) + gamma^H terminal(s_H)

where the terminal value is read at the H-th visited state (the literal
transcription; set ``terminal_on_final_state`` to score the predicted state
after the last action instead). Action selection stable-sorts candidates by
score and averages the E best sequences; E=1 is classic greedy selection.
Only the first averaged action is returned and executed.

RNG draw order is part of the contract (it makes planning reproducible and
lets tests share streams): one batch of shape (N, action_dim) per planning
step, uniform values for the box proposal, standard normals for the policy
proposal; CEM draws one (population, H * action_dim) normal batch per
iteration.

Candidates whose model rollout turns non-finite are frozen at the last
finite state and scored with the sentinel -1e9 so planning always returns an
action.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .agent import GaussianPolicy, ValueFunction
from .errors import ConfigError, StateError

NONFINITE_SCORE = -1e9


class UniformStrategy:
    """i.i.d. uniform proposals over the action box."""


@dataclass
class PolicyStrategy:
    """Proposals sampled from a Gaussian policy at each simulated state."""

    policy: GaussianPolicy


@dataclass
class CemStrategy:
    """Cross-entropy refinement of a diagonal Gaussian over action sequences."""

    population: int = 200
    elite_frac: float = 0.1
    iterations: int = 5
    alpha: float = 0.25
    init_std: float | None = None  # None: half the box width per dimension

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("CEM needs at least one iteration")
        if not 0.0 < self.elite_frac <= 1.0:
            raise ConfigError("CEM elite fraction must be in (0, 1]")


class ZeroTerminal:
    def __call__(self, states: np.ndarray) -> np.ndarray:
        return np.zeros(states.shape[:-1])


@dataclass
class ValueTerminal:
    value_fn: ValueFunction

    def __call__(self, states: np.ndarray) -> np.ndarray:
        return self.value_fn.predict(states)


@dataclass
class PlannerConfig:
    n_trajectories: int
    horizon: int
    top_e: int
    gamma: float
    strategy: object
    terminal: Callable[[np.ndarray], np.ndarray]
    reward_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    action_low: np.ndarray
    action_high: np.ndarray
    terminal_on_final_state: bool = False

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("planning horizon must be >= 1")
        if not 1 <= self.top_e <= self.n_trajectories:
            raise ConfigError("top-E must satisfy 1 <= E <= N")


@dataclass
class TrajectoryBatch:
    """A set of simulated trajectories sharing the same start state."""

    states: np.ndarray    # (N, H+1, state_dim); row h is the state before action h
    actions: np.ndarray   # (N, H, action_dim), clipped
    invalid: np.ndarray   # (N,) bool: rollout hit a non-finite prediction
    scores: np.ndarray | None = None

    def __len__(self) -> int:
        return self.states.shape[0]

    def trajectory(self, i: int) -> "SimulatedTrajectory":
        score = float("nan") if self.scores is None else float(self.scores[i])
        return SimulatedTrajectory(states=self.states[i], actions=self.actions[i],
                                   score=score)


class SimulatedTrajectory(NamedTuple):
    states: np.ndarray   # (H+1, state_dim), first row is the planner's start state
    actions: np.ndarray  # (H, action_dim)
    score: float


def _rollout(model, start: np.ndarray, sample_step, horizon: int,
             low: np.ndarray, high: np.ndarray) -> TrajectoryBatch:
    """Advance all candidates one sampled action at a time through the model."""
    n = sample_step.n
    state_dim = start.shape[-1]
    states = np.empty((n, horizon + 1, state_dim))
    actions = np.empty((n, horizon, len(low)))
    states[:, 0, :] = start
    invalid = np.zeros(n, dtype=bool)
    current = np.broadcast_to(start, (n, state_dim)).copy()
    for h in range(horizon):
        act = np.clip(sample_step(current, h), low, high)
        actions[:, h, :] = act
        nxt = model.predict(current, act)
        bad = ~np.all(np.isfinite(nxt), axis=-1)
        if bad.any():
            nxt = np.where(bad[:, None], current, nxt)
            invalid |= bad
        states[:, h + 1, :] = nxt
        current = nxt
    return TrajectoryBatch(states=states, actions=actions, invalid=invalid)


class _UniformSampler:
    def __init__(self, n, low, high, rng):
        self.n = n
        self.low = low
        self.high = high
        self.rng = rng

    def __call__(self, current_states, h):
        return self.rng.uniform(self.low, self.high, size=(self.n, len(self.low)))


class _PolicySampler:
    def __init__(self, n, policy, rng):
        self.n = n
        self.policy = policy
        self.rng = rng

    def __call__(self, current_states, h):
        means = self.policy.mean_net.forward(current_states)
        return means + self.policy.std * self.rng.standard_normal(means.shape)


def sample_trajectories(model, state: np.ndarray, config: PlannerConfig,
                        rng: np.random.Generator) -> TrajectoryBatch:
    """Simulate N candidate trajectories from ``state`` under the proposal."""
    state = np.asarray(state, dtype=np.float64)
    if isinstance(config.strategy, UniformStrategy):
        sampler = _UniformSampler(config.n_trajectories, config.action_low,
                                  config.action_high, rng)
    elif isinstance(config.strategy, PolicyStrategy):
        sampler = _PolicySampler(config.n_trajectories, config.strategy.policy, rng)
    else:
        raise ConfigError(f"sample_trajectories cannot use {type(config.strategy).__name__}")
    return _rollout(model, state, sampler, config.horizon,
                    config.action_low, config.action_high)


def evaluate_trajectories(batch: TrajectoryBatch, reward_fn, terminal,
                          gamma: float, terminal_on_final_state: bool = False) -> np.ndarray:
    """Discounted rollout scores per Eq. above; sentinel for invalid rollouts."""
    horizon = batch.actions.shape[1]
    discounts = gamma ** np.arange(horizon)
    rewards = reward_fn(batch.states[:, :horizon, :], batch.actions)
    scores = rewards @ discounts
    terminal_states = batch.states[:, horizon if terminal_on_final_state else horizon - 1, :]
    scores = scores + gamma**horizon * terminal(terminal_states)
    return np.where(batch.invalid, NONFINITE_SCORE, scores)


def evaluate_trajectory(states: np.ndarray, actions: np.ndarray, reward_fn, terminal,
                        gamma: float, terminal_on_final_state: bool = False) -> float:
    """Score a single trajectory (states (H+1, d), actions (H, k))."""
    batch = TrajectoryBatch(states=states[None], actions=actions[None],
                            invalid=np.zeros(1, dtype=bool))
    return float(evaluate_trajectories(batch, reward_fn, terminal, gamma,
                                       terminal_on_final_state)[0])


def select_action_greedy(batch: TrajectoryBatch) -> np.ndarray:
    """Action sequence of the best-scoring trajectory (first index on ties)."""
    if batch.scores is None or len(batch) == 0:
        raise StateError("selection requires a nonempty, scored trajectory set")
    return batch.actions[int(np.argmax(batch.scores))].copy()


def select_action_soft_greedy(batch: TrajectoryBatch, top_e: int) -> np.ndarray:
    """Elementwise mean of the E best action sequences (stable score order)."""
    if batch.scores is None or len(batch) == 0:
        raise StateError("selection requires a nonempty, scored trajectory set")
    if not 1 <= top_e <= len(batch):
        raise ConfigError(f"top-E must be in [1, {len(batch)}], got {top_e}")
    order = np.argsort(-batch.scores, kind="stable")
    if top_e == 1:
        return batch.actions[order[0]].copy()
    return batch.actions[order[:top_e]].mean(axis=0)


class CemResult(NamedTuple):
    population: TrajectoryBatch
    mean: np.ndarray  # final refit mean over the flat action sequence
    std: np.ndarray


def cem_refine(model, state: np.ndarray, config: PlannerConfig,
               rng: np.random.Generator) -> CemResult:
    """Iteratively refit a diagonal Gaussian over flat action sequences.

    Each iteration samples a population, scores it, and pulls mean/std toward
    the elite statistics with smoothing ``alpha * elite + (1 - alpha) * old``.
    Returns the last iteration's scored population plus the refit distribution.
    """
    cem: CemStrategy = config.strategy
    if not isinstance(cem, CemStrategy):
        raise ConfigError("cem_refine requires a CemStrategy")
    state = np.asarray(state, dtype=np.float64)
    horizon, adim = config.horizon, len(config.action_low)
    flat_low = np.tile(config.action_low, horizon)
    flat_high = np.tile(config.action_high, horizon)
    mean = (flat_low + flat_high) / 2.0
    std = (np.full(horizon * adim, cem.init_std) if cem.init_std is not None
           else (flat_high - flat_low) / 2.0)
    n_elite = max(1, int(round(cem.population * cem.elite_frac)))

    batch = None
    for _ in range(cem.iterations):
        flat = mean + std * rng.standard_normal((cem.population, horizon * adim))
        flat = np.clip(flat, flat_low, flat_high)
        seqs = flat.reshape(cem.population, horizon, adim)
        batch = _rollout_fixed_actions(model, state, seqs)
        batch.scores = evaluate_trajectories(batch, config.reward_fn, config.terminal,
                                             config.gamma, config.terminal_on_final_state)
        order = np.argsort(-batch.scores, kind="stable")
        elites = flat[order[:n_elite]]
        mean = cem.alpha * elites.mean(axis=0) + (1.0 - cem.alpha) * mean
        std = np.maximum(cem.alpha * elites.std(axis=0) + (1.0 - cem.alpha) * std, 1e-3)
    return CemResult(population=batch, mean=mean, std=std)


def _rollout_fixed_actions(model, start: np.ndarray, seqs: np.ndarray) -> TrajectoryBatch:
    n, horizon, _ = seqs.shape
    state_dim = start.shape[-1]
    states = np.empty((n, horizon + 1, state_dim))
    states[:, 0, :] = start
    invalid = np.zeros(n, dtype=bool)
    current = np.broadcast_to(start, (n, state_dim)).copy()
    for h in range(horizon):
        nxt = model.predict(current, seqs[:, h, :])
        bad = ~np.all(np.isfinite(nxt), axis=-1)
        if bad.any():
            nxt = np.where(bad[:, None], current, nxt)
            invalid |= bad
        states[:, h + 1, :] = nxt
        current = nxt
    return TrajectoryBatch(states=states, actions=seqs, invalid=invalid)


def plan(model, state: np.ndarray, config: PlannerConfig,
         rng: np.random.Generator) -> np.ndarray:
    """Full planning step; returns the first action of the selected sequence."""
    if isinstance(config.strategy, CemStrategy):
        batch = cem_refine(model, state, config, rng).population
    else:
        batch = sample_trajectories(model, state, config, rng)
        batch.scores = evaluate_trajectories(batch, config.reward_fn, config.terminal,
                                             config.gamma, config.terminal_on_final_state)
    sequence = select_action_soft_greedy(batch, config.top_e)
    return np.clip(sequence[0], config.action_low, config.action_high)
