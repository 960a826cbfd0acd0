"""Learned forward dynamics: dataset, normalization, training, prediction.

The model maps normalized (state, action) to a normalized state delta by
default (``mode="delta"``); ``mode="absolute"`` predicts the normalized next
state directly. The training loss is always computed in raw state units:
mean over the batch of the squared error norm between the predicted and the
true next state.

Datasets persist as CSV, one transition per row:
``s_0..s_{d-1}, a_0..a_{k-1}, ns_0..ns_{d-1}, reward`` with full float64
round-trip precision.
"""

from __future__ import annotations

import copy
import csv

import numpy as np

from .envs import Trajectory
from .errors import NumericError, StateError
from .neuralnet import Adam, Mlp, mse_loss_and_grad

STD_FLOOR = 1e-6


class TransitionDataset:
    """Append-only store of (state, action, next_state, reward) rows."""

    def __init__(self, state_dim: int, action_dim: int):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self._states: list[np.ndarray] = []
        self._actions: list[np.ndarray] = []
        self._next_states: list[np.ndarray] = []
        self._rewards: list[float] = []

    def __len__(self) -> int:
        return len(self._states)

    def append(self, traj: Trajectory) -> None:
        for i in range(len(traj)):
            self._states.append(traj.states[i])
            self._actions.append(traj.actions[i])
            self._next_states.append(traj.next_states[i])
            self._rewards.append(float(traj.rewards[i]))

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        if not self._states:
            raise StateError("dataset is empty")
        return (
            np.array(self._states),
            np.array(self._actions),
            np.array(self._next_states),
            np.array(self._rewards),
        )

    def save_csv(self, path: str) -> None:
        header = (
            [f"s{i}" for i in range(self.state_dim)]
            + [f"a{i}" for i in range(self.action_dim)]
            + [f"ns{i}" for i in range(self.state_dim)]
            + ["reward"]
        )
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for s, a, ns, r in zip(self._states, self._actions, self._next_states, self._rewards):
                writer.writerow([repr(float(v)) for v in (*s, *a, *ns, r)])

    @classmethod
    def load_csv(cls, path: str, state_dim: int, action_dim: int) -> "TransitionDataset":
        ds = cls(state_dim, action_dim)
        with open(path, newline="") as f:
            reader = csv.reader(f)
            next(reader)  # header
            for row in reader:
                vals = [float(v) for v in row]
                ds._states.append(np.array(vals[:state_dim]))
                ds._actions.append(np.array(vals[state_dim : state_dim + action_dim]))
                ds._next_states.append(np.array(vals[state_dim + action_dim : 2 * state_dim + action_dim]))
                ds._rewards.append(vals[-1])
        return ds


def sample_batch(
    dataset: TransitionDataset, batch_size: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Uniform-with-replacement minibatch of (states, actions, next_states)."""
    if len(dataset) == 0:
        raise StateError("cannot sample from an empty dataset")
    s, a, ns, _ = dataset.arrays()
    idx = rng.integers(0, len(dataset), size=batch_size)
    return s[idx], a[idx], ns[idx]


class Normalizer:
    """Per-dimension mean/std for states, actions, and state deltas."""

    def __init__(self, state_dim: int, action_dim: int):
        self.state_mean = np.zeros(state_dim)
        self.state_std = np.ones(state_dim)
        self.action_mean = np.zeros(action_dim)
        self.action_std = np.ones(action_dim)
        self.delta_mean = np.zeros(state_dim)
        self.delta_std = np.ones(state_dim)

    def fit(self, states: np.ndarray, actions: np.ndarray, next_states: np.ndarray) -> None:
        deltas = next_states - states
        self.state_mean = states.mean(axis=0)
        self.state_std = np.maximum(states.std(axis=0), STD_FLOOR)
        self.action_mean = actions.mean(axis=0)
        self.action_std = np.maximum(actions.std(axis=0), STD_FLOOR)
        self.delta_mean = deltas.mean(axis=0)
        self.delta_std = np.maximum(deltas.std(axis=0), STD_FLOOR)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in (
            "state_mean", "state_std", "action_mean", "action_std", "delta_mean", "delta_std")}

    @classmethod
    def from_dict(cls, data: dict) -> "Normalizer":
        norm = cls(len(data["state_mean"]), len(data["action_mean"]))
        for k, v in data.items():
            setattr(norm, k, np.array(v, dtype=np.float64))
        return norm


class DynamicsModel:
    """MLP forward model over normalized inputs, exposed in raw units."""

    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        hidden: tuple[int, ...] = (64, 64),
        mode: str = "delta",
        action_low: np.ndarray | None = None,
        action_high: np.ndarray | None = None,
        rng: np.random.Generator | None = None,
    ):
        if mode not in ("delta", "absolute"):
            raise ValueError(f"unknown prediction mode {mode!r}")
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.mode = mode
        self.net = Mlp([state_dim + action_dim, *hidden, state_dim], rng=rng)
        self.normalizer = Normalizer(state_dim, action_dim)
        self.action_low = None if action_low is None else np.asarray(action_low, dtype=np.float64)
        self.action_high = None if action_high is None else np.asarray(action_high, dtype=np.float64)

    def _clip(self, actions: np.ndarray) -> np.ndarray:
        if self.action_low is None:
            return actions
        return np.clip(actions, self.action_low, self.action_high)

    def _net_input(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        norm = self.normalizer
        s = (states - norm.state_mean) / norm.state_std
        a = (actions - norm.action_mean) / norm.action_std
        return np.concatenate([s, a], axis=-1)

    def _compose(self, states: np.ndarray, net_out: np.ndarray) -> np.ndarray:
        norm = self.normalizer
        if self.mode == "delta":
            return states + net_out * norm.delta_std + norm.delta_mean
        return net_out * norm.state_std + norm.state_mean

    def _output_scale(self) -> np.ndarray:
        return self.normalizer.delta_std if self.mode == "delta" else self.normalizer.state_std

    def predict(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Single-step prediction in raw units; actions are clipped first."""
        states = np.asarray(states, dtype=np.float64)
        actions = self._clip(np.asarray(actions, dtype=np.float64))
        return self._compose(states, self.net.forward(self._net_input(states, actions)))

    def frozen(self) -> "FrozenDynamicsModel":
        """Immutable planning snapshot with the affine normalization maps
        folded into the first and last layers (same predictions to float
        rounding, roughly half the per-call cost)."""
        return FrozenDynamicsModel(self)

    def loss_and_grads(
        self, states: np.ndarray, actions: np.ndarray, next_states: np.ndarray
    ) -> tuple[float, np.ndarray]:
        """Raw-space squared-error loss and its flat parameter gradient."""
        actions = self._clip(np.asarray(actions, dtype=np.float64))
        out, acts = self.net.forward_cached(self._net_input(states, actions))
        pred = self._compose(states, out)
        loss, d_pred = mse_loss_and_grad(pred, next_states)
        grads = self.net.backward(acts, d_pred * self._output_scale())
        return loss, Mlp.flatten_grads(grads)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "net": self.net.to_dict(),
            "normalizer": self.normalizer.to_dict(),
            "action_low": None if self.action_low is None else self.action_low.tolist(),
            "action_high": None if self.action_high is None else self.action_high.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DynamicsModel":
        net = Mlp.from_dict(data["net"])
        state_dim = net.output_dim
        action_dim = net.input_dim - state_dim
        model = cls(state_dim, action_dim, hidden=tuple(net.sizes[1:-1]), mode=data["mode"])
        model.net = net
        model.normalizer = Normalizer.from_dict(data["normalizer"])
        if data["action_low"] is not None:
            model.action_low = np.array(data["action_low"], dtype=np.float64)
            model.action_high = np.array(data["action_high"], dtype=np.float64)
        return model


class FrozenDynamicsModel:
    """Copied parameters with normalization pre-folded into the weights.

    Built once per planning session; many planner workers may call predict
    concurrently since nothing here mutates.
    """

    def __init__(self, model: DynamicsModel):
        norm = model.normalizer
        net = model.net
        self.mode = model.mode
        self.action_low = model.action_low
        self.action_high = model.action_high
        if len(net.weights) == 1:  # degenerate linear model: keep plain form
            self._plain = copy.deepcopy(model).predict
            self.weights = None
            return
        self._plain = None
        scale = norm.delta_std if model.mode == "delta" else norm.state_std
        self.w_state = net.weights[0][: model.state_dim] / norm.state_std[:, None]
        self.w_action = net.weights[0][model.state_dim :] / norm.action_std[:, None]
        self.bias0 = (net.biases[0]
                      - (norm.state_mean / norm.state_std) @ net.weights[0][: model.state_dim]
                      - (norm.action_mean / norm.action_std) @ net.weights[0][model.state_dim :])
        self.weights = [w.copy() for w in net.weights[1:-1]]
        self.biases = [b.copy() for b in net.biases[1:-1]]
        self.w_out = net.weights[-1] * scale
        self.b_out = net.biases[-1] * scale + (norm.delta_mean if model.mode == "delta"
                                               else norm.state_mean)

    def predict(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        if self.action_low is not None:
            actions = np.clip(actions, self.action_low, self.action_high)
        if self.weights is None:
            return self._plain(states, actions)
        h = states @ self.w_state + actions @ self.w_action + self.bias0
        for w, b in zip(self.weights, self.biases):
            h = np.tanh(h) @ w + b
        out = np.tanh(h) @ self.w_out + self.b_out
        return states + out if self.mode == "delta" else out


class TrueDynamicsModel:
    """Adapter exposing an environment's exact dynamics as a planning model."""

    def __init__(self, env):
        self.env = env

    def predict(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return self.env.dynamics(states, actions)

    def frozen(self) -> "TrueDynamicsModel":
        return self


def dynamics_loss(
    model: DynamicsModel, states: np.ndarray, actions: np.ndarray, next_states: np.ndarray
) -> float:
    """Mean squared prediction-error norm over the batch, in raw state units."""
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    next_states = np.atleast_2d(np.asarray(next_states, dtype=np.float64))
    actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
    if states.shape[0] == 0:
        raise StateError("empty batch")
    pred = model.predict(states, actions)
    diff = pred - next_states
    return float(np.sum(diff * diff) / states.shape[0])


def held_out_error(model: DynamicsModel, test_set: TransitionDataset) -> float:
    """Mean squared single-step prediction error on a fixed test set."""
    if len(test_set) == 0:
        raise StateError("empty test set")
    s, a, ns, _ = test_set.arrays()
    return dynamics_loss(model, s, a, ns)


def train_model(
    model: DynamicsModel,
    dataset: TransitionDataset,
    epochs: int,
    batch_size: int,
    rng: np.random.Generator,
    optimizer: Adam | None = None,
    lr: float = 1e-3,
    max_steps: int | None = None,
) -> dict:
    """Refit normalization, then run minibatch Adam on the squared-error loss.

    Shuffles the dataset and holds out the last 10% for per-epoch scoring.
    Runs ``epochs`` passes of ceil(n_train / batch_size) steps, truncated at
    ``max_steps`` total Adam updates when given. A non-finite loss or gradient
    aborts training and restores the last end-of-epoch parameters.
    """
    if len(dataset) == 0:
        raise StateError("cannot train on an empty dataset")
    report = {"train_loss": [], "holdout_loss": []}
    if epochs == 0:
        return report

    s, a, ns, _ = dataset.arrays()
    model.normalizer.fit(s, a, ns)
    perm = rng.permutation(len(dataset))
    n_holdout = len(dataset) // 10
    train_idx = perm[: len(dataset) - n_holdout] if n_holdout else perm
    hold_idx = perm[len(dataset) - n_holdout :] if n_holdout else None
    st, at, nst = s[train_idx], a[train_idx], ns[train_idx]

    if optimizer is None:
        optimizer = Adam(model.net.n_params, lr=lr)
    steps_per_epoch = int(np.ceil(len(train_idx) / batch_size))
    total_steps = 0
    for _ in range(epochs):
        snapshot = model.net.params_flat()
        epoch_losses = []
        try:
            for _ in range(steps_per_epoch):
                if max_steps is not None and total_steps >= max_steps:
                    break
                idx = rng.integers(0, len(train_idx), size=batch_size)
                loss, grads = model.loss_and_grads(st[idx], at[idx], nst[idx])
                if not np.isfinite(loss):
                    raise NumericError("non-finite training loss")
                model.net.set_params_flat(optimizer.step(model.net.params_flat(), grads))
                epoch_losses.append(loss)
                total_steps += 1
        except NumericError:
            model.net.set_params_flat(snapshot)
            break
        if not epoch_losses:
            break
        report["train_loss"].append(float(np.mean(epoch_losses)))
        if hold_idx is not None:
            report["holdout_loss"].append(dynamics_loss(model, s[hold_idx], a[hold_idx], ns[hold_idx]))
        else:
            report["holdout_loss"].append(None)
        if max_steps is not None and total_steps >= max_steps:
            break
    return report
