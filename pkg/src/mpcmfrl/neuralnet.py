"""Dense feed-forward networks with hand-written gradients.

Everything is float64 numpy: tanh hidden layers, identity output, explicit
reverse-mode gradients, a forward-mode directional derivative (needed for
Fisher-vector products), and bias-corrected Adam. No autodiff dependency so
every gradient can be checked against finite differences.

Checkpoint format: JSON object ``{"sizes": [...], "weights": [[row-major
floats] per layer], "biases": [[floats] per layer]}``. Python's JSON float
encoding round-trips float64 exactly.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import NumericError, ShapeError


class Mlp:
    """Fully connected net: tanh on hidden layers, identity on the output."""

    def __init__(self, sizes: list[int], rng: np.random.Generator | None = None,
                 gain: float = 1.0):
        if len(sizes) < 2:
            raise ShapeError("Mlp needs at least input and output sizes")
        self.sizes = list(sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                bound = gain / np.sqrt(fan_in)
                w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @property
    def input_dim(self) -> int:
        return self.sizes[0]

    @property
    def output_dim(self) -> int:
        return self.sizes[-1]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def _as_batch(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return x[None, :], True
        return x, False

    def forward(self, x: np.ndarray) -> np.ndarray:
        xb, squeeze = self._as_batch(x)
        if xb.shape[1] != self.input_dim:
            raise ShapeError(f"expected input width {self.input_dim}, got {xb.shape[1]}")
        h = xb
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
        return h[0] if squeeze else h

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Batch forward returning the per-layer inputs needed by backward."""
        xb, _ = self._as_batch(x)
        if xb.shape[1] != self.input_dim:
            raise ShapeError(f"expected input width {self.input_dim}, got {xb.shape[1]}")
        acts = [xb]
        h = xb
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
                acts.append(h)
        return h, acts

    def backward(self, acts: list[np.ndarray], grad_out: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Gradients of sum_i <grad_out_i, y_i> w.r.t. every weight and bias."""
        grad_out = np.asarray(grad_out, dtype=np.float64)
        if grad_out.ndim == 1:
            grad_out = grad_out[None, :]
        if grad_out.shape != (acts[0].shape[0], self.output_dim):
            raise ShapeError("grad_out does not match the forward output shape")
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.weights)
        g = grad_out
        for i in range(len(self.weights) - 1, -1, -1):
            a = acts[i]
            grads[i] = (a.T @ g, g.sum(axis=0))
            if i > 0:
                g = (g @ self.weights[i].T) * (1.0 - a * a)
        return grads

    def jvp(self, acts: list[np.ndarray], direction: np.ndarray) -> np.ndarray:
        """Directional derivative of the batch output along a flat param direction."""
        dws, dbs = self.unflatten(direction)
        r = np.zeros_like(acts[0])
        last = len(self.weights) - 1
        for i in range(len(self.weights)):
            r = r @ self.weights[i] + acts[i] @ dws[i] + dbs[i]
            if i < last:
                r = r * (1.0 - acts[i + 1] * acts[i + 1])
        return r

    # flat parameter vector: per layer, row-major weights then bias
    def params_flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def set_params_flat(self, flat: np.ndarray) -> None:
        ws, bs = self.unflatten(flat)
        self.weights = ws
        self.biases = bs

    def unflatten(self, flat: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_params,):
            raise ShapeError(f"expected flat vector of length {self.n_params}")
        ws, bs, k = [], [], 0
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            ws.append(flat[k : k + fan_in * fan_out].reshape(fan_in, fan_out).copy())
            k += fan_in * fan_out
            bs.append(flat[k : k + fan_out].copy())
            k += fan_out
        return ws, bs

    @staticmethod
    def flatten_grads(grads: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
        return np.concatenate([np.concatenate([dw.ravel(), db]) for dw, db in grads])

    def copy(self) -> "Mlp":
        clone = Mlp(self.sizes)
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def to_dict(self) -> dict:
        return {
            "sizes": self.sizes,
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Mlp":
        net = cls(data["sizes"])
        for i, (fan_in, fan_out) in enumerate(zip(net.sizes[:-1], net.sizes[1:])):
            net.weights[i] = np.array(data["weights"][i], dtype=np.float64).reshape(fan_in, fan_out)
            net.biases[i] = np.array(data["biases"][i], dtype=np.float64)
        return net

    def save(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path: str) -> "Mlp":
        with open(path) as f:
            return cls.from_dict(json.load(f))


class Adam:
    """Bias-corrected Adam on a flat parameter vector."""

    def __init__(self, n_params: int, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        grads = np.asarray(grads, dtype=np.float64)
        if grads.shape != self.m.shape:
            raise ShapeError("gradient shape does not match optimizer state")
        if not np.all(np.isfinite(grads)):
            raise NumericError("non-finite gradient; update rejected")
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grads * grads
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self) -> dict:
        return {"m": self.m.tolist(), "v": self.v.tolist(), "t": self.t,
                "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}

    @classmethod
    def from_state_dict(cls, data: dict) -> "Adam":
        opt = cls(len(data["m"]), lr=data["lr"], beta1=data["beta1"],
                  beta2=data["beta2"], eps=data["eps"])
        opt.m = np.array(data["m"], dtype=np.float64)
        opt.v = np.array(data["v"], dtype=np.float64)
        opt.t = data["t"]
        return opt


def mse_loss_and_grad(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over the batch of squared error norms, with d(loss)/d(pred)."""
    pred = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    if pred.shape != target.shape:
        raise ShapeError("prediction and target shapes differ")
    diff = pred - target
    loss = float(np.sum(diff * diff) / pred.shape[0])
    return loss, 2.0 * diff / pred.shape[0]


def gaussian_nll_and_grads(
    mean: np.ndarray, log_std: np.ndarray, x: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean diagonal-Gaussian negative log-likelihood and its gradients.

    Returns (nll, d nll/d mean, d nll/d log_std); log_std is shared across the
    batch, so its gradient is averaged over samples.
    """
    mean = np.atleast_2d(np.asarray(mean, dtype=np.float64))
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if mean.shape != x.shape:
        raise ShapeError("mean and sample shapes differ")
    std = np.exp(log_std)
    z = (x - mean) / std
    n = mean.shape[0]
    nll = float(np.sum(0.5 * z * z + log_std + 0.5 * np.log(2.0 * np.pi)) / n)
    d_mean = -z / std / n
    d_log_std = np.sum(1.0 - z * z, axis=0) / n
    return nll, d_mean, d_log_std
