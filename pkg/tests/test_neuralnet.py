"""Network stack: forward/backward correctness against finite differences,
Adam behavior, and checkpoint round-trips."""

import numpy as np
import pytest

from mpcmfrl.errors import NumericError, ShapeError
from mpcmfrl.neuralnet import Adam, Mlp, gaussian_nll_and_grads, mse_loss_and_grad


def finite_difference_grad(f, x0, h=1e-5):
    grad = np.zeros_like(x0)
    for i in range(len(x0)):
        up, down = x0.copy(), x0.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (f(up) - f(down)) / (2 * h)
    return grad


def relative_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)


def test_zero_init_forward_is_zero():
    net = Mlp([3, 8, 2])
    x = np.random.default_rng(0).normal(size=(5, 3))
    assert np.array_equal(net.forward(x), np.zeros((5, 2)))


def test_single_linear_layer_identity():
    net = Mlp([4, 4])
    net.weights[0] = np.eye(4)
    x = np.random.default_rng(1).normal(size=(6, 4))
    assert np.array_equal(net.forward(x), x)


def test_forward_matches_manual_recompute():
    rng = np.random.default_rng(2)
    net = Mlp([2, 2, 2], rng=rng)
    x = rng.normal(size=(3, 2))
    manual = np.empty((3, 2))
    for i in range(3):
        h = np.empty(2)
        for j in range(2):
            h[j] = np.tanh(x[i, 0] * net.weights[0][0, j]
                           + x[i, 1] * net.weights[0][1, j] + net.biases[0][j])
        for j in range(2):
            manual[i, j] = (h[0] * net.weights[1][0, j]
                            + h[1] * net.weights[1][1, j] + net.biases[1][j])
    assert np.max(np.abs(net.forward(x) - manual)) < 1e-12


def test_forward_shape_error():
    net = Mlp([3, 2])
    with pytest.raises(ShapeError):
        net.forward(np.zeros((4, 5)))


def test_dead_input_feature_has_zero_gradient():
    rng = np.random.default_rng(3)
    net = Mlp([3, 4, 2], rng=rng)
    x = rng.normal(size=(6, 3))
    x[:, 1] = 0.0  # the loss cannot depend on weights fed by this feature
    out, acts = net.forward_cached(x)
    _, d_out = mse_loss_and_grad(out, np.zeros_like(out))
    grads = net.backward(acts, d_out)
    assert np.array_equal(grads[0][0][1, :], np.zeros(4))


def test_backward_linear_in_seed_gradient():
    rng = np.random.default_rng(4)
    net = Mlp([3, 5, 2], rng=rng)
    x = rng.normal(size=(4, 3))
    _, acts = net.forward_cached(x)
    seed = rng.normal(size=(4, 2))
    single = Mlp.flatten_grads(net.backward(acts, seed))
    double = Mlp.flatten_grads(net.backward(acts, 2.0 * seed))
    assert np.array_equal(double, 2.0 * single)


def test_mse_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    net = Mlp([3, 8, 8, 2], rng=rng)
    x = rng.normal(size=(10, 3))
    target = rng.normal(size=(10, 2))

    def loss_at(flat):
        probe = net.copy()
        probe.set_params_flat(flat)
        return mse_loss_and_grad(probe.forward(x), target)[0]

    out, acts = net.forward_cached(x)
    _, d_out = mse_loss_and_grad(out, target)
    analytic = Mlp.flatten_grads(net.backward(acts, d_out))
    numeric = finite_difference_grad(loss_at, net.params_flat())
    assert relative_error(analytic, numeric) < 1e-4


def test_gaussian_nll_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    net = Mlp([3, 8, 2], rng=rng)
    log_std = rng.normal(size=2) * 0.3
    x = rng.normal(size=(10, 3))
    samples = rng.normal(size=(10, 2))

    def loss_at(flat):
        probe = net.copy()
        probe.set_params_flat(flat[:-2])
        nll, _, _ = gaussian_nll_and_grads(probe.forward(x), flat[-2:], samples)
        return nll

    out, acts = net.forward_cached(x)
    _, d_mean, d_log_std = gaussian_nll_and_grads(out, log_std, samples)
    analytic = np.concatenate([Mlp.flatten_grads(net.backward(acts, d_mean)), d_log_std])
    numeric = finite_difference_grad(loss_at, np.concatenate([net.params_flat(), log_std]))
    assert relative_error(analytic, numeric) < 1e-4


def test_jvp_matches_finite_differences():
    rng = np.random.default_rng(7)
    net = Mlp([2, 6, 3], rng=rng)
    x = rng.normal(size=(5, 2))
    direction = rng.normal(size=net.n_params)
    _, acts = net.forward_cached(x)
    analytic = net.jvp(acts, direction)
    h = 1e-6
    plus, minus = net.copy(), net.copy()
    plus.set_params_flat(net.params_flat() + h * direction)
    minus.set_params_flat(net.params_flat() - h * direction)
    numeric = (plus.forward(x) - minus.forward(x)) / (2 * h)
    assert np.max(np.abs(analytic - numeric)) < 1e-6


class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        opt = Adam(3, lr=0.1)
        params = np.array([1.0, -2.0, 0.5])
        assert np.array_equal(opt.step(params, np.zeros(3)), params)

    def test_first_step_closed_form(self):
        opt = Adam(2, lr=0.01)
        grads = np.array([0.3, -1.7])
        updated = opt.step(np.zeros(2), grads)
        expected = -0.01 * grads / (np.abs(grads) + 1e-8)
        assert np.max(np.abs(updated - expected)) < 1e-12

    def test_minimizes_quadratic(self):
        opt = Adam(1, lr=0.1)
        w = np.array([1.0])
        for _ in range(500):
            w = opt.step(w, 2.0 * w)
        assert abs(w[0]) < 1e-3

    def test_nonfinite_gradient_rejected(self):
        opt = Adam(2, lr=0.1)
        params = np.array([1.0, 2.0])
        with pytest.raises(NumericError):
            opt.step(params, np.array([np.nan, 0.0]))
        assert opt.t == 0 and np.array_equal(opt.m, np.zeros(2))

    def test_state_round_trip(self):
        opt = Adam(3, lr=0.05)
        params = np.ones(3)
        rng = np.random.default_rng(8)
        for _ in range(5):
            params = opt.step(params, rng.normal(size=3))
        clone = Adam.from_state_dict(opt.state_dict())
        grads = rng.normal(size=3)
        assert np.array_equal(opt.step(params, grads), clone.step(params, grads))


def test_training_determinism():
    def run():
        rng = np.random.default_rng(9)
        net = Mlp([2, 8, 1], rng=rng)
        opt = Adam(net.n_params, lr=1e-3)
        x = rng.normal(size=(32, 2))
        y = rng.normal(size=(32, 1))
        for _ in range(20):
            out, acts = net.forward_cached(x)
            _, d_out = mse_loss_and_grad(out, y)
            grads = Mlp.flatten_grads(net.backward(acts, d_out))
            net.set_params_flat(opt.step(net.params_flat(), grads))
        return net.params_flat()

    assert np.array_equal(run(), run())


def test_checkpoint_round_trip_exact(tmp_path):
    rng = np.random.default_rng(10)
    net = Mlp([3, 7, 2], rng=rng)
    path = tmp_path / "net.json"
    net.save(str(path))
    loaded = Mlp.load(str(path))
    assert loaded.sizes == net.sizes
    for w1, w2 in zip(net.weights, loaded.weights):
        assert np.array_equal(w1, w2)
    for b1, b2 in zip(net.biases, loaded.biases):
        assert np.array_equal(b1, b2)
