import math

import numpy as np
import pytest

from conftest import fd_net_gradients as _fd_gradients
from conftest import rel_err as _rel_err
from conftest import safe_net as _safe_net
from satedge.mlp import DenseNet


def test_zero_net_outputs_zero():
    net = DenseNet((5, 8, 3), seed=0)
    for w in net.weights:
        w[:] = 0.0
    for b in net.biases:
        b[:] = 0.0
    assert np.array_equal(net.forward(np.ones(5)), np.zeros(3))


def test_single_identity_layer_passes_input_through():
    net = DenseNet((4, 4), seed=0)
    net.weights[0][:] = np.eye(4)
    net.biases[0][:] = 0.0
    x = np.array([0.3, -1.2, 5.0, 0.0])
    assert np.allclose(net.forward(x), x, rtol=0, atol=0)


def test_forward_is_pure():
    net = DenseNet((6, 16, 4), seed=3)
    x = np.linspace(-1, 1, 6)
    assert np.array_equal(net.forward(x), net.forward(x))


def test_initialization_is_fan_in_scaled_and_seeded():
    net1 = DenseNet((10, 20, 5), seed=42)
    net2 = DenseNet((10, 20, 5), seed=42)
    net3 = DenseNet((10, 20, 5), seed=43)
    for w1, w2 in zip(net1.weights, net2.weights):
        assert np.array_equal(w1, w2)
    assert any(not np.array_equal(w1, w3)
               for w1, w3 in zip(net1.weights, net3.weights))
    for w, fan_in in zip(net1.weights, (10, 20)):
        bound = math.sqrt(3.0 / fan_in)
        assert np.max(np.abs(w)) <= bound
        assert np.max(np.abs(w)) > 0.5 * bound


@pytest.mark.parametrize("sizes", [(5, 8, 3), (12, 16, 8, 4)])
def test_backward_matches_finite_differences(sizes):
    for seed in range(10):
        net, x = _safe_net(sizes, seed)
        rng = np.random.default_rng(seed + 500)
        grad_out = rng.normal(0.0, 1.0, sizes[-1])
        grads = net.backward(x, grad_out)
        fd_w, fd_b = _fd_gradients(net, x, grad_out)
        for gw, fw in zip(grads.w, fd_w):
            assert _rel_err(gw, fw) <= 1e-5
        for gb, fb in zip(grads.b, fd_b):
            assert _rel_err(gb, fb) <= 1e-5


@pytest.mark.parametrize("sizes", [(30, 256, 128, 4), (30, 64, 32, 4)])
def test_backward_spot_checks_on_training_shapes(sizes):
    net, x = _safe_net(sizes, 1)
    rng = np.random.default_rng(9)
    grad_out = rng.normal(0.0, 1.0, sizes[-1])
    grads = net.backward(x, grad_out)
    h = 1e-4
    checked = 0
    for li in range(len(net.weights)):
        shape = net.weights[li].shape
        for _ in range(40):
            idx = tuple(rng.integers(0, d) for d in shape)
            net.weights[li][idx] += h
            up = float(grad_out @ net.forward(x))
            net.weights[li][idx] -= 2 * h
            down = float(grad_out @ net.forward(x))
            net.weights[li][idx] += h
            fd = (up - down) / (2 * h)
            an = grads.w[li][idx]
            assert abs(an - fd) <= 1e-5 * max(1e-8, abs(an), abs(fd))
            checked += 1
    assert checked >= 100


def test_backward_zero_gradient_and_linearity():
    net = DenseNet((7, 12, 3), seed=5)
    x = np.linspace(-2, 2, 7)
    zero = net.backward(x, np.zeros(3))
    assert all(np.all(g == 0) for g in zero.w)
    assert all(np.all(g == 0) for g in zero.b)
    g = np.array([0.5, -1.0, 2.0])
    one = net.backward(x, g)
    three = net.backward(x, 3.0 * g)
    for a, b in zip(one.w, three.w):
        assert np.allclose(3.0 * a, b, rtol=1e-13, atol=0)


def test_batched_forward_and_backward_agree_with_loops():
    net = DenseNet((6, 10, 4), seed=8)
    rng = np.random.default_rng(12)
    xs = rng.normal(0.0, 1.0, (5, 6))
    gs = rng.normal(0.0, 1.0, (5, 4))
    batch_out = net.forward(xs)
    for i in range(5):
        assert np.allclose(batch_out[i], net.forward(xs[i]), rtol=0,
                           atol=1e-14)
    batch_grads = net.backward(xs, gs)
    acc_w = [np.zeros_like(w) for w in net.weights]
    acc_b = [np.zeros_like(b) for b in net.biases]
    for i in range(5):
        g = net.backward(xs[i], gs[i])
        for a, d in zip(acc_w, g.w):
            a += d
        for a, d in zip(acc_b, g.b):
            a += d
    for a, b in zip(batch_grads.w, acc_w):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
    for a, b in zip(batch_grads.b, acc_b):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_adam_zero_gradient_keeps_parameters():
    net = DenseNet((5, 6, 2), seed=2)
    before = [w.copy() for w in net.weights]
    grads = net.backward(np.ones(5), np.zeros(2))
    net.adam_step(grads)
    assert net.step_count == 1
    for w, old in zip(net.weights, before):
        assert np.array_equal(w, old)


def test_adam_lr_zero_keeps_parameters():
    net = DenseNet((5, 6, 2), seed=2)
    before = [w.copy() for w in net.weights]
    grads = net.backward(np.ones(5), np.ones(2))
    net.adam_step(grads, lr=0.0)
    for w, old in zip(net.weights, before):
        assert np.array_equal(w, old)


def test_adam_constant_gradient_moves_against_sign():
    net = DenseNet((3, 2), seed=4)
    w0 = net.weights[0].copy()
    x = np.array([1.0, 2.0, -1.0])
    g = np.array([1.0, -1.0])
    for _ in range(50):
        net.adam_step(net.backward(x, g))
    moved = net.weights[0] - w0
    grad_sign = np.sign(np.outer(g, x))
    mask = grad_sign != 0
    assert np.all(np.sign(moved[mask]) == -grad_sign[mask])


def test_training_toy_regression_drops_loss():
    rng = np.random.default_rng(0)
    xs = rng.normal(0.0, 1.0, (64, 6))
    w_true = rng.normal(0.0, 1.0, 6)
    ys = (xs @ w_true + 0.5 * np.sin(xs[:, 0]))[:, None]

    net = DenseNet((6, 32, 1), seed=0)

    def loss():
        return float(np.mean((net.forward(xs) - ys) ** 2))

    first = loss()
    for _ in range(2000):
        pred = net.forward(xs)
        grad_out = 2.0 * (pred - ys) / len(xs)
        net.adam_step(net.backward(xs, grad_out))
    assert loss() <= 0.1 * first


def test_checkpoint_round_trip(tmp_path):
    net = DenseNet((9, 14, 5), seed=6)
    grads = net.backward(np.ones(9), np.ones(5))
    net.adam_step(grads)
    path = tmp_path / "net.npz"
    net.save(path)
    other = DenseNet.load(path)
    x = np.linspace(-1, 1, 9)
    assert np.max(np.abs(net.forward(x) - other.forward(x))) <= 1e-12
    assert other.step_count == net.step_count
    other.adam_step(other.backward(x, np.ones(5)))
    net.adam_step(net.backward(x, np.ones(5)))
    assert np.array_equal(net.weights[0], other.weights[0])


def test_non_finite_update_is_rejected():
    net = DenseNet((3, 2), seed=0)
    grads = net.backward(np.ones(3), np.ones(2))
    grads.w[0][0, 0] = np.inf
    with pytest.raises(FloatingPointError):
        net.adam_step(grads)
