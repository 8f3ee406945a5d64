import numpy as np
import pytest

from rentt.activations import ShapeError, leaky_relu, relu
from rentt.network import DenseLayer, Network, augment, forward
from rentt.recurrent import (
    RecurrentLayer,
    build_rnn_block,
    rnn_activation_blockdiag,
    rnn_forward,
    rnn_patterns,
    rnn_tree_level,
)
from rentt.tree import transform

from . import oracles


def seq(raw_steps):
    """Per-step slices with dummies from a list of raw input vectors."""
    return np.concatenate([np.concatenate([[1.0], np.atleast_1d(x)]) for x in raw_steps])


def random_cell(rng, T=None, act=None):
    nx, nh = int(rng.integers(1, 4)), int(rng.integers(1, 5))
    T = T or int(rng.integers(1, 7))
    wx, wh, b = rng.normal(size=(nh, nx)), rng.normal(size=(nh, nh)) * 0.7, rng.normal(size=nh)
    return RecurrentLayer.from_raw(wx, wh, b, act or relu(), T), (wx, wh, b)


def test_scalar_relu_counts_up():
    layer = RecurrentLayer.from_raw([[1.0]], [[1.0]], [0.0], relu(), 3)
    h = rnn_forward(layer, seq([1, 1, 1])).reshape(3, 2)
    np.testing.assert_allclose(h[:, 1], [1, 2, 3])
    assert oracles.rnn([[1.0]], [[1.0]], [0.0], [[1], [1], [1]], oracles.relu) == [[1], [2], [3]]


def test_single_step_is_dense():
    rng = np.random.default_rng(0)
    wx, b = rng.normal(size=(3, 2)), rng.normal(size=3)
    layer = RecurrentLayer.from_raw(wx, rng.normal(size=(3, 3)), b, relu(), 1)
    x = seq([rng.normal(size=2)])
    np.testing.assert_allclose(rnn_forward(layer, x)[1:], np.maximum(wx @ x[1:] + b, 0))
    np.testing.assert_array_equal(build_rnn_block(layer, rnn_patterns(layer, x)), layer.input_weights)


def test_zero_hidden_decouples_steps():
    rng = np.random.default_rng(1)
    wx, b = rng.normal(size=(2, 2)), rng.normal(size=2)
    layer = RecurrentLayer.from_raw(wx, np.zeros((2, 2)), b, relu(), 4)
    xs = rng.normal(size=(4, 2))
    h = rnn_forward(layer, seq(xs)).reshape(4, 3)
    np.testing.assert_allclose(h[:, 1:], np.maximum(xs @ wx.T + b, 0))


def test_two_step_all_active_blocks():
    wx, wh, b = np.array([[0.5, 1.0]]), np.array([[0.3]]), np.array([2.0])
    layer = RecurrentLayer.from_raw(wx, wh, b, relu(), 2)
    R = build_rnn_block(layer, [[1], [1]])
    Wx, Wh = layer.input_weights, layer.hidden_weights
    want = np.block([[Wx, np.zeros_like(Wx)], [Wh @ np.eye(2) @ Wx, Wx]])
    np.testing.assert_allclose(R, want)


def test_block_shape_checks():
    layer, _ = random_cell(np.random.default_rng(2), T=3)
    with pytest.raises(ShapeError):
        build_rnn_block(layer, np.zeros((2, layer.step_out - 1)))


def test_hundred_random_cells_match_recurrence():
    rng = np.random.default_rng(1234)
    for case in range(100):
        layer, (wx, wh, b) = random_cell(rng, act=leaky_relu(0.1) if case % 3 == 0 else relu())
        T, nx = layer.time_steps, layer.step_in
        xs = rng.normal(size=(T, nx - 1))
        x = seq(xs)
        pats = rnn_patterns(layer, x)
        R = build_rnn_block(layer, pats)
        lam = rnn_activation_blockdiag(layer, pats)
        got = (lam @ R @ x).reshape(T, -1)
        act = (lambda z: z if z >= 0 else 0.1 * z) if case % 3 == 0 else oracles.relu
        want = oracles.rnn(wx.tolist(), wh.tolist(), b.tolist(), xs.tolist(), act)
        np.testing.assert_allclose(got[:, 0], 1.0)
        np.testing.assert_allclose(got[:, 1:], want, rtol=0, atol=1e-10)
        # pre-activations of the block form are the recurrence's pre-activations
        pre = (R @ x).reshape(T, -1)[:, 1:]
        np.testing.assert_allclose(pre, oracles.rnn_preactivations(wx, wh, b, xs, act), atol=1e-10)
        # strictly upper blocks vanish
        for t in range(T):
            assert not R[t * layer.step_out:(t + 1) * layer.step_out, (t + 1) * nx:].any()


def test_causality():
    rng = np.random.default_rng(9)
    for _ in range(30):
        layer, _ = random_cell(rng, T=5)
        net = Network([layer])
        T, k = layer.time_steps, layer.step_in - 1
        x = np.concatenate([[1.0], rng.normal(size=T * k)])
        y = forward(net, x)
        t = int(rng.integers(0, T))
        x2 = x.copy()
        x2[1 + (t + 1) * k:] += rng.normal(size=(T - t - 1) * k)
        y2 = forward(net, x2)
        h = layer.step_out - 1
        np.testing.assert_array_equal(y[: 1 + (t + 1) * h], y2[: 1 + (t + 1) * h])


def test_tree_level_formula():
    dims = [4, 3, 5]
    assert rnn_tree_level(1, 1, 1, dims) == 1
    assert rnn_tree_level(1, 2, 1, dims) == 2
    assert rnn_tree_level(2, 1, 2, dims) == 5


def test_single_step_rnn_tree_equals_dense_tree():
    rng = np.random.default_rng(4)
    wx, b = rng.normal(size=(3, 2)), rng.normal(size=3)
    head = DenseLayer(augment(rng.normal(size=(1, 3)), [0.1]))
    rnn_net = Network([RecurrentLayer.from_raw(wx, rng.normal(size=(3, 3)), b, relu(), 1), head])
    dense_net = Network([DenseLayer(augment(wx, b), relu()), head])
    X = np.hstack([np.ones((300, 1)), rng.normal(size=(300, 2))])
    a, d = transform(rnn_net, X), transform(dense_net, X)
    assert sorted(a.nodes) == sorted(d.nodes)
    for nid in a.nodes:
        np.testing.assert_array_equal(a.nodes[nid].effective, d.nodes[nid].effective)


def test_recurrent_network_forward_vs_oracle():
    rng = np.random.default_rng(6)
    layer, (wx, wh, b) = random_cell(rng, T=4)
    head_w = rng.normal(size=(1, (layer.step_out - 1) * 4))
    net = Network([layer, DenseLayer(augment(head_w, [0.0]))])
    xs = rng.normal(size=(4, layer.step_in - 1))
    y = forward(net, np.concatenate([[1.0], xs.ravel()]))
    hs = oracles.rnn(wx, wh, b, xs, oracles.relu)
    np.testing.assert_allclose(y[1:], head_w @ np.ravel(hs), atol=1e-12)


def test_rnn_forward_needs_dummies():
    layer, _ = random_cell(np.random.default_rng(8), T=2)
    x = seq(np.zeros((2, layer.step_in - 1)))
    x[layer.step_in] = 0.0
    with pytest.raises(ShapeError):
        rnn_forward(layer, x)
