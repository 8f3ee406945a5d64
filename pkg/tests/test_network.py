import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rentt.activations import FinalActivation, ShapeError, relu
from rentt.network import DenseLayer, Network, augment, forward, forward_batch

from . import oracles


def test_augment_examples():
    np.testing.assert_array_equal(augment([[2]], [0.5]), [[1, 0], [0.5, 2]])
    np.testing.assert_array_equal(augment(np.eye(2), [0, 0]), np.eye(3))
    np.testing.assert_array_equal(augment([[-1, 3]], [4]), [[1, 0, 0], [4, -1, 3]])


def test_augment_shape_error():
    with pytest.raises(ShapeError):
        augment([[1, 2]], [0.0, 1.0])


def test_dense_layer_rejects_bad_dummy_row():
    with pytest.raises(ShapeError):
        DenseLayer(np.array([[1.0, 0.5], [0.5, 2.0]]), relu())


def test_forward_single_layer():
    net = Network([DenseLayer(np.array([[1.0, 0.0], [0.5, 2.0]]), relu())])
    np.testing.assert_allclose(forward(net, np.array([1.0, 3.0])), [1, 6.5])
    np.testing.assert_allclose(forward(net, np.array([1.0, -1.0])), [1, 0])


def test_forward_needs_dummy():
    net = Network([DenseLayer(np.array([[1.0, 0.0], [0.5, 2.0]]), relu())])
    with pytest.raises(ShapeError):
        forward(net, np.array([0.0, 3.0]))


def test_mismatched_layers():
    with pytest.raises(ShapeError):
        Network([DenseLayer(augment(np.ones((2, 3)), np.zeros(2)), relu()),
                 DenseLayer(augment(np.ones((1, 3)), np.zeros(1)))])


def worked_example_raw(seed=0):
    rng = np.random.default_rng(seed)
    return [
        (rng.normal(size=(2, 2)), rng.normal(size=2), oracles.relu),
        (rng.normal(size=(3, 2)), rng.normal(size=3), oracles.relu),
        (rng.normal(size=(1, 3)), rng.normal(size=1), None),
    ]


def build(raw, final=None):
    layers = [DenseLayer(augment(w, b), relu() if act else None) for w, b, act in raw]
    return Network(layers, FinalActivation(final) if final else None)


@settings(max_examples=50)
@given(st.integers(0, 10_000), st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_forward_matches_hand_composition(seed, x):
    raw = worked_example_raw(seed)
    net = build(raw, "tanh")
    got = forward(net, np.array([1.0] + x))
    want = oracles.mlp(raw, x, final="tanh")
    assert got[0] == 1.0
    np.testing.assert_allclose(got[1:], want, rtol=1e-12, atol=1e-12)


def test_dummy_propagates():
    rng = np.random.default_rng(1)
    net = build(worked_example_raw(1))
    X = np.hstack([np.ones((50, 1)), rng.normal(size=(50, 2))])
    for layer in net.layers:
        X, _ = layer.forward_batch(X)
        assert np.all(X[:, 0] == 1.0)


def test_forward_batch_threads_agree():
    rng = np.random.default_rng(2)
    net = build(worked_example_raw(2), "tanh")
    X = np.hstack([np.ones((1000, 1)), rng.normal(size=(1000, 2))])
    a = forward_batch(net, X)
    Y, pats = net.forward_batch(X, threads=4)
    Y1, pats1 = net.forward_batch(X, threads=1)
    np.testing.assert_array_equal(Y, Y1)
    np.testing.assert_array_equal(pats, pats1)
    np.testing.assert_allclose(a[:, 1:], np.tanh(Y[:, 1:]))


def test_final_activation_must_follow_affine_layer():
    with pytest.raises(ShapeError):
        Network([DenseLayer(augment(np.ones((1, 2)), [0.0]), relu())], FinalActivation("tanh"))


def test_units_and_levels():
    net = build(worked_example_raw())
    assert net.units == [2, 3, 0]
    assert len(net.levels()) == 5
    assert math.isclose(net.input_dim, 3)
