import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from isc.neural import (ACTIVATIONS, Dense, DenseNet, ShapeError, backward, forward,
                        load_checkpoint, save_checkpoint, sigmoid, softmax)

from fd import REL_TOL, clear_of_kinks, numeric_grad, random_net, rel_error


def test_identity_net_passes_input_through():
    net = DenseNet([Dense(np.eye(4), np.zeros(4), "identity")])
    x = np.array([1.0, -2.0, 0.5, 3.0])
    assert np.array_equal(forward(net, x), x)


def test_zero_softmax_layer_is_uniform():
    net = DenseNet([Dense(np.zeros((3, 5)), np.zeros(5), "softmax")])
    assert np.allclose(forward(net, np.ones(3)), 0.2)


def test_forward_matches_independent_chain():
    rng = np.random.default_rng(0)
    w1, b1 = rng.normal(size=(6, 5)), rng.normal(size=5)
    w2, b2 = rng.normal(size=(5, 3)), rng.normal(size=3)
    net = DenseNet([Dense(w1, b1, "relu"), Dense(w2, b2, "sigmoid")])
    x = rng.normal(size=6)
    hidden = [max(0.0, sum(x[i] * w1[i, j] for i in range(6)) + b1[j]) for j in range(5)]
    out = [1 / (1 + np.exp(-(sum(hidden[i] * w2[i, j] for i in range(5)) + b2[j])))
           for j in range(3)]
    assert np.allclose(forward(net, x), out, rtol=1e-12)


def test_linear_weight_gradient_is_outer_product():
    rng = np.random.default_rng(1)
    net = DenseNet([Dense(rng.normal(size=(3, 2)), np.zeros(2), "identity")])
    x, up = rng.normal(size=3), rng.normal(size=2)
    (dw, db), dx = backward(net, x, up)[0][0], backward(net, x, up)[1]
    assert np.allclose(dw, np.outer(x, up))
    assert np.allclose(db, up)
    assert np.allclose(dx, net.layers[0].weight @ up)


def test_zero_upstream_gives_zero_gradients():
    net = random_net(np.random.default_rng(2), [4, 3, 2], ["relu", "softmax"])
    grads, dx = backward(net, np.ones(4), np.zeros(2))
    assert all(not dw.any() and not db.any() for dw, db in grads)
    assert not dx.any()


@given(st.lists(st.integers(1, 64), min_size=2, max_size=4),
       st.lists(st.sampled_from(ACTIVATIONS), min_size=3, max_size=3),
       st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_backward_matches_finite_differences(sizes, acts, batch, seed):
    acts = [a if a != "softmax" else "identity" for a in acts[:len(sizes) - 2]] + [acts[-1]]
    rng = np.random.default_rng(seed)
    net = random_net(rng, sizes, acts)
    x = rng.normal(size=(batch, sizes[0]))
    up = rng.normal(size=(batch, sizes[-1]))
    assume(clear_of_kinks(net, x))
    grads, dx = net.backward(x, up)
    theta = net.get_flat()
    f = lambda t: float(np.sum(net.set_flat(t).forward(x) * up))
    num = numeric_grad(f, theta)
    assert rel_error(DenseNet.flatten_grads(grads), num) < REL_TOL
    assert rel_error(dx, numeric_grad(lambda z: float(np.sum(net.forward(z) * up)), x)) < REL_TOL


@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_softmax_is_a_distribution(width, seed):
    z = np.random.default_rng(seed).normal(scale=20, size=(3, width))
    p = softmax(z)
    assert np.all(p >= 0) and np.allclose(p.sum(axis=1), 1.0, atol=1e-9)


def test_sigmoid_is_stable_at_extremes():
    s = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    assert np.array_equal(s, [0.0, 0.5, 1.0])


def test_forward_is_deterministic():
    net = random_net(np.random.default_rng(3), [5, 8, 2], ["relu", "sigmoid"])
    x = np.arange(5.0)
    assert np.array_equal(net.forward(x), net.forward(x))


@pytest.mark.parametrize("layers", [
    [Dense(np.zeros((2, 3)), np.zeros(3)), Dense(np.zeros((4, 1)), np.zeros(1))],
    [Dense(np.zeros((2, 3)), np.zeros(3), "softmax"), Dense(np.zeros((3, 1)), np.zeros(1))],
])
def test_invalid_compositions(layers):
    with pytest.raises(ShapeError):
        DenseNet(layers)


def test_wrong_input_width():
    net = random_net(np.random.default_rng(0), [3, 2], ["identity"])
    with pytest.raises(ShapeError):
        net.forward(np.ones(4))


def test_checkpoint_round_trip_is_exact(tmp_path):
    net = random_net(np.random.default_rng(5), [7, 6, 4], ["relu", "softmax"])
    save_checkpoint(net, tmp_path / "n.csv")
    back = load_checkpoint(tmp_path / "n.csv")
    assert np.array_equal(back.get_flat(), net.get_flat())
    assert [l.activation for l in back.layers] == ["relu", "softmax"]


def test_sgd_step_moves_against_gradient():
    net = random_net(np.random.default_rng(6), [3, 1], ["identity"])
    grads, _ = net.backward(np.ones(3), np.ones(1))
    after = net.sgd_step(grads, 0.1)
    assert np.allclose(after.get_flat(), net.get_flat() - 0.1 * DenseNet.flatten_grads(grads))
