import json

import numpy as np
import pytest

from regfit import losses, network
from regfit.errors import ValidationError


def gradcheck_error(sizes, seed, loss=losses.MSE()):
    """Max-abs backprop error against central differences, relative to the
    gradient scale (entrywise ratios are dominated by difference-quotient
    roundoff on near-zero entries)."""
    net = network.init_mlp(sizes, None, seed=seed)
    rng = np.random.default_rng(seed + 1000)
    X = rng.standard_normal((8, sizes[0]))
    Y = rng.standard_normal((8, sizes[-1]))
    w0 = network.flatten_params(net)
    g = network.backprop(net, X, Y, loss)
    h = 1e-6
    num = np.zeros_like(w0)
    for i in range(w0.size):
        wp, wm = w0.copy(), w0.copy()
        wp[i] += h
        wm[i] -= h
        jp = losses.loss_value(loss, Y, network.unflatten_params(net, wp).predict(X), wp)
        jm = losses.loss_value(loss, Y, network.unflatten_params(net, wm).predict(X), wm)
        num[i] = (jp - jm) / (2 * h)
    return np.max(np.abs(g - num)) / max(np.max(np.abs(num)), 1e-12)


def test_zero_net_tanh_outputs_zero():
    net = network.MLP(
        (1, 2, 1),
        (np.zeros((2, 1)), np.zeros((1, 2))),
        (np.zeros(2), np.zeros(1)),
        ("tanh", "tanh"),
    )
    np.testing.assert_array_equal(net.predict([[3.0]]), [[0.0]])


def test_identity_activations_collapse_to_affine_map():
    rng = np.random.default_rng(0)
    sizes = [2, 3, 3, 1]
    net = network.init_mlp(sizes, ["identity"] * 3, seed=4)
    X = rng.standard_normal((6, 2))
    W2, W3, W4 = net.weights
    b2, b3, b4 = net.biases
    A = W4 @ W3 @ W2
    c = W4 @ W3 @ b2 + W4 @ b3 + b4
    np.testing.assert_allclose(net.predict(X), X @ A.T + c, atol=1e-12)


def test_1231_net_matches_hand_unrolled_composite():
    # explicit nesting a4(W3 a3(W2 a2(W1 x + b2) + b3) + b4) with tanh layers
    W1 = np.array([[0.5], [-0.3]])
    b2 = np.array([0.1, -0.2])
    W2 = np.array([[1.0, 0.2], [-0.4, 0.8], [0.3, 0.3]])
    b3 = np.array([0.0, 0.1, -0.1])
    W3 = np.array([[0.7, -0.5, 0.2]])
    b4 = np.array([0.05])
    net = network.MLP((1, 2, 3, 1), (W1, W2, W3), (b2, b3, b4), ("tanh", "tanh", "identity"))
    x = 0.8
    by_hand = W3 @ np.tanh(W2 @ np.tanh(W1 @ np.array([x]) + b2) + b3) + b4
    assert net.predict([[x]])[0, 0] == pytest.approx(by_hand[0], abs=1e-14)


def test_activation_values():
    v, _ = network.activation("tanh", 0.0)
    assert v == 0.0
    v, d = network.activation("relu", -1.0)
    assert v == 0.0 and d == 0.0
    _, d0 = network.activation("relu", 0.0)
    assert d0 == 0.0  # derivative at the kink is defined as 0


def test_tanh_derivative_matches_finite_differences():
    z = np.linspace(-3, 3, 41)
    _, d = network.activation("tanh", z)
    h = 1e-6
    num = (np.tanh(z + h) - np.tanh(z - h)) / (2 * h)
    np.testing.assert_allclose(d, num, atol=1e-8)


def test_param_count_worked_figure():
    assert network.param_count(network.init_mlp([1, 2, 3, 1])) == 17


def test_param_count_single_neuron():
    assert network.param_count(network.init_mlp([1, 1])) == 2


def test_param_count_equals_flat_length():
    for sizes in ([1, 2, 3, 1], [2, 4, 4, 1], [1, 8, 1]):
        net = network.init_mlp(sizes, seed=1)
        assert network.flatten_params(net).size == network.param_count(net)


class TestFlattening:
    def test_round_trip(self):
        for seed in range(3):
            net = network.init_mlp([2, 3, 2], seed=seed)
            w = network.flatten_params(net)
            back = network.flatten_params(network.unflatten_params(net, w))
            np.testing.assert_array_equal(back, w)

    def test_zero_vector_gives_zero_net(self):
        net = network.init_mlp([1, 2, 1], seed=0)
        z = network.unflatten_params(net, np.zeros(network.param_count(net)))
        assert all(np.all(W == 0) for W in z.weights)
        assert all(np.all(b == 0) for b in z.biases)

    def test_single_coordinate_perturbs_single_entry(self):
        net = network.init_mlp([1, 2, 1], seed=0)
        w = network.flatten_params(net)
        for i in range(w.size):
            w2 = w.copy()
            w2[i] += 1.0
            other = network.unflatten_params(net, w2)
            changed = sum(
                int(np.sum(a != b))
                for a, b in zip(
                    list(net.weights) + list(net.biases),
                    list(other.weights) + list(other.biases),
                )
            )
            assert changed == 1

    def test_wrong_length_rejected(self):
        net = network.init_mlp([1, 2, 1], seed=0)
        with pytest.raises(ValidationError):
            network.unflatten_params(net, np.zeros(3))


class TestBackprop:
    def test_zero_gradient_at_exact_fit(self):
        net = network.init_mlp([1, 3, 1], seed=2)
        X = np.linspace(-1, 1, 7)[:, None]
        Y = net.predict(X)  # targets the net reproduces exactly
        g = network.backprop(net, X, Y, losses.MSE())
        assert np.linalg.norm(g) < 1e-12

    @pytest.mark.parametrize("sizes", [[1, 2, 3, 1], [2, 4, 4, 1], [1, 8, 1]])
    def test_matches_central_differences(self, sizes):
        worst = max(gradcheck_error(sizes, seed) for seed in range(5))
        assert worst < 1e-6

    def test_huber_loss_gradient(self):
        assert gradcheck_error([1, 4, 1], 3, losses.Huber(0.5)) < 1e-6

    def test_loss_scaling_scales_gradient(self):
        # weighting by I/2 doubles the quadratic loss, hence the gradient
        net = network.init_mlp([1, 3, 1], seed=4)
        rng = np.random.default_rng(4)
        X = rng.standard_normal((5, 1))
        Y = rng.standard_normal((5, 1))
        g1 = network.backprop(net, X, Y, losses.MSE())
        g2 = network.backprop(net, X, Y, losses.WeightedMSE(0.5 * np.eye(5)))
        np.testing.assert_allclose(g2, 2.0 * g1, rtol=1e-12)

    def test_eps_insensitive_refused(self):
        net = network.init_mlp([1, 2, 1], seed=0)
        with pytest.raises(ValidationError):
            network.backprop(net, [[0.0]], [[0.0]], losses.EpsilonInsensitive(0.1))


def test_forward_is_rowwise_independent():
    net = network.init_mlp([2, 4, 1], seed=5)
    rng = np.random.default_rng(5)
    X = rng.standard_normal((6, 2))
    perm = rng.permutation(6)
    np.testing.assert_array_equal(net.predict(X)[perm], net.predict(X[perm]))


def test_forward_width_mismatch():
    net = network.init_mlp([2, 3, 1], seed=0)
    with pytest.raises(ValidationError):
        net.predict(np.zeros((4, 3)))


def test_init_is_seeded_and_bounded():
    a = network.init_mlp([1, 4, 1], seed=9)
    b = network.init_mlp([1, 4, 1], seed=9)
    np.testing.assert_array_equal(network.flatten_params(a), network.flatten_params(b))
    s = np.sqrt(6.0 / (1 + 4))
    assert np.max(np.abs(a.weights[0])) <= s


def test_serialization_round_trip():
    net = network.init_mlp([1, 5, 2], seed=6)
    back = network.MLP.from_dict(json.loads(json.dumps(net.to_dict())))
    X = np.linspace(-1, 1, 9)[:, None]
    np.testing.assert_array_equal(back.predict(X), net.predict(X))
