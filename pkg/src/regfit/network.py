"""Fully connected feed-forward network with reverse-mode gradients.

The forward map is the recursion y(1) = x (no activation or bias on the
input layer), z(l) = W(l) y(l-1) + b(l), y(l) = a(l)(z(l)) for l = 2..L,
with one activation per layer. Rows of a batch are processed independently;
the model is static and memoryless.

Parameters flatten layer by layer, weights before biases, so the vector is
[W(2).ravel(), b(2), W(3).ravel(), b(3), ...].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .losses import EpsilonInsensitive, LossSpec, Penalized, loss_gradient

ACTIVATIONS = ("tanh", "relu", "identity")


def activation(kind: str, z):
    """Return (value, derivative) of the named activation, element-wise.

    relu's derivative at exactly 0 is defined as 0.
    """
    z = np.asarray(z, dtype=float)
    if kind == "tanh":
        t = np.tanh(z)
        return t, 1.0 - t * t
    if kind == "relu":
        return np.maximum(z, 0.0), np.where(z > 0.0, 1.0, 0.0)
    if kind == "identity":
        return z, np.ones_like(z)
    raise ValidationError(f"unknown activation {kind!r}")


@dataclass(frozen=True)
class MLP:
    """Layer sizes [n_1..n_L], weight matrices W(l): n_l x n_(l-1), bias
    vectors b(l): n_l, and one activation name per layer l = 2..L."""

    layer_sizes: tuple
    weights: tuple
    biases: tuple
    activations: tuple

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        if len(sizes) < 2 or any(n < 1 for n in sizes):
            raise ValidationError(f"need >= 2 positive layer sizes, got {sizes}")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValidationError("need one weight matrix and bias vector per layer >= 2")
        acts = tuple(self.activations)
        if len(acts) != len(sizes) - 1:
            raise ValidationError("need one activation per layer >= 2")
        for a in acts:
            if a not in ACTIVATIONS:
                raise ValidationError(f"unknown activation {a!r}")
        Ws, bs = [], []
        for l, (W, b) in enumerate(zip(self.weights, self.biases), start=2):
            W = np.array(W, dtype=float, copy=True)
            b = np.array(b, dtype=float, copy=True).ravel()
            want = (sizes[l - 1], sizes[l - 2])
            if W.shape != want:
                raise ValidationError(f"layer {l} weights must be {want}, got {W.shape}")
            if b.shape != (sizes[l - 1],):
                raise ValidationError(f"layer {l} bias must have {sizes[l - 1]} entries")
            W.setflags(write=False)
            b.setflags(write=False)
            Ws.append(W)
            bs.append(b)
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "weights", tuple(Ws))
        object.__setattr__(self, "biases", tuple(bs))
        object.__setattr__(self, "activations", acts)

    def predict(self, X) -> np.ndarray:
        return forward(self, X)[0]

    def get_params(self) -> np.ndarray:
        return flatten_params(self)

    def with_params(self, w) -> "MLP":
        return unflatten_params(self, w)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "mlp",
            "layer_sizes": list(self.layer_sizes),
            "activations": list(self.activations),
            "params": flatten_params(self).tolist(),
        }

    @staticmethod
    def from_dict(doc: dict) -> "MLP":
        sizes = [int(n) for n in doc["layer_sizes"]]
        skeleton = init_mlp(sizes, doc["activations"], seed=0)
        return unflatten_params(skeleton, np.asarray(doc["params"]))


def init_mlp(layer_sizes, activations=None, seed: int = 0) -> MLP:
    """Seeded symmetric init: weights uniform in [-s, s] with
    s = sqrt(6 / (fan_in + fan_out)), biases zero."""
    sizes = [int(n) for n in layer_sizes]
    if activations is None:
        activations = ["tanh"] * (len(sizes) - 2) + ["identity"]
    rng = np.random.default_rng(seed)
    Ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        Ws.append(rng.uniform(-s, s, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return MLP(tuple(sizes), tuple(Ws), tuple(bs), tuple(activations))


def param_count(net: MLP) -> int:
    """Total number of weights and biases."""
    sizes = net.layer_sizes
    return sum(b * a + b for a, b in zip(sizes[:-1], sizes[1:]))


def flatten_params(net: MLP) -> np.ndarray:
    return np.concatenate([np.concatenate([W.ravel(), b]) for W, b in zip(net.weights, net.biases)])


def unflatten_params(net: MLP, w) -> MLP:
    """Rebuild a network with the same shape from a flat vector."""
    w = np.asarray(w, dtype=float).ravel()
    if w.size != param_count(net):
        raise ValidationError(f"parameter vector has {w.size} entries, expected {param_count(net)}")
    Ws, bs = [], []
    pos = 0
    for W, b in zip(net.weights, net.biases):
        Ws.append(w[pos : pos + W.size].reshape(W.shape))
        pos += W.size
        bs.append(w[pos : pos + b.size])
        pos += b.size
    return MLP(net.layer_sizes, tuple(Ws), tuple(bs), net.activations)


def forward(net: MLP, X) -> tuple[np.ndarray, list]:
    """Run the recursion on a batch; also return the per-layer caches
    [(z(l), y(l)) for l = 2..L] needed by backprop."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != net.layer_sizes[0]:
        raise ValidationError(
            f"input width {X.shape[1]} does not match first layer ({net.layer_sizes[0]})"
        )
    caches = []
    y = X
    for W, b, act in zip(net.weights, net.biases, net.activations):
        z = y @ W.T + b
        y, _ = activation(act, z)
        caches.append((z, y))
    return y, caches


def backprop_from_output_grad(net: MLP, X, out_grad) -> np.ndarray:
    """Reverse-mode gradient of sum(out_grad * output) with respect to the
    flat parameter vector; ``out_grad`` is dJ/d(output), shaped like the
    network output for the batch X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _, caches = forward(net, X)
    G = np.asarray(out_grad, dtype=float).reshape(X.shape[0], net.layer_sizes[-1])
    grads_W = [None] * len(net.weights)
    grads_b = [None] * len(net.biases)
    for i in range(len(net.weights) - 1, -1, -1):
        z, _ = caches[i]
        _, dact = activation(net.activations[i], z)
        D = G * dact
        y_prev = X if i == 0 else caches[i - 1][1]
        grads_W[i] = D.T @ y_prev
        grads_b[i] = D.sum(axis=0)
        if i > 0:
            G = D @ net.weights[i]
    return np.concatenate(
        [np.concatenate([gW.ravel(), gb]) for gW, gb in zip(grads_W, grads_b)]
    )


def backprop(net: MLP, X, y_true, loss: LossSpec) -> np.ndarray:
    """Exact gradient of the scalar loss with respect to the flat parameters.

    The loss must be differentiable in the predictions: the
    epsilon-insensitive variant is refused.
    """
    base = loss.base if isinstance(loss, Penalized) else loss
    if isinstance(base, EpsilonInsensitive):
        raise ValidationError("epsilon-insensitive loss is not differentiable enough for backprop")
    w = flatten_params(net)
    out_grad, grad_w = loss_gradient(loss, y_true, forward(net, X)[0], w)
    grad = backprop_from_output_grad(net, X, out_grad)
    if grad_w is not None:
        grad = grad + grad_w
    return grad
