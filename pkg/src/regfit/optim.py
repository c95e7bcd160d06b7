"""First-order update rules and the mini-batch training loop.

All rules are element-wise. ``step`` is functional: it returns the new
parameter vector and a new optimizer state, leaving its arguments alone.

Update rules (g is the gradient of the cost at w):

    gd:       w - eta g
    momentum: m <- beta m - eta g;            w <- w + m
    rmsprop:  s <- beta s + (1-beta) g^2;     w <- w - eta g / sqrt(s + eps)
    adam:     m <- beta1 m + (1-beta1) g
              s <- beta2 s + (1-beta2) g^2
              mhat = m / (1 - beta1^i), shat = s / (1 - beta2^i)
              w <- w - eta mhat / (sqrt(shat) + eps);  i <- i + 1

rmsprop keeps eps inside the square root; adam applies it outside and
starts its step counter i at 1 so the bias corrections never divide by
zero. Defaults: eta 1e-3, beta 0.9, beta1 0.9, beta2 0.999, eps 1e-8.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, TrainablePredictor
from .errors import ValidationError
from .linear import LinearModel, feature_matrix
from .losses import LossSpec, loss_gradient, loss_value
from .network import MLP, backprop


@dataclass(frozen=True)
class OptimizerState:
    """Marker base class; concrete rules below."""


@dataclass(frozen=True)
class GD(OptimizerState):
    eta: float = 1e-3

    def __post_init__(self):
        _check_eta(self.eta)


@dataclass(frozen=True)
class Momentum(OptimizerState):
    eta: float = 1e-3
    beta: float = 0.9
    m: np.ndarray | None = None

    def __post_init__(self):
        _check_eta(self.eta)
        _check_decay(self.beta, "beta")


@dataclass(frozen=True)
class RMSProp(OptimizerState):
    eta: float = 1e-3
    beta: float = 0.9
    eps: float = 1e-8
    s: np.ndarray | None = None

    def __post_init__(self):
        _check_eta(self.eta)
        _check_decay(self.beta, "beta")
        _check_eps(self.eps)


@dataclass(frozen=True)
class Adam(OptimizerState):
    eta: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    s: np.ndarray | None = None
    i: int = 1

    def __post_init__(self):
        _check_eta(self.eta)
        _check_decay(self.beta1, "beta1")
        _check_decay(self.beta2, "beta2")
        _check_eps(self.eps)
        if self.i < 1:
            raise ValidationError(f"adam step counter starts at 1, got {self.i}")


def _check_eta(eta):
    if not eta > 0:
        raise ValidationError(f"learning rate must be positive, got {eta}")


def _check_decay(beta, name):
    if not 0.0 <= beta < 1.0:
        raise ValidationError(f"{name} must lie in [0, 1), got {beta}")


def _check_eps(eps):
    if not eps > 0:
        raise ValidationError(f"eps must be positive, got {eps}")


def _buffer(existing, w):
    if existing is None:
        return np.zeros_like(w)
    existing = np.asarray(existing, dtype=float)
    if existing.shape != w.shape:
        raise ValidationError(
            f"optimizer buffer shape {existing.shape} does not match parameters {w.shape}"
        )
    return existing


def step(state: OptimizerState, w, g) -> tuple[np.ndarray, OptimizerState]:
    """One parameter update; returns (new w, new state)."""
    w = np.asarray(w, dtype=float)
    g = np.asarray(g, dtype=float)
    if w.shape != g.shape:
        raise ValidationError(f"gradient shape {g.shape} does not match parameters {w.shape}")
    if not np.isfinite(g).all():
        raise ValidationError("gradient contains non-finite entries")
    if isinstance(state, GD):
        return w - state.eta * g, state
    if isinstance(state, Momentum):
        m = state.beta * _buffer(state.m, w) - state.eta * g
        return w + m, replace(state, m=m)
    if isinstance(state, RMSProp):
        s = state.beta * _buffer(state.s, w) + (1.0 - state.beta) * g * g
        return w - state.eta * g / np.sqrt(s + state.eps), replace(state, s=s)
    if isinstance(state, Adam):
        m = state.beta1 * _buffer(state.m, w) + (1.0 - state.beta1) * g
        s = state.beta2 * _buffer(state.s, w) + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**state.i)
        s_hat = s / (1.0 - state.beta2**state.i)
        w_next = w - state.eta * m_hat / (np.sqrt(s_hat) + state.eps)
        return w_next, replace(state, m=m, s=s, i=state.i + 1)
    raise ValidationError(f"unknown optimizer state {state!r}")


@dataclass(frozen=True)
class BatchSchedule:
    batch_size: int
    epochs: int
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValidationError(f"batch size must be positive, got {self.batch_size}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be positive, got {self.epochs}")


def model_gradient(model: TrainablePredictor, X, Y, loss: LossSpec) -> np.ndarray:
    """Flat-parameter gradient of the loss for the built-in model kinds.

    Linear models chain the loss gradient with the feature matrix
    (dy/dw = Phi); networks use backprop.
    """
    if isinstance(model, MLP):
        return backprop(model, X, Y, loss)
    if isinstance(model, LinearModel):
        grad_pred, grad_w = loss_gradient(loss, Y, model.predict(X), model.get_params())
        Phi = feature_matrix(model.basis, X)
        grad = (Phi.T @ grad_pred.reshape(Phi.shape[0], -1)).ravel()
        if grad_w is not None:
            grad = grad + grad_w
        return grad
    raise ValidationError(f"no gradient rule for model {type(model).__name__}")


def minibatch_train(
    model: TrainablePredictor,
    d: Dataset,
    loss: LossSpec,
    opt: OptimizerState,
    sched: BatchSchedule,
    grad_fn=None,
) -> tuple[TrainablePredictor, np.ndarray]:
    """Epoch-based mini-batch training; returns (model, per-epoch loss history).

    Each epoch shuffles the rows (seeded), walks ceil(n_p / batch) batches
    (the last may be short) with one optimizer step per batch, then records
    the full-dataset loss. Training aborts with the last finite model if the
    loss ever turns non-finite. Deterministic given the schedule seed.

    ``grad_fn(model, X_batch, Y_batch) -> flat gradient`` defaults to
    ``model_gradient`` with the given loss.
    """
    if sched.batch_size > d.n_points:
        raise ValidationError(
            f"batch size {sched.batch_size} exceeds dataset size {d.n_points}"
        )
    if grad_fn is None:
        grad_fn = lambda m, Xb, Yb: model_gradient(m, Xb, Yb, loss)
    rng = np.random.default_rng(sched.shuffle_seed)
    X, Y = d.inputs, d.targets
    history = []
    last_finite = model
    for _ in range(sched.epochs):
        perm = rng.permutation(d.n_points)
        w = model.get_params()
        for start in range(0, d.n_points, sched.batch_size):
            batch = perm[start : start + sched.batch_size]
            g = grad_fn(model, X[batch], Y[batch])
            w, opt = step(opt, w, g)
            model = model.with_params(w)
        with np.errstate(over="ignore", invalid="ignore"):  # divergence is handled below
            j = loss_value(loss, Y, model.predict(X), model.get_params())
        if not np.isfinite(j):
            return last_finite, np.asarray(history)
        last_finite = model
        history.append(j)
    return model, np.asarray(history)
