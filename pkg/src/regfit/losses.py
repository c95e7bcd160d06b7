"""Data-driven cost functions: values and (sub)gradients.

Every loss is reduced by the mean over samples (factor 1/n_p), so penalty
strengths keep a scale-stable meaning across dataset sizes. Subgradients at
the nondifferentiable points (the epsilon-tube boundary, w = 0 for the l1
penalty) are fixed to 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import NumericalError, ValidationError


@dataclass(frozen=True)
class LossSpec:
    """Marker base class; concrete variants below."""


@dataclass(frozen=True)
class MSE(LossSpec):
    pass


@dataclass(frozen=True)
class WeightedMSE(LossSpec):
    """Quadratic form weighted by the inverse of a SPD covariance matrix."""

    covariance: np.ndarray

    def __post_init__(self):
        S = np.array(self.covariance, dtype=float, copy=True)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValidationError("covariance must be square")
        if not np.allclose(S, S.T, atol=1e-12 * max(1.0, np.abs(S).max())):
            raise ValidationError("covariance must be symmetric")
        S.setflags(write=False)
        object.__setattr__(self, "covariance", S)
        # positive definiteness is verified by factorization, not eigenvalues
        object.__setattr__(self, "_chol", _spd_factor(S, "covariance"))


@dataclass(frozen=True)
class Huber(LossSpec):
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValidationError(f"Huber delta must be positive, got {self.delta}")


@dataclass(frozen=True)
class EpsilonInsensitive(LossSpec):
    epsilon: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValidationError(f"epsilon must be nonnegative, got {self.epsilon}")


@dataclass(frozen=True)
class Penalized(LossSpec):
    """A base loss plus alpha * ||w||_2^2 (norm='l2') or alpha * ||w||_1 ('l1')."""

    base: LossSpec
    alpha: float
    norm: str = "l2"

    def __post_init__(self):
        if self.alpha < 0:
            raise ValidationError(f"penalty alpha must be nonnegative, got {self.alpha}")
        if self.norm not in ("l1", "l2"):
            raise ValidationError(f"penalty norm must be 'l1' or 'l2', got {self.norm!r}")
        if isinstance(self.base, Penalized):
            raise ValidationError("nested penalties are not supported")


def _spd_factor(S: np.ndarray, what: str):
    try:
        return cho_factor(S, lower=True)
    except LinAlgError as exc:
        raise NumericalError(f"{what} is not positive-definite: {exc}") from exc


def _check_shapes(y_true: np.ndarray, y_pred: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.atleast_1d(np.asarray(y_true, dtype=float))
    b = np.atleast_1d(np.asarray(y_pred, dtype=float))
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def _n_samples(a: np.ndarray) -> int:
    return a.shape[0]


def mse(y_true, y_pred) -> float:
    """(1/n_p) * sum of squared row errors; zero iff the arguments agree."""
    a, b = _check_shapes(y_true, y_pred)
    e = b - a
    return float(np.sum(e * e) / _n_samples(a))


def weighted_mse(y_true, y_pred, covariance) -> float:
    """(1/n_p) * e^T S^-1 e, computed through a Cholesky solve.

    ``covariance`` may be a matrix or a prebuilt WeightedMSE spec; with the
    identity matrix this reduces exactly to ``mse``.
    """
    spec = covariance if isinstance(covariance, WeightedMSE) else WeightedMSE(covariance)
    a, b = _check_shapes(y_true, y_pred)
    e = (b - a).reshape(_n_samples(a), -1)
    if spec.covariance.shape[0] != e.shape[0]:
        raise ValidationError(
            f"covariance is {spec.covariance.shape[0]}x{spec.covariance.shape[0]}, "
            f"residual has {e.shape[0]} rows"
        )
    solved = cho_solve(spec._chol, e)
    return float(np.sum(e * solved) / e.shape[0])


def huber(e, delta: float) -> float:
    """Mean Huber loss of a residual vector.

    Per sample: e^2/2 inside |e| <= delta, delta*(|e| - delta/2) outside;
    value and first derivative are continuous at the branch point.
    """
    if not delta > 0:
        raise ValidationError(f"Huber delta must be positive, got {delta}")
    e = np.asarray(e, dtype=float)
    ae = np.abs(e)
    per = np.where(ae <= delta, 0.5 * e * e, delta * (ae - 0.5 * delta))
    return float(np.mean(per))


def eps_insensitive(e, epsilon: float) -> float:
    """Mean epsilon-insensitive loss: zero inside the tube, |e| - eps outside."""
    if epsilon < 0:
        raise ValidationError(f"epsilon must be nonnegative, got {epsilon}")
    ae = np.abs(np.asarray(e, dtype=float))
    return float(np.mean(np.maximum(ae - epsilon, 0.0)))


def penalized(base_value: float, w, alpha: float, norm: str = "l2") -> float:
    """base_value + alpha * ||w||_2^2 or + alpha * ||w||_1."""
    if alpha < 0:
        raise ValidationError(f"penalty alpha must be nonnegative, got {alpha}")
    w = np.asarray(w, dtype=float)
    if norm == "l2":
        return float(base_value + alpha * np.sum(w * w))
    if norm == "l1":
        return float(base_value + alpha * np.sum(np.abs(w)))
    raise ValidationError(f"penalty norm must be 'l1' or 'l2', got {norm!r}")


def loss_value(spec: LossSpec, y_true, y_pred, w=None) -> float:
    """Evaluate any LossSpec, including the penalty term when w is given."""
    if isinstance(spec, Penalized):
        base = loss_value(spec.base, y_true, y_pred)
        if w is None:
            return base
        return penalized(base, w, spec.alpha, spec.norm)
    if isinstance(spec, MSE):
        return mse(y_true, y_pred)
    if isinstance(spec, WeightedMSE):
        return weighted_mse(y_true, y_pred, spec)
    a, b = _check_shapes(y_true, y_pred)
    if isinstance(spec, Huber):
        return huber(b - a, spec.delta)
    if isinstance(spec, EpsilonInsensitive):
        return eps_insensitive(b - a, spec.epsilon)
    raise ValidationError(f"unknown loss spec {spec!r}")


def loss_gradient(spec: LossSpec, y_true, y_pred, w=None):
    """Gradient of the loss with respect to the predictions, and the penalty
    gradient with respect to w (None when spec carries no penalty).

    MSE: (2/n_p)(y_pred - y_true). Huber: the clipped derivative, saturating
    at +-delta. Epsilon-insensitive: the subgradient, 0 inside the tube and
    at the kink, +-1 outside (all divided by n_p). The l1 penalty subgradient
    is alpha * sign(w), 0 at 0.
    """
    if isinstance(spec, Penalized):
        grad_pred, _ = loss_gradient(spec.base, y_true, y_pred)
        if w is None:
            return grad_pred, None
        w = np.asarray(w, dtype=float)
        if spec.norm == "l2":
            grad_w = 2.0 * spec.alpha * w
        else:
            grad_w = spec.alpha * np.sign(w)
        return grad_pred, grad_w
    a, b = _check_shapes(y_true, y_pred)
    e = b - a
    n = _n_samples(a)
    if isinstance(spec, MSE):
        return (2.0 / n) * e, None
    if isinstance(spec, WeightedMSE):
        e2 = e.reshape(n, -1)
        g = (2.0 / n) * cho_solve(spec._chol, e2)
        return g.reshape(e.shape), None
    if isinstance(spec, Huber):
        return (1.0 / n) * np.clip(e, -spec.delta, spec.delta), None
    if isinstance(spec, EpsilonInsensitive):
        g = np.where(np.abs(e) > spec.epsilon, np.sign(e), 0.0)
        return (1.0 / n) * g, None
    raise ValidationError(f"unknown loss spec {spec!r}")


def parse_loss_spec(text: str) -> LossSpec:
    """Parse the CLI loss syntax: mse | wmse | huber:d | eps:e | ridge:a | lasso:a.

    ``wmse`` uses the identity covariance (the CLI defines no matrix source),
    which makes it equivalent to plain mse.
    """
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name == "mse":
        return MSE()
    if name == "wmse":
        return MSE()  # identity covariance; see docstring
    try:
        if name == "huber":
            return Huber(float(arg))
        if name == "eps":
            return EpsilonInsensitive(float(arg))
        if name == "ridge":
            return Penalized(MSE(), float(arg), "l2")
        if name == "lasso":
            return Penalized(MSE(), float(arg), "l1")
    except ValueError:
        raise ValidationError(f"bad numeric parameter in loss spec {text!r}") from None
    raise ValidationError(f"unknown loss {text!r}")
