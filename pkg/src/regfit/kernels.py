"""Non-parametric predictors: interpolation, kNN, kernel ridge, GP posterior.

Kernel predictors keep the training inputs; predictions are
K(query, train) @ dual_coef with dual_coef = (K(train, train) + reg I)^-1 Y,
obtained through a symmetric positive-definite factorization. The Gaussian
process posterior conditions a zero-mean joint Gaussian on the training
targets:

    mean = K(q, t) (K(t, t) + noise I)^-1 Y
    cov  = K(q, q) - K(q, t) (K(t, t) + noise I)^-1 K(t, q)

where q are query inputs and t training inputs. Tiny negative posterior
eigenvalues produced by roundoff are clamped to zero.

Note on naming: the scalar Tikhonov regularizer is ``regularizer`` and the
per-training-point coefficient matrix is ``dual_coef``; the two are distinct
quantities even though the literature tends to reuse one Greek letter for
both.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .data import Dataset
from .errors import NumericalError, ValidationError

# jitter added to a kernel diagonal when an unregularized factorization fails
DIAGONAL_JITTER = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """Marker base class for kernel functions."""


@dataclass(frozen=True)
class GaussianKernel(KernelSpec):
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class LinearKernel(KernelSpec):
    pass


@dataclass(frozen=True)
class PolynomialKernel(KernelSpec):
    degree: int
    offset: float = 0.0

    def __post_init__(self):
        if self.degree < 1:
            raise ValidationError(f"degree must be >= 1, got {self.degree}")
        if self.offset < 0:
            raise ValidationError(f"offset must be nonnegative, got {self.offset}")


def kernel_matrix(spec: KernelSpec, X1, X2) -> np.ndarray:
    """Pairwise kernel evaluations, an n1 x n2 matrix.

    Gaussian: exp(-gamma ||xi - xj||^2). Linear: <xi, xj>. Polynomial:
    (<xi, xj> + offset)^degree. Symmetric whenever X1 is X2.
    """
    A = np.atleast_2d(np.asarray(X1, dtype=float))
    B = np.atleast_2d(np.asarray(X2, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValidationError(f"input widths differ: {A.shape[1]} vs {B.shape[1]}")
    if isinstance(spec, GaussianKernel):
        diff = A[:, None, :] - B[None, :, :]
        return np.exp(-spec.gamma * np.sum(diff * diff, axis=2))
    if isinstance(spec, LinearKernel):
        return A @ B.T
    if isinstance(spec, PolynomialKernel):
        return (A @ B.T + spec.offset) ** spec.degree
    raise ValidationError(f"unknown kernel {spec!r}")


def kernel_to_dict(spec: KernelSpec) -> dict:
    if isinstance(spec, GaussianKernel):
        return {"type": "gaussian", "gamma": spec.gamma}
    if isinstance(spec, LinearKernel):
        return {"type": "linear"}
    if isinstance(spec, PolynomialKernel):
        return {"type": "polynomial", "degree": spec.degree, "offset": spec.offset}
    raise ValidationError(f"unknown kernel {spec!r}")


def kernel_from_dict(doc: dict) -> KernelSpec:
    kind = doc["type"]
    if kind == "gaussian":
        return GaussianKernel(float(doc["gamma"]))
    if kind == "linear":
        return LinearKernel()
    if kind == "polynomial":
        return PolynomialKernel(int(doc["degree"]), float(doc["offset"]))
    raise ValidationError(f"unknown kernel type {kind!r}")


def _factor_regularized_kernel(K: np.ndarray, reg: float):
    """Cholesky of K + reg I; retries once with a tiny jitter when reg = 0."""
    A = K + reg * np.eye(K.shape[0])
    try:
        return cho_factor(A, lower=True)
    except LinAlgError:
        if reg == 0.0:
            try:
                return cho_factor(A + DIAGONAL_JITTER * np.eye(K.shape[0]), lower=True)
            except LinAlgError:
                pass
        smallest = float(np.linalg.eigvalsh(A)[0])
        raise NumericalError(
            f"kernel matrix plus {reg} I is not positive-definite "
            f"(smallest pivot/eigenvalue {smallest:.3e})"
        ) from None


@dataclass(frozen=True)
class KRRModel:
    """Kernel ridge regression state: kernel, stored training inputs,
    per-training-point dual coefficients, and the scalar regularizer."""

    kernel: KernelSpec
    train_inputs: np.ndarray
    dual_coef: np.ndarray
    regularizer: float

    def __post_init__(self):
        X = np.atleast_2d(np.array(self.train_inputs, dtype=float, copy=True))
        A = np.array(self.dual_coef, dtype=float, copy=True)
        if A.ndim == 1:
            A = A[:, None]
        if A.shape[0] != X.shape[0]:
            raise ValidationError(
                f"dual coefficient rows ({A.shape[0]}) must equal stored "
                f"training rows ({X.shape[0]})"
            )
        X.setflags(write=False)
        A.setflags(write=False)
        object.__setattr__(self, "train_inputs", X)
        object.__setattr__(self, "dual_coef", A)

    def predict(self, X) -> np.ndarray:
        return kernel_matrix(self.kernel, X, self.train_inputs) @ self.dual_coef

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "krr",
            "kernel": kernel_to_dict(self.kernel),
            "train_inputs": self.train_inputs.tolist(),
            "dual_coefficients": self.dual_coef.tolist(),
            "regularizer": self.regularizer,
        }

    @staticmethod
    def from_dict(doc: dict) -> "KRRModel":
        return KRRModel(
            kernel_from_dict(doc["kernel"]),
            np.asarray(doc["train_inputs"]),
            np.asarray(doc["dual_coefficients"]),
            float(doc["regularizer"]),
        )


def krr_fit(d: Dataset, kernel: KernelSpec, alpha: float) -> KRRModel:
    """Dual coefficients (K + alpha I)^-1 Y via Cholesky; alpha >= 0."""
    if alpha < 0:
        raise ValidationError(f"regularizer must be nonnegative, got {alpha}")
    K = kernel_matrix(kernel, d.inputs, d.inputs)
    factor = _factor_regularized_kernel(K, alpha)
    return KRRModel(kernel, d.inputs, cho_solve(factor, d.targets), alpha)


def krr_predict(model: KRRModel, X) -> np.ndarray:
    return model.predict(X)


def woodbury_discrepancy(Phi, alpha: float) -> float:
    """Max-abs difference between the two matrix-inversion-lemma forms
    (Phi^T Phi + a I_b)^-1 Phi^T and Phi^T (Phi Phi^T + a I_n)^-1,
    each evaluated with its own factorized solve."""
    if not alpha > 0:
        raise ValidationError(f"alpha must be positive, got {alpha}")
    Phi = np.atleast_2d(np.asarray(Phi, dtype=float))
    n, b = Phi.shape
    primal = cho_solve(cho_factor(Phi.T @ Phi + alpha * np.eye(b), lower=True), Phi.T)
    dual = cho_solve(cho_factor(Phi @ Phi.T + alpha * np.eye(n), lower=True), Phi).T
    return float(np.max(np.abs(primal - dual)))


@dataclass(frozen=True)
class GPRPosterior:
    """Gaussian posterior over query outputs: mean, covariance, and the
    training-noise variance it was conditioned with."""

    mean: np.ndarray
    covariance: np.ndarray
    noise_variance: float

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float, copy=True)
        cov = np.array(self.covariance, dtype=float, copy=True)
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise ValidationError(
                f"covariance shape {cov.shape} does not match {mean.shape[0]} queries"
            )
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def variances(self) -> np.ndarray:
        # floor at zero: re-symmetrization roundoff can leave -1e-32-level dust
        return np.maximum(np.diag(self.covariance), 0.0)


def _clamp_negative_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Symmetrize, then zero out tiny negative eigenvalues from roundoff."""
    sym = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(sym)
    if vals[0] >= 0.0:
        return sym
    vals = np.maximum(vals, 0.0)
    return (vecs * vals) @ vecs.T


def gpr_posterior(
    d: Dataset | None, X, kernel: KernelSpec, noise_variance: float
) -> GPRPosterior:
    """Condition a zero-mean Gaussian process on the training data.

    With ``d`` None, the posterior is the prior: zero mean and covariance
    K(X, X). ``noise_variance`` is added to the training-block diagonal
    only, so the posterior describes the latent function at the queries.
    """
    if noise_variance < 0:
        raise ValidationError(f"noise variance must be nonnegative, got {noise_variance}")
    Xq = np.atleast_2d(np.asarray(X, dtype=float))
    K_qq = kernel_matrix(kernel, Xq, Xq)
    if d is None:
        return GPRPosterior(np.zeros((Xq.shape[0], 1)), K_qq, noise_variance)
    K_tt = kernel_matrix(kernel, d.inputs, d.inputs)
    K_qt = kernel_matrix(kernel, Xq, d.inputs)
    factor = _factor_regularized_kernel(K_tt, noise_variance)
    mean = K_qt @ cho_solve(factor, d.targets)
    cov = K_qq - K_qt @ cho_solve(factor, K_qt.T)
    return GPRPosterior(mean, _clamp_negative_eigenvalues(cov), noise_variance)


@dataclass(frozen=True)
class GPRModel:
    """A fitted Gaussian-process regressor (training inputs, dual
    coefficients, noise variance) that can be stored and reloaded; mean
    predictions reuse the dual coefficients, variances redo the
    training-block solve."""

    kernel: KernelSpec
    train_inputs: np.ndarray
    dual_coef: np.ndarray
    noise_variance: float

    def __post_init__(self):
        X = np.atleast_2d(np.array(self.train_inputs, dtype=float, copy=True))
        A = np.array(self.dual_coef, dtype=float, copy=True)
        if A.ndim == 1:
            A = A[:, None]
        if A.shape[0] != X.shape[0]:
            raise ValidationError("dual coefficient rows must equal stored training rows")
        X.setflags(write=False)
        A.setflags(write=False)
        object.__setattr__(self, "train_inputs", X)
        object.__setattr__(self, "dual_coef", A)

    def predict(self, X) -> np.ndarray:
        return kernel_matrix(self.kernel, X, self.train_inputs) @ self.dual_coef

    def predict_with_variance(self, X) -> tuple[np.ndarray, np.ndarray]:
        Xq = np.atleast_2d(np.asarray(X, dtype=float))
        K_tt = kernel_matrix(self.kernel, self.train_inputs, self.train_inputs)
        K_qt = kernel_matrix(self.kernel, Xq, self.train_inputs)
        factor = _factor_regularized_kernel(K_tt, self.noise_variance)
        prior = np.diag(kernel_matrix(self.kernel, Xq, Xq)).copy()
        var = prior - np.sum(K_qt * cho_solve(factor, K_qt.T).T, axis=1)
        return self.predict(Xq), np.maximum(var, 0.0)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "gpr",
            "kernel": kernel_to_dict(self.kernel),
            "train_inputs": self.train_inputs.tolist(),
            "dual_coefficients": self.dual_coef.tolist(),
            "noise_variance": self.noise_variance,
        }

    @staticmethod
    def from_dict(doc: dict) -> "GPRModel":
        return GPRModel(
            kernel_from_dict(doc["kernel"]),
            np.asarray(doc["train_inputs"]),
            np.asarray(doc["dual_coefficients"]),
            float(doc["noise_variance"]),
        )


def gpr_fit(d: Dataset, kernel: KernelSpec, noise_variance: float) -> GPRModel:
    """Precompute the dual coefficients of the posterior mean."""
    if noise_variance < 0:
        raise ValidationError(f"noise variance must be nonnegative, got {noise_variance}")
    K_tt = kernel_matrix(kernel, d.inputs, d.inputs)
    factor = _factor_regularized_kernel(K_tt, noise_variance)
    return GPRModel(kernel, d.inputs, cho_solve(factor, d.targets), noise_variance)


def interp1_linear(x_train, y_train, xq: float) -> float:
    """Barycentric linear interpolation between the two bracketing samples.

    ``x_train`` must be strictly increasing and ``xq`` inside its range;
    extrapolation is refused.
    """
    x = np.asarray(x_train, dtype=float)
    y = np.asarray(y_train, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValidationError("x_train and y_train must be matching 1-D arrays")
    if np.any(np.diff(x) <= 0):
        raise ValidationError("x_train must be strictly increasing (no duplicates)")
    if not (x[0] <= xq <= x[-1]):
        raise ValidationError(f"query {xq} outside the data range [{x[0]}, {x[-1]}]")
    hi = int(np.searchsorted(x, xq, side="left"))
    if x[hi] == xq:
        return float(y[hi])
    lo = hi - 1
    w_lo = (x[hi] - xq) / (x[hi] - x[lo])
    w_hi = (xq - x[lo]) / (x[hi] - x[lo])
    return float(w_lo * y[lo] + w_hi * y[hi])


def knn_predict(d: Dataset, xq, k: int) -> np.ndarray:
    """Unweighted mean of the k nearest training targets (Euclidean
    distance); distance ties go to the lower row index."""
    if not 1 <= k <= d.n_points:
        raise ValidationError(f"k must lie in [1, {d.n_points}], got {k}")
    q = np.asarray(xq, dtype=float).reshape(1, -1)
    if q.shape[1] != d.n_inputs:
        raise ValidationError(f"query width {q.shape[1]} does not match {d.n_inputs}")
    dist = np.sqrt(np.sum((d.inputs - q) ** 2, axis=1))
    order = np.argsort(dist, kind="stable")  # stable sort => lower index wins ties
    return d.targets[order[:k]].mean(axis=0)
