"""Linear-in-parameters regression on explicit feature matrices.

Two basis families are provided. Polynomial features follow the
highest-power-first convention, so the degree-3 row for a scalar x is
[x^3, x^2, x, 1] and the weight layout matches numpy's polyfit. Gaussian
radial bases are exp(-c_k^2 * ||x - x_c,k||^2) with per-basis shape
factors c_k.

Ridge weights come from the normal equations (Phi^T Phi + alpha I) W =
Phi^T Y solved through a symmetric positive-definite factorization; the
explicit inverse is never formed and one solve covers all output columns.
A condition-number warning is emitted above 1e12.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .data import Dataset
from .errors import NumericalError, ValidationError

CONDITION_WARN_THRESHOLD = 1e12


@dataclass(frozen=True)
class BasisSpec:
    """Marker base class for feature-matrix builders."""


@dataclass(frozen=True)
class Polynomial(BasisSpec):
    degree: int

    def __post_init__(self):
        if self.degree < 0:
            raise ValidationError(f"polynomial degree must be >= 0, got {self.degree}")

    @property
    def n_basis(self) -> int:
        return self.degree + 1


@dataclass(frozen=True)
class GaussianRBF(BasisSpec):
    """Gaussian bumps centred on the rows of ``centers`` (n_b x n_x)."""

    centers: np.ndarray
    shapes: np.ndarray

    def __post_init__(self):
        C = np.atleast_2d(np.array(self.centers, dtype=float, copy=True))
        s = np.atleast_1d(np.array(self.shapes, dtype=float, copy=True))
        if s.size == 1:
            s = np.full(C.shape[0], float(s[0]))
        if s.shape != (C.shape[0],):
            raise ValidationError(
                f"need one shape factor per center: {s.shape} vs {C.shape[0]} centers"
            )
        if not np.isfinite(C).all():
            raise ValidationError("centers must be finite")
        if not (s > 0).all():
            raise ValidationError("shape factors must be positive")
        C.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "centers", C)
        object.__setattr__(self, "shapes", s)

    @property
    def n_basis(self) -> int:
        return self.centers.shape[0]


def default_rbf_shapes(centers) -> np.ndarray:
    """Shape factors c_k = 1 / (2 * median nearest-center distance)."""
    C = np.atleast_2d(np.asarray(centers, dtype=float))
    if C.shape[0] < 2:
        raise ValidationError("need at least two centers to infer a shape factor")
    diff = C[:, None, :] - C[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    np.fill_diagonal(dist, np.inf)
    c = 1.0 / (2.0 * np.median(dist.min(axis=1)))
    return np.full(C.shape[0], c)


def feature_matrix(basis: BasisSpec, X) -> np.ndarray:
    """Evaluate the basis at the rows of X, one column per basis element."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not np.isfinite(X).all():
        raise ValidationError("inputs must be finite")
    if isinstance(basis, Polynomial):
        if X.shape[1] != 1:
            raise ValidationError(
                f"polynomial basis needs scalar inputs, got {X.shape[1]} columns"
            )
        x = X[:, 0]
        return np.vander(x, basis.degree + 1)  # highest power first
    if isinstance(basis, GaussianRBF):
        if X.shape[1] != basis.centers.shape[1]:
            raise ValidationError(
                f"input width {X.shape[1]} does not match centers "
                f"width {basis.centers.shape[1]}"
            )
        diff = X[:, None, :] - basis.centers[None, :, :]
        sq = np.sum(diff * diff, axis=2)
        return np.exp(-(basis.shapes**2) * sq)
    raise ValidationError(f"unknown basis {basis!r}")


@dataclass(frozen=True)
class LinearModel:
    """A basis plus an n_b x n_y weight matrix; predictions are Phi(X) W."""

    basis: BasisSpec
    weights: np.ndarray

    def __post_init__(self):
        W = np.array(self.weights, dtype=float, copy=True)
        if W.ndim == 1:
            W = W[:, None]
        n_b = self.basis.n_basis
        if W.shape[0] != n_b:
            raise ValidationError(
                f"weight rows ({W.shape[0]}) must equal basis size ({n_b})"
            )
        W.setflags(write=False)
        object.__setattr__(self, "weights", W)

    def predict(self, X) -> np.ndarray:
        return feature_matrix(self.basis, X) @ self.weights

    def get_params(self) -> np.ndarray:
        return self.weights.ravel().copy()

    def with_params(self, w) -> "LinearModel":
        w = np.asarray(w, dtype=float)
        if w.size != self.weights.size:
            raise ValidationError(
                f"parameter vector has {w.size} entries, expected {self.weights.size}"
            )
        return LinearModel(self.basis, w.reshape(self.weights.shape))

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "linear",
            "basis": basis_to_dict(self.basis),
            "weights": self.weights.tolist(),
        }

    @staticmethod
    def from_dict(doc: dict) -> "LinearModel":
        return LinearModel(basis_from_dict(doc["basis"]), np.asarray(doc["weights"]))


def basis_to_dict(basis: BasisSpec) -> dict:
    if isinstance(basis, Polynomial):
        return {"type": "polynomial", "degree": basis.degree}
    if isinstance(basis, GaussianRBF):
        return {
            "type": "gaussian_rbf",
            "centers": basis.centers.tolist(),
            "shapes": basis.shapes.tolist(),
        }
    raise ValidationError(f"unknown basis {basis!r}")


def basis_from_dict(doc: dict) -> BasisSpec:
    if doc["type"] == "polynomial":
        return Polynomial(int(doc["degree"]))
    if doc["type"] == "gaussian_rbf":
        return GaussianRBF(np.asarray(doc["centers"]), np.asarray(doc["shapes"]))
    raise ValidationError(f"unknown basis type {doc['type']!r}")


def predict(model: LinearModel, X) -> np.ndarray:
    return model.predict(X)


def model_param_jacobian(model: LinearModel, X) -> np.ndarray:
    """d y_hat / d w for a linear model is the feature matrix itself."""
    return feature_matrix(model.basis, X)


def ridge_solve(Phi: np.ndarray, Y: np.ndarray, alpha: float) -> np.ndarray:
    """Solve (Phi^T Phi + alpha I) W = Phi^T Y for W via Cholesky."""
    if alpha < 0:
        raise ValidationError(f"ridge alpha must be nonnegative, got {alpha}")
    Phi = np.asarray(Phi, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Phi.shape[0] != Y.shape[0]:
        raise ValidationError(f"row mismatch: {Phi.shape[0]} features vs {Y.shape[0]} targets")
    A = Phi.T @ Phi + alpha * np.eye(Phi.shape[1])
    cond = np.linalg.cond(A)
    if cond > CONDITION_WARN_THRESHOLD:
        warnings.warn(
            f"normal matrix condition number {cond:.2e} exceeds "
            f"{CONDITION_WARN_THRESHOLD:.0e}; weights may be inaccurate",
            RuntimeWarning,
            stacklevel=2,
        )
    try:
        factor = cho_factor(A, lower=True)
    except LinAlgError as exc:
        raise NumericalError(
            f"normal matrix is singular at alpha={alpha} "
            f"(condition estimate {cond:.2e})"
        ) from exc
    return cho_solve(factor, Phi.T @ Y)


def ridge_fit(d: Dataset, basis: BasisSpec, alpha: float) -> LinearModel:
    """Closed-form ridge regression; alpha = 0 is plain least squares."""
    Phi = feature_matrix(basis, d.inputs)
    return LinearModel(basis, ridge_solve(Phi, d.targets, alpha))


def soft_threshold(z, t: float) -> np.ndarray:
    """sign(z) * max(|z| - t, 0), the proximal map of t * ||.||_1."""
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _largest_eigenvalue(A: np.ndarray, iters: int = 200, tol: float = 1e-12) -> float:
    """Power iteration on a symmetric PSD matrix, deterministic start."""
    v = np.ones(A.shape[0]) / np.sqrt(A.shape[0])
    lam = 0.0
    for _ in range(iters):
        Av = A @ v
        norm = np.linalg.norm(Av)
        if norm == 0.0:
            return 0.0
        v_next = Av / norm
        lam_next = float(v_next @ A @ v_next)
        if abs(lam_next - lam) <= tol * max(1.0, abs(lam_next)):
            return lam_next
        v, lam = v_next, lam_next
    return lam


def lasso_objective(Phi: np.ndarray, Y: np.ndarray, W: np.ndarray, alpha: float) -> float:
    resid = Y - Phi @ W
    return float(np.sum(resid * resid) / Phi.shape[0] + alpha * np.sum(np.abs(W)))


def lasso_fit(
    d: Dataset,
    basis: BasisSpec,
    alpha: float,
    max_iters: int = 5000,
    tol: float = 1e-10,
) -> LinearModel:
    """l1-penalized least squares by proximal gradient descent.

    Minimizes (1/n_p)||Y - Phi W||^2 + alpha ||W||_1 with step size 1/L,
    L the largest eigenvalue of (2/n_p) Phi^T Phi (power iteration), and
    the soft-threshold prox. Stops when the largest parameter change drops
    below ``tol``; on hitting ``max_iters`` first, the best iterate is
    returned and a RuntimeWarning is emitted.
    """
    if alpha < 0:
        raise ValidationError(f"lasso alpha must be nonnegative, got {alpha}")
    Phi = feature_matrix(basis, d.inputs)
    Y = d.targets
    n = Phi.shape[0]
    L = _largest_eigenvalue((2.0 / n) * (Phi.T @ Phi))
    if L <= 0:
        raise NumericalError("feature matrix has zero curvature; cannot pick a step size")
    step = 1.0 / L
    W = np.zeros((Phi.shape[1], Y.shape[1]))
    converged = False
    for _ in range(max_iters):
        grad = (2.0 / n) * (Phi.T @ (Phi @ W - Y))
        W_next = soft_threshold(W - step * grad, alpha * step)
        if np.max(np.abs(W_next - W)) < tol:
            W = W_next
            converged = True
            break
        W = W_next
    if not converged:
        warnings.warn(
            f"lasso did not converge within {max_iters} iterations "
            f"(tol={tol}); returning the last iterate",
            RuntimeWarning,
            stacklevel=2,
        )
    return LinearModel(basis, W)
