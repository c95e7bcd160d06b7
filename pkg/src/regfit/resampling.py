"""Ensemble model assessment: bootstrap, bagged prediction, K-fold CV.

Bootstrap members use independent random substreams derived from
(seed, member index), so the results do not depend on evaluation order.
Two resampling modes exist: "split" draws a disjoint train/test partition
per member, "replacement" draws the training rows with replacement and
tests on the rows that were never drawn.

The bagged uncertainty at a point combines two independent contributions:
the noise floor estimated from the mean in-sample error, and the population
variance of the member predictions. Underfitting inflates the first term,
overfitting the second.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, split_indices
from .errors import ValidationError
from .losses import mse

_REDRAW_CAP = 100


@dataclass(frozen=True)
class EnsembleResult:
    """Per-member in/out-of-sample MSE plus the n_w x n_E weight population."""

    in_sample_mse: np.ndarray
    out_sample_mse: np.ndarray
    weight_population: np.ndarray

    def __post_init__(self):
        j_i = np.asarray(self.in_sample_mse, dtype=float)
        j_o = np.asarray(self.out_sample_mse, dtype=float)
        w = np.asarray(self.weight_population, dtype=float)
        if not (j_i >= 0).all() or not (j_o >= 0).all():
            raise ValidationError("MSE values must be nonnegative")
        if w.shape[1] != j_i.size or j_o.size != j_i.size:
            raise ValidationError("population column count must equal the member count")
        object.__setattr__(self, "in_sample_mse", j_i)
        object.__setattr__(self, "out_sample_mse", j_o)
        object.__setattr__(self, "weight_population", w)

    @property
    def n_members(self) -> int:
        return self.in_sample_mse.size


@dataclass(frozen=True)
class CVReport:
    """Per-fold out-of-sample MSE with its mean and (population) std."""

    per_fold_mse: np.ndarray
    mean: float
    std: float

    def __post_init__(self):
        folds = np.asarray(self.per_fold_mse, dtype=float)
        if folds.size < 2:
            raise ValidationError("cross-validation needs at least 2 folds")
        if not np.isclose(self.mean, folds.mean()) or not np.isclose(self.std, folds.std()):
            raise ValidationError("mean/std are inconsistent with the per-fold list")
        object.__setattr__(self, "per_fold_mse", folds)


def _member_indices(n_points, test_fraction, mode, rng):
    """One member's (train, test) rows under the requested resampling mode."""
    if mode == "split":
        idx = split_indices(n_points, test_fraction, rng)
        return idx.train, idx.test
    if mode == "replacement":
        n_test = int(np.rint(test_fraction * n_points))
        n_train = n_points - n_test
        if n_train < 1:
            raise ValidationError("test_fraction leaves an empty training set")
        for _ in range(_REDRAW_CAP):
            train = np.sort(rng.integers(0, n_points, size=n_train))
            test = np.setdiff1d(np.arange(n_points), train)
            if test.size:
                return train, test
        raise ValidationError(
            f"could not draw a member with a nonempty test set in {_REDRAW_CAP} tries"
        )
    raise ValidationError(f"mode must be 'split' or 'replacement', got {mode!r}")


def bootstrap_ensemble(
    d: Dataset,
    fit_fn,
    n_members: int,
    test_fraction: float = 0.3,
    mode: str = "split",
    seed: int = 0,
) -> EnsembleResult:
    """Resample, refit and score the model ``n_members`` times.

    ``fit_fn(train: Dataset) -> (flat weights, predictor)``. Each member
    records the in-sample MSE on its training rows and the out-of-sample
    MSE on its held-out rows; the flat weights populate one column of the
    returned matrix. Reproducible by seed.
    """
    if n_members < 1:
        raise ValidationError(f"need at least one member, got {n_members}")
    j_i = np.zeros(n_members)
    j_o = np.zeros(n_members)
    columns = []
    for j in range(n_members):
        rng = np.random.default_rng([seed, j])
        train_idx, test_idx = _member_indices(d.n_points, test_fraction, mode, rng)
        train, test = d.take(train_idx), d.take(test_idx)
        w, predictor = fit_fn(train)
        columns.append(np.asarray(w, dtype=float).ravel())
        j_i[j] = mse(train.targets, predictor.predict(train.inputs))
        j_o[j] = mse(test.targets, predictor.predict(test.inputs))
    return EnsembleResult(j_i, j_o, np.column_stack(columns))


def ensemble_predict(xg, weight_population, j_i_mean: float, predict_fn):
    """Bagged mean prediction and pointwise uncertainty.

    ``predict_fn(xg, w) -> per-point predictions`` is called once per
    population column; the uncertainty is sqrt(j_i_mean + Var_model) with
    Var_model the population variance of the member predictions
    (independence of the two contributions assumed).
    """
    if j_i_mean < 0:
        raise ValidationError(f"mean in-sample MSE must be nonnegative, got {j_i_mean}")
    W = np.asarray(weight_population, dtype=float)
    if W.ndim != 2 or W.shape[1] < 1:
        raise ValidationError("weight population must be a nonempty n_w x n_E matrix")
    members = [np.asarray(predict_fn(xg, W[:, j]), dtype=float) for j in range(W.shape[1])]
    y_pop = np.stack(members, axis=-1)
    y_mean = y_pop.mean(axis=-1)
    var_model = y_pop.std(axis=-1) ** 2
    return y_mean, np.sqrt(j_i_mean + var_model)


def kfold_indices(n_points: int, n_folds: int, seed: int = 0, shuffle: bool = True):
    """Partition rows into n_folds folds whose sizes differ by at most 1."""
    if not 2 <= n_folds <= n_points:
        raise ValidationError(f"fold count must lie in [2, {n_points}], got {n_folds}")
    rows = np.random.default_rng(seed).permutation(n_points) if shuffle else np.arange(n_points)
    return [np.sort(fold) for fold in np.array_split(rows, n_folds)]


def kfold_cv(d: Dataset, fit_fn, n_folds: int, seed: int = 0, shuffle: bool = True) -> CVReport:
    """K-fold cross-validation of ``fit_fn(train: Dataset) -> predictor``.

    Each fold serves as the test set exactly once; the report carries the
    per-fold out-of-sample MSE together with their mean and std. With
    n_folds = n_p this is leave-one-out.
    """
    folds = kfold_indices(d.n_points, n_folds, seed, shuffle)
    all_rows = np.arange(d.n_points)
    scores = []
    for fold in folds:
        train = d.take(np.setdiff1d(all_rows, fold))
        test = d.take(fold)
        predictor = fit_fn(train)
        scores.append(mse(test.targets, predictor.predict(test.inputs)))
    scores = np.asarray(scores)
    return CVReport(scores, float(scores.mean()), float(scores.std()))
