"""Dataset container, CSV ingestion, splitting, and synthetic data.

The CSV layout is fixed: a mandatory header whose columns are named
``x0..x{n_x-1}`` (inputs) and ``y0..y{n_y-1}`` (targets), comma separated,
UTF-8, '.' decimal point. Numeric output uses 17 significant digits so a
save/load round trip is lossless at double precision.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import ValidationError

# Constants of the synthetic "noisy curve with a gap and outliers" generator.
# All of them are fixed so that generated datasets are a pure function of
# (n_points, seed).
FIG_X_LO = -2.0
FIG_X_HI = 2.0
FIG_GAP = (0.25, 1.25)          # open interval that receives no samples
FIG_NOISE_STD = 0.4             # Gaussian noise on the targets
FIG_OUTLIER_RATE = 0.05         # fraction of rows replaced by outliers
FIG_OUTLIER_OFFSET = (2.5, 5.0) # |offset| range of an outlier, random sign


def _reference_curve(x: np.ndarray) -> np.ndarray:
    """Smooth ground-truth curve used by the synthetic generator."""
    return x**3 - x + 0.3 * np.sin(2.5 * x)


@runtime_checkable
class Predictor(Protocol):
    """Anything that maps an input matrix to an output matrix, row for row."""

    def predict(self, X: np.ndarray) -> np.ndarray: ...


@runtime_checkable
class TrainablePredictor(Predictor, Protocol):
    """A predictor whose behaviour is fully determined by a flat parameter
    vector; gradient-based training works on copies, never in place."""

    def get_params(self) -> np.ndarray: ...

    def with_params(self, w: np.ndarray) -> "TrainablePredictor": ...


@dataclass(frozen=True)
class Dataset:
    """Paired input/target matrices with row-aligned samples.

    ``inputs`` is n_p x n_x and ``targets`` is n_p x n_y. Both are stored as
    read-only float64 arrays; every entry must be finite and n_p >= 1.
    """

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        X = np.array(self.inputs, dtype=float, copy=True)
        Y = np.array(self.targets, dtype=float, copy=True)
        if X.ndim != 2 or Y.ndim != 2:
            raise ValidationError("inputs and targets must be 2-D matrices")
        if X.shape[0] != Y.shape[0]:
            raise ValidationError(
                f"row count mismatch: {X.shape[0]} inputs vs {Y.shape[0]} targets"
            )
        if X.shape[0] < 1:
            raise ValidationError("dataset needs at least one row")
        if not (np.isfinite(X).all() and np.isfinite(Y).all()):
            raise ValidationError("dataset contains non-finite entries")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", Y)

    @property
    def n_points(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.targets.shape[1]

    def take(self, indices) -> "Dataset":
        """Row subset (duplicates allowed, e.g. for resampling)."""
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.inputs[idx], self.targets[idx])


@dataclass(frozen=True)
class SplitIndices:
    """Row indices of a train/test split.

    For partition-style splits the two sides are disjoint and cover all
    rows; in bootstrap-with-replacement mode ``train`` may contain
    duplicates and ``test`` holds the rows that were never drawn.
    """

    train: np.ndarray
    test: np.ndarray


_COLUMN_RE = re.compile(r"([xy])(\d+)")


def _parse_header(header: list[str]) -> tuple[list[int], list[int]]:
    """Map header names to (input column positions, target column positions),
    each ordered by the numeric suffix."""
    x_cols: dict[int, int] = {}
    y_cols: dict[int, int] = {}
    for pos, name in enumerate(header):
        m = _COLUMN_RE.fullmatch(name.strip())
        if not m:
            raise ValidationError(f"unrecognized column name {name!r} in header")
        idx = int(m.group(2))
        side = x_cols if m.group(1) == "x" else y_cols
        if idx in side:
            raise ValidationError(f"duplicate column {name!r} in header")
        side[idx] = pos
    if not x_cols or not y_cols:
        raise ValidationError("header must contain at least one x and one y column")
    for side, label in ((x_cols, "x"), (y_cols, "y")):
        if sorted(side) != list(range(len(side))):
            raise ValidationError(f"{label} columns must be named {label}0..{label}{len(side) - 1}")
    return [x_cols[i] for i in range(len(x_cols))], [y_cols[i] for i in range(len(y_cols))]


def load_csv(path) -> Dataset:
    """Read a dataset from ``path``; see the module docstring for the format.

    Raises ValidationError on a missing file, malformed header, ragged rows
    or a non-numeric cell (the error names the offending data row).
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file, header expected") from None
        x_pos, y_pos = _parse_header(header)
        rows: list[list[float]] = []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}: row {row_no} has {len(row)} cells, expected {len(header)}"
                )
            values = []
            for pos, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise ValidationError(
                        f"{path}: non-numeric cell {cell!r} at row {row_no}, "
                        f"column {header[pos]!r}"
                    ) from None
                if not np.isfinite(v):
                    raise ValidationError(
                        f"{path}: non-finite value at row {row_no}, column {header[pos]!r}"
                    )
                values.append(v)
            rows.append(values)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    body = np.asarray(rows)
    return Dataset(body[:, x_pos], body[:, y_pos])


def load_inputs_csv(path) -> np.ndarray:
    """Read only the x-columns of a CSV file (y-columns, if any, are ignored).

    Used for prediction queries, which need no targets.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file, header expected") from None
        x_pos: dict[int, int] = {}
        for pos, name in enumerate(header):
            m = _COLUMN_RE.fullmatch(name.strip())
            if not m:
                raise ValidationError(f"unrecognized column name {name!r} in header")
            if m.group(1) == "x":
                x_pos[int(m.group(2))] = pos
        if sorted(x_pos) != list(range(len(x_pos))) or not x_pos:
            raise ValidationError("header must contain columns x0..x{n_x-1}")
        cols = [x_pos[i] for i in range(len(x_pos))]
        rows = []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            try:
                rows.append([float(row[c]) for c in cols])
            except (ValueError, IndexError):
                raise ValidationError(f"{path}: bad input row {row_no}") from None
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    X = np.asarray(rows)
    if not np.isfinite(X).all():
        raise ValidationError(f"{path}: non-finite input values")
    return X


def save_csv(d: Dataset, path) -> None:
    """Write ``d`` to ``path`` with 17 significant digits per value."""
    header = [f"x{i}" for i in range(d.n_inputs)] + [f"y{j}" for j in range(d.n_outputs)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for xi, yi in zip(d.inputs, d.targets):
            writer.writerow([format(v, ".17g") for v in (*xi, *yi)])


def split_indices(n_points: int, test_fraction: float, seed: int) -> SplitIndices:
    """Disjoint random row partition with |test| = round(test_fraction * n)."""
    if not 0.0 <= test_fraction < 1.0:
        raise ValidationError(f"test_fraction must lie in [0, 1), got {test_fraction}")
    n_test = int(np.rint(test_fraction * n_points))
    if n_points - n_test < 1:
        raise ValidationError(
            f"test_fraction={test_fraction} leaves an empty training set for n={n_points}"
        )
    perm = np.random.default_rng(seed).permutation(n_points)
    return SplitIndices(train=np.sort(perm[n_test:]), test=np.sort(perm[:n_test]))


def train_test_split(d: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset | None]:
    """Split ``d`` into disjoint train/test datasets; same seed, same split.

    Returns ``(train, test)``; ``test`` is None when the fraction rounds to
    an empty test set.
    """
    idx = split_indices(d.n_points, test_fraction, seed)
    test = d.take(idx.test) if idx.test.size else None
    return d.take(idx.train), test


def generate_fig2_like(n_points: int, seed: int) -> Dataset:
    """Synthetic 1-D dataset: noisy smooth curve, a sample-free gap, outliers.

    Inputs are drawn uniformly over [FIG_X_LO, FIG_X_HI] excluding the open
    gap interval, then sorted. Targets are the reference curve plus Gaussian
    noise; round(FIG_OUTLIER_RATE * n) rows are replaced by large-deviation
    outliers. Pure function of (n_points, seed).
    """
    if n_points < 10:
        raise ValidationError(f"need at least 10 points, got {n_points}")
    rng = np.random.default_rng(seed)
    gap_lo, gap_hi = FIG_GAP
    gap_len = gap_hi - gap_lo
    u = rng.uniform(FIG_X_LO, FIG_X_HI - gap_len, size=n_points)
    x = np.sort(np.where(u >= gap_lo, u + gap_len, u))
    y = _reference_curve(x) + FIG_NOISE_STD * rng.standard_normal(n_points)
    n_out = int(np.rint(FIG_OUTLIER_RATE * n_points))
    if n_out:
        rows = rng.choice(n_points, size=n_out, replace=False)
        offsets = rng.uniform(*FIG_OUTLIER_OFFSET, size=n_out)
        signs = np.where(rng.random(n_out) < 0.5, -1.0, 1.0)
        y[rows] = _reference_curve(x[rows]) + signs * offsets
    return Dataset(x[:, None], y[:, None])
