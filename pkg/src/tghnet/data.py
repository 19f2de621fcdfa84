"""CSV ingestion, split management, and feature standardization.

The one ingestion format is headed CSV with decimal cells (UTF-8).  Rows
whose target cell is empty or non-finite are dropped and counted; a bad
feature cell is an error with row/column context, so an ingested dataset
never contains NaN.  Re-emitting a dataset with write_csv reproduces the
parsed numbers bit-exactly (shortest round-trip float formatting).

Split labels are "train" / "val" / "test".  The fraction rule shuffles
with a seeded generator (test left empty); the by-column-values rule
assigns val/test by exact value match with the remainder as train.
Standardization statistics come from the training split only and the
target is never standardized — predictions stay in target units.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError
from .nn.persist import Standardization

SPLIT_LABELS = ("train", "val", "test")


@dataclass
class Dataset:
    """Feature matrix with named columns, target vector, and split labels."""

    x: np.ndarray
    y: np.ndarray
    columns: tuple[str, ...]
    target: str
    split: np.ndarray | None = None
    n_dropped: int = 0
    standardization: Standardization | None = None

    def __post_init__(self):
        if self.x.ndim != 2 or len(self.y) != self.x.shape[0]:
            raise DataError("feature matrix and target lengths disagree")
        if len(self.columns) != self.x.shape[1]:
            raise DataError("column names and feature matrix width disagree")

    def __len__(self) -> int:
        return self.x.shape[0]

    def rows(self, label: str) -> np.ndarray:
        """Row indices carrying the given split label."""
        if label not in SPLIT_LABELS:
            raise DataError(f"unknown split label {label!r}")
        if self.split is None:
            raise DataError("dataset has no split labels")
        return np.flatnonzero(self.split == label)

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise DataError(f"no such column: {name!r}")
        return self.x[:, self.columns.index(name)]


def load_csv(path, target_column: str, feature_columns: list[str] | tuple[str, ...]) -> Dataset:
    """Parse the declared columns of a headed CSV into a Dataset.

    Raises DataError for a missing file, missing column, or an
    unparseable/non-finite feature cell (named with row and column).
    """
    feature_columns = tuple(feature_columns)
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        for name in (target_column, *feature_columns):
            if name not in header:
                raise DataError(f"{path}: missing column {name!r}")
        target_pos = header.index(target_column)
        feature_pos = [header.index(name) for name in feature_columns]

        rows: list[list[float]] = []
        targets: list[float] = []
        n_dropped = 0
        min_cells = max([target_pos, *feature_pos]) + 1
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) < min_cells:
                raise DataError(
                    f"{path}: row {line_no} has {len(record)} cells, "
                    f"expected at least {min_cells}"
                )
            cell = record[target_pos].strip()
            missing = cell == "" or cell.lower() in ("nan", "na")
            if not missing:
                try:
                    t = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {line_no}, column {target_column!r}: "
                        f"unparseable value {cell!r}"
                    ) from None
                missing = not np.isfinite(t)
            if missing:
                n_dropped += 1
                continue
            feats = []
            for pos, name in zip(feature_pos, feature_columns):
                cell = record[pos].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {line_no}, column {name!r}: "
                        f"unparseable value {cell!r}"
                    ) from None
                if not np.isfinite(v):
                    raise DataError(
                        f"{path}: row {line_no}, column {name!r}: non-finite value"
                    )
                feats.append(v)
            rows.append(feats)
            targets.append(t)

    x = np.asarray(rows, dtype=float).reshape(len(rows), len(feature_columns))
    y = np.asarray(targets, dtype=float)
    return Dataset(x, y, feature_columns, target_column, n_dropped=n_dropped)


def write_csv(path, columns: dict[str, np.ndarray]) -> None:
    """Write named columns as CSV with shortest round-trip float formatting."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    n = len(arrays[0])
    if any(len(a) != n for a in arrays):
        raise DataError("all columns must have equal length")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(n):
            writer.writerow([repr(float(a[i])) for a in arrays])


def split_fraction(dataset: Dataset, fraction: float, seed: int) -> Dataset:
    """Shuffle rows with the seed, first `fraction` to train, rest to val."""
    if not 0.0 < fraction < 1.0:
        raise DataError("fraction must lie strictly inside (0, 1)")
    n = len(dataset)
    n_train = int(fraction * n + 0.5)
    if n_train == 0 or n_train == n:
        raise DataError(f"fraction {fraction} leaves an empty split for n={n}")
    order = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype="U5")
    labels[order[:n_train]] = "train"
    labels[order[n_train:]] = "val"
    return replace(dataset, split=labels)


def split_by_column_values(dataset: Dataset, column: str, val_values, test_values) -> Dataset:
    """Label rows val/test by exact column-value match, remainder train."""
    col = dataset.column(column)
    val_values = set(float(v) for v in val_values)
    test_values = set(float(v) for v in test_values)
    overlap = val_values & test_values
    if overlap:
        raise DataError(f"val and test values overlap: {sorted(overlap)}")
    labels = np.full(len(dataset), "train", dtype="U5")
    labels[np.isin(col, sorted(val_values))] = "val"
    labels[np.isin(col, sorted(test_values))] = "test"
    for name in SPLIT_LABELS:
        if not np.any(labels == name):
            raise DataError(f"by-column split produced an empty {name} split")
    return replace(dataset, split=labels)


def standardize(dataset: Dataset) -> Dataset:
    """Shift/scale every feature by training-split statistics.

    The fitted transform is attached to the returned dataset and is applied
    to all splits; a zero-variance training feature is an error naming the
    column.  The target is left untouched.
    """
    if dataset.split is None:
        raise DataError("standardize requires split labels")
    train_rows = dataset.rows("train")
    if len(train_rows) == 0:
        raise DataError("standardize requires a non-empty train split")
    xt = dataset.x[train_rows]
    mean = xt.mean(axis=0)
    scale = xt.std(axis=0)
    for j, s in enumerate(scale):
        if s == 0.0:
            raise DataError(
                f"zero-variance feature {dataset.columns[j]!r} in the train split"
            )
    transform = Standardization(columns=dataset.columns, mean=mean, scale=scale)
    return replace(dataset, x=transform.apply(dataset.x), standardization=transform)
