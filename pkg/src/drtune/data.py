"""Synthetic dataset generators and CSV ingestion."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .core import DataMatrix
from .errors import ConfigError, DomainError, IngestionError


@dataclass(frozen=True)
class DatasetSpec:
    """Declarative dataset description used by configs and manifests."""

    kind: str  # "two_cluster" | "sine" | "csv"
    params: dict = field(default_factory=dict)
    seed: int = 0

    def load(self) -> DataMatrix:
        try:
            if self.kind == "two_cluster":
                return generate_two_cluster(seed=self.seed, **self.params)
            if self.kind == "sine":
                params = dict(self.params)
                buckets = int(params.pop("label_buckets", 0))
                data = generate_sine(**params)
                if buckets:
                    data = DataMatrix(data.values,
                                      bucket_labels(data.values[:, 0], buckets))
                return data
            if self.kind == "csv":
                return load_csv(**self.params)
        except TypeError as exc:
            raise ConfigError(f"dataset parameters: {exc}") from None
        raise DomainError(f"unknown dataset kind {self.kind!r}")


def generate_two_cluster(n_small=10, n_large=50, d=10, separation=8.0,
                         seed=0) -> DataMatrix:
    """Two unit-variance Gaussian blobs, one small and one large.

    Centers sit at the origin and at separation along the first axis;
    labels are 0 for the small blob, 1 for the large one.  Row order is
    shuffled by the seed, and a fixed seed reproduces the matrix bitwise.
    """
    if n_small < 1 or n_large < 1:
        raise DomainError("cluster sizes must be >= 1")
    if d < 2:
        raise DomainError("ambient dimension must be >= 2")
    if separation <= 0:
        raise DomainError("separation must be positive")
    rng = np.random.default_rng(seed)
    small = rng.standard_normal((n_small, d))
    large = rng.standard_normal((n_large, d))
    large[:, 0] += separation
    values = np.vstack([small, large])
    labels = np.concatenate([np.zeros(n_small, dtype=int), np.ones(n_large, dtype=int)])
    order = rng.permutation(n_small + n_large)
    return DataMatrix(values[order], labels[order])


def generate_sine(n=200) -> DataMatrix:
    """Noiseless curve [z, sin z, sin 2z, sin 3z] on n equally spaced z in [-pi, pi]."""
    if n < 2:
        raise DomainError("sine dataset needs n >= 2")
    i = np.arange(1, n + 1)
    z = 2.0 * np.pi * (i - 1) / (n - 1) - np.pi
    values = np.column_stack([z, np.sin(z), np.sin(2 * z), np.sin(3 * z)])
    return DataMatrix(values)


def bucket_labels(values, n_buckets=4) -> np.ndarray:
    """Quantile-bucket a 1-D array into integer class labels.

    Used to attach classification labels to datasets that have none
    (e.g. the sine curve is bucketed along z into quartiles).
    """
    values = np.asarray(values, dtype=float)
    edges = np.quantile(values, np.linspace(0, 1, n_buckets + 1)[1:-1])
    return np.searchsorted(edges, values, side="right").astype(int)


def _parse_cell(text, row, col):
    try:
        return float(text)
    except ValueError:
        raise IngestionError(f"non-numeric value {text!r}", row=row, column=col) from None


def load_csv(path, label_column=None) -> DataMatrix:
    """Load a rectangular numeric CSV, optionally extracting a label column.

    A header row is detected by attempting to parse the first row as
    numbers.  Label values are encoded as first-seen ordinals, so string
    class names are fine.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise IngestionError(f"{path}: file is empty")

    header = None
    try:
        [float(cell) for cell in rows[0]]
    except ValueError:
        header = [cell.strip() for cell in rows[0]]
        rows = rows[1:]
    if not rows:
        raise IngestionError(f"{path}: no data rows")

    width = len(rows[0])
    label_idx = None
    if label_column is not None:
        if header is None or label_column not in header:
            raise IngestionError(f"{path}: label column {label_column!r} not found")
        label_idx = header.index(label_column)

    values, labels, codes = [], [], {}
    for r, row in enumerate(rows, start=1):
        if len(row) != width:
            raise IngestionError(f"ragged row: expected {width} cells, got {len(row)}", row=r)
        feature_row = []
        for c, cell in enumerate(row, start=1):
            if label_idx is not None and c - 1 == label_idx:
                key = cell.strip()
                labels.append(codes.setdefault(key, len(codes)))
            else:
                feature_row.append(_parse_cell(cell.strip(), r, c))
        values.append(feature_row)

    matrix = np.asarray(values, dtype=float)
    return DataMatrix(matrix, np.asarray(labels, dtype=int) if labels else None)


def save_csv(path, data: DataMatrix, header=True):
    """Write a DataMatrix as CSV; labels become a trailing 'label' column."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if header:
            cols = [f"x{j}" for j in range(data.d)]
            if data.labels is not None:
                cols.append("label")
            writer.writerow(cols)
        for i in range(data.n):
            row = [repr(float(v)) for v in data.values[i]]
            if data.labels is not None:
                row.append(str(int(data.labels[i])))
            writer.writerow(row)
