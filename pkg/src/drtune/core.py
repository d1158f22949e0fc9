"""Shared data model: datasets, hyperparameter spaces and trial bookkeeping.

Hyperparameter dimensions live in a normalized unit cube so that a tuned
optimum transfers between a subsample and the full dataset.  Count-valued
dimensions (perplexity, n_neighbor) normalize by dividing the raw count by
the current sample size; continuous dimensions map affinely from their
bounds; discrete sets map by index so unevenly spaced lists stay uniform
in the cube.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

_KINDS = ("continuous", "count", "discrete")


def derive_seed(*parts: int) -> int:
    """Deterministic 63-bit seed from integer parts (master, trial, repeat, ...).

    Hash-based so that repeats differ, runs reproduce, and seeds do not
    collide across trials.
    """
    raw = b"".join(int(p).to_bytes(8, "little", signed=True) for p in parts)
    digest = hashlib.blake2b(raw, digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


@dataclass(frozen=True)
class DataMatrix:
    """n x d sample matrix with optional integer class labels."""

    values: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DomainError(f"data matrix must be 2-D, got shape {values.shape}")
        n, d = values.shape
        if n < 2 or d < 1:
            raise DomainError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
        if not np.all(np.isfinite(values)):
            raise DomainError("data matrix contains non-finite entries")
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=int)
            if labels.shape != (n,):
                raise DomainError(f"labels must have length {n}, got shape {labels.shape}")
            if np.any(labels < 0):
                raise DomainError("labels must be nonnegative class ids")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def subset(self, rows) -> "DataMatrix":
        rows = np.asarray(rows, dtype=int)
        labels = self.labels[rows] if self.labels is not None else None
        return DataMatrix(self.values[rows], labels)


@dataclass(frozen=True)
class HyperparamDim:
    """One tunable dimension.

    kind "continuous": raw value in [bounds[0], bounds[1]].
    kind "count": raw value is an integer count; the unit-cube coordinate is
        an affine map of count/n over `bounds` (default (0, 1), i.e. the
        coordinate equals count/n).  Denormalization rounds half-up and
        clamps to [min_count, min(max_count, n-1)].
    kind "discrete": raw value restricted to `values`; normalized by index.
    """

    name: str
    kind: str = "continuous"
    bounds: tuple[float, float] = (0.0, 1.0)
    values: tuple[float, ...] | None = None
    min_count: int = 1
    max_count: int | None = None

    def __post_init__(self):
        if not self.name:
            raise DomainError("dimension name must be non-empty")
        if self.kind not in _KINDS:
            raise DomainError(f"dimension {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "discrete":
            if not self.values:
                raise DomainError(f"dimension {self.name!r}: discrete set must be non-empty")
            vals = tuple(float(v) for v in self.values)
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise DomainError(f"dimension {self.name!r}: discrete values must be strictly increasing")
            object.__setattr__(self, "values", vals)
        else:
            lo, hi = (float(self.bounds[0]), float(self.bounds[1]))
            if not lo < hi:
                raise DomainError(f"dimension {self.name!r}: bounds must satisfy lo < hi")
            object.__setattr__(self, "bounds", (lo, hi))
        if self.kind == "count":
            if self.min_count < 1:
                raise DomainError(f"dimension {self.name!r}: min_count must be >= 1")
            if self.max_count is not None and self.max_count < self.min_count:
                raise DomainError(f"dimension {self.name!r}: max_count below min_count")

    def _count_cap(self, n: int) -> int:
        cap = n - 1
        if self.max_count is not None:
            cap = min(cap, self.max_count)
        return max(cap, self.min_count)

    def normalize(self, raw: float, n: int) -> float:
        if self.kind == "discrete":
            diffs = np.abs(np.asarray(self.values) - raw)
            idx = int(np.argmin(diffs))
            if diffs[idx] > 1e-9:
                raise DomainError(f"dimension {self.name!r}: {raw} is not in the discrete set")
            if len(self.values) == 1:
                return 0.0
            return idx / (len(self.values) - 1)
        lo, hi = self.bounds
        value = raw / n if self.kind == "count" else float(raw)
        u = (value - lo) / (hi - lo)
        if not -1e-9 <= u <= 1 + 1e-9:
            raise DomainError(f"dimension {self.name!r}: raw value {raw} outside bounds for n={n}")
        return min(max(u, 0.0), 1.0)

    def denormalize(self, u: float, n: int) -> float:
        u = min(max(float(u), 0.0), 1.0)
        if self.kind == "discrete":
            idx = int(np.floor(u * (len(self.values) - 1) + 0.5))
            return self.values[idx]
        lo, hi = self.bounds
        value = lo + u * (hi - lo)
        if self.kind == "continuous":
            return value
        count = int(np.floor(value * n + 0.5))  # round half-up
        return float(min(max(count, self.min_count), self._count_cap(n)))


@dataclass(frozen=True)
class HyperparamSpace:
    """Ordered collection of dimensions defining the unit search cube."""

    dims: tuple[HyperparamDim, ...]

    def __post_init__(self):
        dims = tuple(self.dims)
        if not dims:
            raise DomainError("hyperparameter space needs at least one dimension")
        names = [d.name for d in dims]
        if len(set(names)) != len(names):
            raise DomainError("dimension names must be unique")
        object.__setattr__(self, "dims", dims)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dims)

    def __len__(self):
        return len(self.dims)


@dataclass(frozen=True)
class HyperparamPoint:
    """A search point: unit-cube coordinates plus the raw values for a given n."""

    normalized: tuple[float, ...]
    raw: tuple[float, ...]

    def __post_init__(self):
        if len(self.normalized) != len(self.raw):
            raise DomainError("normalized and raw vectors must have equal length")
        if any(not 0.0 <= u <= 1.0 for u in self.normalized):
            raise DomainError("normalized coordinates must lie in [0, 1]")
        object.__setattr__(self, "normalized", tuple(float(u) for u in self.normalized))
        object.__setattr__(self, "raw", tuple(float(v) for v in self.raw))


def normalize_point(space: HyperparamSpace, raw, n: int) -> np.ndarray:
    """Map raw hyperparameter values into the unit cube for sample size n."""
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (len(space),):
        raise DomainError(f"expected {len(space)} raw values, got shape {raw.shape}")
    if n < 2:
        raise DomainError(f"sample size must be >= 2, got {n}")
    return np.array([dim.normalize(v, n) for dim, v in zip(space.dims, raw)])


def denormalize_point(space: HyperparamSpace, normalized, n: int) -> np.ndarray:
    """Materialize raw hyperparameter values from unit-cube coordinates at n."""
    u = np.asarray(normalized, dtype=float)
    if u.shape != (len(space),):
        raise DomainError(f"expected {len(space)} coordinates, got shape {u.shape}")
    return np.array([dim.denormalize(ui, n) for dim, ui in zip(space.dims, u)])


def make_point(space: HyperparamSpace, normalized, n: int) -> HyperparamPoint:
    u = np.asarray(normalized, dtype=float)
    if u.size and (u.min() < 0.0 or u.max() > 1.0):
        raise DomainError("normalized coordinates must lie in [0, 1]")
    raw = denormalize_point(space, u, n)
    return HyperparamPoint(tuple(u), tuple(raw))


@dataclass(frozen=True)
class TrialRecord:
    """One evaluated point: per-repeat losses and their aggregate."""

    point: HyperparamPoint
    metric_values: tuple[float, ...]
    aggregate: float
    phase: str  # "pilot" | "sequential"
    seed_base: int
    dropped_repeats: int = 0
    wall_time: float | None = None

    def __post_init__(self):
        if not self.metric_values:
            raise DomainError("trial needs at least one metric value")
        vals = tuple(float(v) for v in self.metric_values)
        if any(not 0.0 <= v <= 1.0 for v in vals):
            raise DomainError("metric values must lie in [0, 1]")
        if self.phase not in ("pilot", "sequential"):
            raise DomainError(f"unknown phase {self.phase!r}")
        object.__setattr__(self, "metric_values", vals)


@dataclass
class SubsampleInfo:
    """How a tuning run shrank its dataset; indices allow exact replay."""

    sampler: str
    n_prime: int
    seed: int
    indices: tuple[int, ...]
    fallback_uniform: bool = False


@dataclass
class TuningHistory:
    """Append-only log of one tuning run.

    ``surrogate_trace`` holds the fitted surrogate hyperparameters of each
    sequential iteration, for the manifest and post-hoc sensitivity runs.
    """

    space: HyperparamSpace
    metric_name: str
    dr_name: str
    subsample_info: SubsampleInfo | None = None
    records: list[TrialRecord] = field(default_factory=list)
    surrogate_trace: list[dict] = field(default_factory=list)

    def append(self, record: TrialRecord):
        if record.phase == "pilot" and any(r.phase == "sequential" for r in self.records):
            raise DomainError("pilot records must precede sequential records")
        self.records.append(record)

    def aggregates(self) -> np.ndarray:
        return np.array([r.aggregate for r in self.records])

    def points(self) -> np.ndarray:
        return np.array([r.point.normalized for r in self.records])

    def best_index(self) -> int:
        if not self.records:
            raise DomainError("history is empty")
        return int(np.argmin(self.aggregates()))  # argmin keeps the earliest tie

    def best(self) -> TrialRecord:
        return self.records[self.best_index()]
