"""Row subsampling strategies used to build the small tuning dataset.

Two samplers are provided: uniform without replacement, and statistical
leverage scores.  Leverage scores are the squared row norms of the left
singular vectors of the column-centered data, truncated to the numerical
rank; rows are then drawn sequentially without replacement with the
remaining scores renormalized after every draw, so high-leverage
(boundary / outlier) rows are kept with higher probability.

Samplers return a :class:`~drtune.core.SubsampleInfo` (sorted unique
indices plus provenance); apply it with ``data.subset(info.indices)``.
"""

from __future__ import annotations

import numpy as np

from .core import DataMatrix, SubsampleInfo
from .errors import DomainError

_RANK_RTOL = 1e-10

SAMPLERS = ("uniform", "leverage", "none")


def _check_size(n: int, n_prime: int):
    if not 1 <= n_prime <= n:
        raise DomainError(f"subsample size must be in [1, {n}], got {n_prime}")


def _info(indices, sampler: str, seed: int, fallback: bool = False) -> SubsampleInfo:
    indices = np.sort(np.asarray(indices, dtype=np.int64))
    return SubsampleInfo(sampler=sampler, n_prime=int(indices.size), seed=int(seed),
                         indices=tuple(int(i) for i in indices),
                         fallback_uniform=fallback)


def uniform_sample(data: DataMatrix, n_prime: int, seed: int) -> SubsampleInfo:
    """Uniform draw of n_prime distinct rows."""
    _check_size(data.n, n_prime)
    rng = np.random.default_rng(seed)
    return _info(rng.choice(data.n, size=n_prime, replace=False), "uniform", seed)


def leverage_scores(values: np.ndarray) -> np.ndarray:
    """Leverage score per row of the column-centered matrix.

    Scores sum to the numerical rank; a zero matrix yields all-zero scores.
    """
    values = np.asarray(values, dtype=float)
    centered = values - values.mean(axis=0)
    U, s, _ = np.linalg.svd(centered, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        return np.zeros(values.shape[0])
    rank = int(np.sum(s > _RANK_RTOL * s[0]))
    return np.sum(U[:, :rank] ** 2, axis=1)


def leverage_sample(data: DataMatrix, n_prime: int, seed: int) -> SubsampleInfo:
    """Leverage-weighted draw of n_prime distinct rows.

    Rows are drawn one at a time with probability proportional to their
    leverage score among the rows still available (exact renormalization,
    not rejection).  If every score is zero (rank-0 data) the draw falls
    back to uniform and the result is flagged.
    """
    _check_size(data.n, n_prime)
    rng = np.random.default_rng(seed)
    scores = leverage_scores(data.values)
    if scores.sum() <= 0.0:
        indices = rng.choice(data.n, size=n_prime, replace=False)
        return _info(indices, "leverage", seed, fallback=True)

    available = np.arange(data.n)
    weights = scores.astype(float).copy()
    chosen = np.empty(n_prime, dtype=np.int64)
    for k in range(n_prime):
        total = weights.sum()
        if total <= 0.0:  # only zero-leverage rows remain: finish uniformly
            rest = rng.choice(available.size, size=n_prime - k, replace=False)
            chosen[k:] = available[rest]
            break
        pick = rng.choice(available.size, p=weights / total)
        chosen[k] = available[pick]
        available = np.delete(available, pick)
        weights = np.delete(weights, pick)
    return _info(chosen, "leverage", seed)


def make_subsample(data: DataMatrix, sampler: str, n_prime: int | None,
                   seed: int) -> SubsampleInfo:
    """Dispatch by sampler name; "none" keeps every row."""
    if sampler == "none" or (sampler in ("uniform", "leverage") and
                             (n_prime is None or n_prime == data.n)):
        return _info(np.arange(data.n), "none" if sampler == "none" else sampler, seed)
    if sampler in ("uniform", "leverage"):
        if n_prime is None:
            raise DomainError(f"sampler {sampler!r} needs an explicit subsample size")
        return (uniform_sample if sampler == "uniform" else leverage_sample)(data, n_prime, seed)
    raise DomainError(f"unknown sampler {sampler!r} (expected one of {SAMPLERS})")
