"""Trade-off and sensitivity analysis on top of tuning results.

Pareto analysis treats two metric losses as jointly minimized objectives:
the front is the set of non-dominated samples (dominance = componentwise <=
with at least one strict <; ties join the front), and the knee is the front
point farthest from the chord through the two extreme front points after
min-max normalizing each objective over the front.

Sensitivity analysis runs the Saltelli scheme on a surrogate's posterior
mean: two scrambled low-discrepancy matrices A and B plus the d hybrids
A_B^(i) (A with column i taken from B) give first-order indices S1 via the
Janon estimator and total-order indices ST via the Jansen estimator, both
normalized by the pooled variance of f(A) and f(B); confidence half-widths
come from a percentile bootstrap over rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .core import HyperparamSpace, TuningHistory, derive_seed
from .errors import DomainError

POINT_TOL = 1e-9


@dataclass(frozen=True)
class ParetoResult:
    """Partition of sample indices into front and dominated; optional knee.

    ``knee`` is the sample index (a member of ``front``) of the knee point;
    it is None when the front has fewer than 3 points or no usable chord.
    """

    front: tuple[int, ...]
    dominated: tuple[int, ...]
    knee: int | None


def _dominance_partition(losses: np.ndarray) -> tuple[list[int], list[int]]:
    """Single sweep over samples sorted by (loss1, loss2).

    A sample is dominated iff some earlier-sorted sample beats it: either a
    strictly smaller loss1 with loss2 <= its own, or an equal loss1 with a
    strictly smaller loss2.
    """
    n = losses.shape[0]
    order = np.lexsort((losses[:, 1], losses[:, 0]))
    front: list[int] = []
    dominated: list[int] = []
    best_l2_before = np.inf  # min loss2 among strictly smaller loss1
    i = 0
    while i < n:
        j = i
        while j < n and losses[order[j], 0] == losses[order[i], 0]:
            j += 1
        group = order[i:j]
        group_min_l2 = losses[group, 1].min()
        for idx in group:
            l2 = losses[idx, 1]
            if l2 < best_l2_before and l2 == group_min_l2:
                front.append(int(idx))
            else:
                dominated.append(int(idx))
        best_l2_before = min(best_l2_before, group_min_l2)
        i = j
    return sorted(front), sorted(dominated)


def _knee_index(losses: np.ndarray, front: list[int]) -> int | None:
    if len(front) < 3:
        return None
    pts = losses[front].astype(float)
    span = pts.max(axis=0) - pts.min(axis=0)
    scale = np.where(span > 0.0, span, 1.0)
    norm = (pts - pts.min(axis=0)) / scale
    a = norm[int(np.argmin(pts[:, 0]))]  # extreme in objective 1
    b = norm[int(np.argmin(pts[:, 1]))]  # extreme in objective 2
    chord = b - a
    length = float(np.hypot(*chord))
    if length < 1e-15:
        return None
    # perpendicular distance of each front point to the chord line
    rel = norm - a
    dist = np.abs(chord[0] * rel[:, 1] - chord[1] * rel[:, 0]) / length
    return front[int(np.argmax(dist))]


def pareto_front(samples) -> ParetoResult:
    """Partition (point, loss1, loss2) samples by Pareto dominance.

    ``samples`` is a sequence whose items expose two losses either as the
    last two elements of a tuple or as a ``losses`` attribute.
    """
    losses = np.array([_sample_losses(s) for s in samples], dtype=float)
    if losses.size == 0:
        raise DomainError("need at least one sample")
    front, dominated = _dominance_partition(losses)
    return ParetoResult(front=tuple(front), dominated=tuple(dominated),
                        knee=_knee_index(losses, front))


def _sample_losses(sample) -> tuple[float, float]:
    if hasattr(sample, "losses"):
        a, b = sample.losses
    else:
        a, b = sample[-2], sample[-1]
    return float(a), float(b)


@dataclass(frozen=True)
class ObjectiveSample:
    """One hyperparameter point with its two objective losses.

    ``weight`` counts the tuning repeats that contributed to this point
    across the merged histories (cross-evaluated repeats do not count).
    """

    normalized: tuple[float, ...]
    losses: tuple[float, float]
    weight: int


def merged_objective_samples(histories, metric_names: tuple[str, str],
                             cross_eval, tol: float = POINT_TOL) -> list[ObjectiveSample]:
    """Union of the histories' points with both objectives filled in.

    Points are deduplicated by normalized coordinates (within ``tol``).
    A loss already recorded for (point, metric) is reused; missing losses
    are computed through ``cross_eval(normalized, metric_name)``.
    """
    histories = list(histories)
    if not histories:
        raise DomainError("need at least one tuning history")
    space = histories[0].space
    for h in histories[1:]:
        if h.space != space:
            raise DomainError("histories use different hyperparameter spaces")
    name_a, name_b = metric_names

    uniques: list[np.ndarray] = []
    stored: list[dict[str, float]] = []
    weights: list[int] = []
    for h in histories:
        if h.metric_name not in (name_a, name_b):
            raise DomainError(f"history metric {h.metric_name!r} is not in {metric_names}")
        for record in h.records:
            u = np.asarray(record.point.normalized, dtype=float)
            for k, v in enumerate(uniques):
                if v.shape == u.shape and np.max(np.abs(v - u)) <= tol:
                    stored[k].setdefault(h.metric_name, float(record.aggregate))
                    weights[k] += len(record.metric_values)
                    break
            else:
                uniques.append(u)
                stored.append({h.metric_name: float(record.aggregate)})
                weights.append(len(record.metric_values))

    samples = []
    for u, known, w in zip(uniques, stored, weights):
        loss_a = known.get(name_a)
        if loss_a is None:
            loss_a = float(cross_eval(u, name_a))
        loss_b = known.get(name_b)
        if loss_b is None:
            loss_b = float(cross_eval(u, name_b))
        samples.append(ObjectiveSample(normalized=tuple(float(x) for x in u),
                                       losses=(loss_a, loss_b), weight=w))
    return samples


@dataclass(frozen=True)
class SobolResult:
    """First/total-order sensitivity indices with bootstrap half-widths."""

    names: tuple[str, ...]
    s1: np.ndarray
    st: np.ndarray
    s1_conf: np.ndarray
    st_conf: np.ndarray
    n_base: int
    degenerate: bool


def _sobol_estimates(fA, fB, fAB, rows=None):
    """Janon S1 and Jansen ST for each dimension on the given row subset."""
    if rows is not None:
        fA, fB = fA[rows], fB[rows]
        fAB = fAB[:, rows]
    pooled = np.concatenate([fA, fB])
    V = float(np.var(pooled))
    d = fAB.shape[0]
    if V <= 1e-12 * max(1.0, float(np.mean(pooled)) ** 2):
        return np.zeros(d), np.zeros(d), V
    m = 0.5 * (fB[None, :] + fAB).mean(axis=1)
    s1 = ((fB[None, :] * fAB).mean(axis=1) - m * m) / V
    st = 0.5 * ((fA[None, :] - fAB) ** 2).mean(axis=1) / V
    return s1, st, V


def sobol_indices(predict, space: HyperparamSpace, n_base: int, seed: int = 0,
                  n_bootstrap: int = 100) -> SobolResult:
    """Variance-based sensitivity of ``predict`` over the unit cube.

    ``predict`` maps an (m, d) array of normalized points to m values and is
    typically a fitted surrogate's posterior mean.  ``n_base`` must be a
    power of two >= 64.  A constant predictor (zero variance) yields all-zero
    indices flagged degenerate.
    """
    d = len(space)
    if n_base < 64 or (n_base & (n_base - 1)) != 0:
        raise DomainError(f"n_base must be a power of two >= 64, got {n_base}")
    if n_bootstrap < 0:
        raise DomainError("n_bootstrap must be >= 0")

    sob = qmc.Sobol(2 * d, scramble=True, seed=derive_seed(seed, 0))
    AB = sob.random(n_base)
    A, B = AB[:, :d], AB[:, d:]
    fA = np.asarray(predict(A), dtype=float).ravel()
    fB = np.asarray(predict(B), dtype=float).ravel()
    if fA.size != n_base or fB.size != n_base:
        raise DomainError("predict must return one value per input row")
    fAB = np.empty((d, n_base))
    for i in range(d):
        hybrid = A.copy()
        hybrid[:, i] = B[:, i]
        fAB[i] = np.asarray(predict(hybrid), dtype=float).ravel()

    s1, st, V = _sobol_estimates(fA, fB, fAB)
    degenerate = V <= 1e-12 * max(1.0, float(np.mean(np.concatenate([fA, fB]))) ** 2)
    if degenerate or n_bootstrap == 0:
        conf = np.zeros(d)
        return SobolResult(names=tuple(space.names), s1=s1, st=st,
                           s1_conf=conf.copy(), st_conf=conf.copy(),
                           n_base=n_base, degenerate=degenerate)

    rng = np.random.default_rng(derive_seed(seed, 1))
    s1_boot = np.empty((n_bootstrap, d))
    st_boot = np.empty((n_bootstrap, d))
    for b in range(n_bootstrap):
        rows = rng.integers(0, n_base, size=n_base)
        s1_boot[b], st_boot[b], _ = _sobol_estimates(fA, fB, fAB, rows)
    s1_lo, s1_hi = np.percentile(s1_boot, [2.5, 97.5], axis=0)
    st_lo, st_hi = np.percentile(st_boot, [2.5, 97.5], axis=0)
    return SobolResult(names=tuple(space.names), s1=s1, st=st,
                       s1_conf=(s1_hi - s1_lo) / 2.0, st_conf=(st_hi - st_lo) / 2.0,
                       n_base=n_base, degenerate=degenerate)
