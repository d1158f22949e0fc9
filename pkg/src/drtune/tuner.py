"""The tuning loop: subsample, pilot-sample, then surrogate-guided search.

A tuning run shrinks the dataset with the configured sampler, evaluates N1
pilot points across the normalized cube (each point = n_repeat engine runs
whose metric losses are aggregated), then alternates fit-surrogate /
propose-next / evaluate for N2 sequential iterations.  Only aggregates are
fed to the surrogate.  A grid-search baseline shares the same evaluation
machinery, with per-point seeds derived from the point itself so grid
results are independent of evaluation order.

Seed discipline: every random choice derives from the master seed through
``derive_seed`` streams, so identical (data, config) reproduce the history
bit for bit, repeats differ, and seeds never collide across trials.
"""

from __future__ import annotations

import itertools
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from .core import (DataMatrix, HyperparamPoint, HyperparamSpace, SubsampleInfo,
                   TrialRecord, TuningHistory, derive_seed, make_point)
from .dr_adapter import DrEngineSpec, run_engine
from .errors import ConfigError, DivergenceError, DomainError, EngineError, RunAborted
from .metrics import MetricSpec, pairwise_distances, rank_matrix, single_loss
from .subsample import SAMPLERS, make_subsample
from .surrogate import AcquisitionSpec, fit as fit_surrogate, propose_next
from .tsne import Embedding

# stream tags for derive_seed so independent random choices never collide
_S_SUBSAMPLE, _S_PILOT, _S_TRIAL, _S_FIT, _S_PROPOSE, _S_GRID, _S_CROSS = range(1, 8)
_RANK_METRICS = ("auc", "q_local", "q_global")


@dataclass(frozen=True)
class TuneConfig:
    """Everything one tuning run needs besides the data itself."""

    engine: DrEngineSpec
    metric: MetricSpec
    space: HyperparamSpace | None = None  # defaults to the engine's space
    sampler: str = "none"
    n_prime: int | None = None
    n1: int = 5
    n2: int = 15
    surrogate_kind: str = "gp"
    acquisition: AcquisitionSpec = field(default_factory=AcquisitionSpec)
    n_repeat: int | None = None  # defaults to metric.n_repeat
    d_prime: int = 2
    pilot: str = "sobol"  # "sobol" (low-discrepancy) | "iid" (plain uniform)
    master_seed: int = 0

    def __post_init__(self):
        if self.space is None:
            object.__setattr__(self, "space", self.engine.space)
        missing = [n for n in self.engine.space.names if n not in self.space.names]
        if missing:
            raise ConfigError(f"tuning space lacks engine dimensions: {missing}")
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"unknown sampler {self.sampler!r} (expected one of {SAMPLERS})")
        if self.n_prime is not None and self.n_prime < 2:
            raise ConfigError("n_prime must be >= 2")
        if self.n1 < 1:
            raise ConfigError("pilot budget n1 must be >= 1")
        if self.n2 < 0:
            raise ConfigError("sequential budget n2 must be >= 0")
        if self.surrogate_kind not in ("gp", "forest"):
            raise ConfigError(f"unknown surrogate kind {self.surrogate_kind!r}")
        if self.n_repeat is not None and self.n_repeat < 1:
            raise ConfigError("n_repeat must be >= 1")
        if self.d_prime < 1:
            raise ConfigError("d_prime must be >= 1")
        if self.pilot not in ("sobol", "iid"):
            raise ConfigError(f"unknown pilot sampling {self.pilot!r} (expected 'sobol' or 'iid')")

    @property
    def metric_spec(self) -> MetricSpec:
        if self.n_repeat is None or self.n_repeat == self.metric.n_repeat:
            return self.metric
        return replace(self.metric, n_repeat=self.n_repeat)

    @property
    def budget(self) -> int:
        return self.n1 + self.n2


def _point_bits(normalized) -> list[int]:
    """IEEE-754 bit patterns of the coordinates, for point-derived seeds."""
    return [struct.unpack("<q", struct.pack("<d", float(u)))[0] for u in normalized]


def _run_repeats(engine: DrEngineSpec, data: DataMatrix, raw_params: dict,
                 d_prime: int, seeds: list[int], jobs: int):
    """One engine run per seed; failures are collected, order preserved."""
    def one(seed: int):
        try:
            return run_engine(engine, data, raw_params, d_prime=d_prime, seed=seed)
        except (EngineError, DivergenceError, DomainError) as exc:
            return exc
    if jobs > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, seeds))
    return [one(seed) for seed in seeds]


def _evaluate_trial(engine: DrEngineSpec, data: DataMatrix, metric: MetricSpec,
                    point: HyperparamPoint, seed_base: int, phase: str,
                    trial_index: int, space: HyperparamSpace, d_prime: int,
                    rank_high: np.ndarray | None, jobs: int = 1) -> TrialRecord:
    """Evaluate one hyperparameter point with n_repeat engine runs.

    A repeat fails if the engine or the metric raises; fewer than half
    failing drops them (flagged via dropped_repeats), half or more aborts
    the run naming the trial.
    """
    start = time.perf_counter()
    n_repeat = metric.n_repeat
    raw_params = dict(zip(space.names, point.raw))
    engine_seeds = [derive_seed(seed_base, 0, r) for r in range(n_repeat)]
    results = _run_repeats(engine, data, raw_params, d_prime, engine_seeds, jobs)

    losses = []
    failures = []
    for r, result in enumerate(results):
        if isinstance(result, Exception):
            failures.append((r, result))
            continue
        try:
            losses.append(single_loss(metric, data, result.coords, data.labels,
                                      derive_seed(seed_base, 1, r), rank_high))
        except DomainError as exc:
            failures.append((r, exc))
    if failures and len(failures) * 2 >= n_repeat:
        _, last = failures[-1]
        raise RunAborted(trial_index,
                         f"{len(failures)}/{n_repeat} repeats failed; last error: {last}")
    return TrialRecord(point=point, metric_values=tuple(losses),
                       aggregate=metric.aggregation.apply(losses), phase=phase,
                       seed_base=seed_base, dropped_repeats=len(failures),
                       wall_time=time.perf_counter() - start)


def _rank_cache(metric: MetricSpec, data: DataMatrix) -> np.ndarray | None:
    if metric.name in _RANK_METRICS:
        return rank_matrix(pairwise_distances(data.values))
    return None


def _pilot_points(config: TuneConfig, d: int) -> np.ndarray:
    seed = derive_seed(config.master_seed, _S_PILOT)
    if config.pilot == "iid":
        return np.random.default_rng(seed).uniform(size=(config.n1, d))
    # draw the next power of two and truncate, keeping the sampler warning-free
    m = 1 << max(int(np.ceil(np.log2(config.n1))), 0)
    points = qmc.Sobol(d, scramble=True, seed=seed).random(m)
    return points[: config.n1]


def _prepare(X: DataMatrix, config: TuneConfig):
    metric = config.metric_spec
    if metric.needs_labels and X.labels is None:
        raise ConfigError(f"metric {metric.name!r} needs class labels, "
                          "but the dataset has none")
    if config.n_prime is not None and config.n_prime > X.n:
        raise ConfigError(f"n_prime={config.n_prime} exceeds n={X.n}")
    info = make_subsample(X, config.sampler, config.n_prime,
                          derive_seed(config.master_seed, _S_SUBSAMPLE))
    data = X.subset(info.indices) if info.n_prime < X.n else X
    return metric, info, data


def run_tuning(X: DataMatrix, config: TuneConfig, jobs: int = 1) -> TuningHistory:
    """Pilot phase plus sequential surrogate-guided search.

    Returns the full history (n1 + n2 records); the best point is the
    earliest argmin of the aggregates.  Surrogate hyperparameters fitted at
    each sequential step are kept in ``history.surrogate_trace``.
    """
    metric, info, data = _prepare(X, config)
    history = TuningHistory(space=config.space, metric_name=metric.name,
                            dr_name=config.engine.name, subsample_info=info)
    rank_high = _rank_cache(metric, data)

    for t, u in enumerate(_pilot_points(config, len(config.space))):
        point = make_point(config.space, u, data.n)
        record = _evaluate_trial(config.engine, data, metric, point,
                                 derive_seed(config.master_seed, _S_TRIAL, t),
                                 "pilot", t, config.space, config.d_prime,
                                 rank_high, jobs)
        history.append(record)

    for m in range(config.n2):
        t = config.n1 + m
        model = fit_surrogate(config.surrogate_kind, history.points(),
                              history.aggregates(),
                              derive_seed(config.master_seed, _S_FIT, m))
        history.surrogate_trace.append(model.hyperparams())
        acq = config.acquisition.with_best(float(history.aggregates().min()))
        u = propose_next(model, acq, config.space,
                         derive_seed(config.master_seed, _S_PROPOSE, m))
        point = make_point(config.space, u, data.n)
        record = _evaluate_trial(config.engine, data, metric, point,
                                 derive_seed(config.master_seed, _S_TRIAL, t),
                                 "sequential", t, config.space, config.d_prime,
                                 rank_high, jobs)
        history.append(record)
    return history


def grid_axes(space: HyperparamSpace, grid_points: int) -> list[np.ndarray]:
    """Per-dimension normalized grid coordinates (discrete dims enumerate)."""
    if grid_points < 2:
        raise ConfigError("need at least 2 grid points per non-discrete dimension")
    axes = []
    for dim in space.dims:
        if dim.kind == "discrete":
            m = len(dim.values)
            axes.append(np.array([0.0]) if m == 1 else np.arange(m) / (m - 1))
        else:
            axes.append(np.linspace(0.0, 1.0, grid_points))
    return axes


def grid_search(X: DataMatrix, config: TuneConfig, grid_points: int,
                jobs: int = 1, evaluation_order=None) -> TuningHistory:
    """Exhaustive baseline over the Cartesian grid.

    Per-point seeds derive from the point's coordinates (not its position),
    so aggregates are identical no matter the evaluation order;
    ``evaluation_order`` exists to exercise exactly that property.
    """
    metric, info, data = _prepare(X, config)
    history = TuningHistory(space=config.space, metric_name=metric.name,
                            dr_name=config.engine.name, subsample_info=info)
    rank_high = _rank_cache(metric, data)

    grid = [np.array(u) for u in itertools.product(*grid_axes(config.space, grid_points))]
    order = range(len(grid)) if evaluation_order is None else evaluation_order
    if sorted(order) != list(range(len(grid))):
        raise ConfigError("evaluation_order must be a permutation of the grid")
    records = {}
    for idx in order:
        point = make_point(config.space, grid[idx], data.n)
        seed_base = derive_seed(config.master_seed, _S_GRID,
                                *_point_bits(point.normalized))
        records[idx] = _evaluate_trial(config.engine, data, metric, point,
                                       seed_base, "pilot", idx, config.space,
                                       config.d_prime, rank_high, jobs)
    # the history lists grid points in canonical order however they were run
    for idx in range(len(grid)):
        history.append(records[idx])
    return history


def best_so_far_trace(history: TuningHistory) -> np.ndarray:
    """Running minimum of the aggregates, one entry per record."""
    aggregates = history.aggregates()
    if aggregates.size == 0:
        raise DomainError("history is empty")
    return np.minimum.accumulate(aggregates)


def transfer_optimum(history: TuningHistory, X_full: DataMatrix,
                     engine: DrEngineSpec, d_prime: int = 2,
                     seed: int = 0) -> tuple[dict, Embedding]:
    """Carry the tuned normalized optimum to the full dataset.

    Denormalizes the best point at the full sample size, runs the engine
    once, and returns (raw hyperparameters, embedding).
    """
    best = history.best()
    point = make_point(history.space, best.point.normalized, X_full.n)
    raw_params = dict(zip(history.space.names, point.raw))
    embedding = run_engine(engine, X_full, raw_params, d_prime=d_prime, seed=seed)
    return raw_params, embedding


@dataclass
class CrossEvaluator:
    """Evaluate any normalized point under any configured metric.

    Used by the Pareto analysis to fill in the metric a tuning history did
    not record.  Seeds derive from the point coordinates, so evaluating the
    same point twice (or from two histories) gives identical aggregates.
    """

    engine: DrEngineSpec
    data: DataMatrix
    space: HyperparamSpace
    metrics: dict[str, MetricSpec]
    d_prime: int = 2
    master_seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        self._rank_high = None
        if any(m.name in _RANK_METRICS for m in self.metrics.values()):
            self._rank_high = rank_matrix(pairwise_distances(self.data.values))

    def __call__(self, normalized, metric_name: str) -> float:
        if metric_name not in self.metrics:
            raise DomainError(f"cross-evaluator not configured for metric {metric_name!r}")
        metric = self.metrics[metric_name]
        point = make_point(self.space, normalized, self.data.n)
        seed_base = derive_seed(self.master_seed, _S_CROSS,
                                *_point_bits(point.normalized))
        rank_high = self._rank_high if metric.name in _RANK_METRICS else None
        record = _evaluate_trial(self.engine, self.data, metric, point, seed_base,
                                 "pilot", -1, self.space, self.d_prime,
                                 rank_high, self.jobs)
        return float(record.aggregate)
