"""Surrogate models over the normalized hyperparameter cube.

Two model families: a Gaussian process with a Matérn-5/2 ARD kernel
(hyperparameters fitted by maximizing the log marginal likelihood with
L-BFGS-B restarts) and a random-forest regressor whose uncertainty is the
across-tree standard deviation.  On top of them sit three acquisition
rules (EI, PI, LCB) in minimization convention and a next-point proposer
that scores a scrambled low-discrepancy candidate set plus perturbations
of the best points seen so far.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg, optimize
from scipy.stats import norm, qmc
from sklearn.ensemble import RandomForestRegressor

from .core import HyperparamSpace, derive_seed
from .errors import DomainError, FitError

SQRT5 = math.sqrt(5.0)
MAX_JITTER = 1e-4

LENGTHSCALE_BOUNDS = (1e-2, 10.0)
NOISE_VAR_BOUNDS = (1e-8, 1.0)
SIGNAL_BOUNDS = (1e-4, 1e2)
N_RESTARTS = 5
N_CANDIDATES = 1024
N_PERTURBED = 10
PERTURB_STD = 0.05


def matern52(XA: np.ndarray, XB: np.ndarray, lengthscales, sigma_f: float) -> np.ndarray:
    """Matérn-5/2 kernel with per-dimension length-scales."""
    A = np.asarray(XA, dtype=float) / lengthscales
    B = np.asarray(XB, dtype=float) / lengthscales
    sqA = np.sum(A * A, axis=1)
    sqB = np.sum(B * B, axis=1)
    r2 = sqA[:, None] + sqB[None, :] - 2.0 * (A @ B.T)
    r = np.sqrt(np.maximum(r2, 0.0))
    return sigma_f**2 * (1.0 + SQRT5 * r + (5.0 / 3.0) * r2) * np.exp(-SQRT5 * r)


def _cholesky_with_jitter(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky factor, escalating additive jitter up to MAX_JITTER."""
    jitter = 0.0
    eye = np.eye(K.shape[0])
    while True:
        try:
            return np.linalg.cholesky(K + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter = 1e-8 if jitter == 0.0 else jitter * 10.0
            if jitter > MAX_JITTER:
                raise FitError("kernel matrix not positive definite even with "
                               f"jitter up to {MAX_JITTER:g}") from None


def _unpack(theta: np.ndarray) -> tuple[float, np.ndarray, float]:
    sigma_f = math.exp(theta[0])
    ell = np.exp(theta[1:-1])
    sigma_n = math.exp(theta[-1])
    return sigma_f, ell, sigma_n


def _neg_lml(theta: np.ndarray, X: np.ndarray, yc: np.ndarray) -> float:
    sigma_f, ell, sigma_n = _unpack(theta)
    n = X.shape[0]
    K = matern52(X, X, ell, sigma_f)
    K[np.diag_indices_from(K)] += sigma_n**2
    try:
        L, _ = _cholesky_with_jitter(K)
    except FitError:
        return 1e25
    alpha = linalg.cho_solve((L, True), yc)
    lml = (-0.5 * float(yc @ alpha) - float(np.sum(np.log(np.diag(L))))
           - 0.5 * n * math.log(2.0 * math.pi))
    if not math.isfinite(lml):
        return 1e25
    return -lml


@dataclass(frozen=True)
class GpModel:
    """Fitted Gaussian-process surrogate (immutable; safe to share)."""

    X: np.ndarray
    y: np.ndarray
    y_mean: float
    sigma_f: float
    lengthscales: np.ndarray
    sigma_n: float
    L: np.ndarray
    alpha: np.ndarray
    lml: float
    lml_trace: tuple[float, ...]  # best LML so far after each restart

    def predict(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Latent (noise-free) posterior mean and std at the given points."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        Ks = matern52(P, self.X, self.lengthscales, self.sigma_f)
        mean = Ks @ self.alpha + self.y_mean
        v = linalg.solve_triangular(self.L, Ks.T, lower=True)
        var = np.maximum(self.sigma_f**2 - np.sum(v * v, axis=0), 0.0)
        return mean, np.sqrt(var)

    def hyperparams(self) -> dict:
        return {"kind": "gp", "sigma_f": float(self.sigma_f),
                "lengthscales": [float(v) for v in self.lengthscales],
                "sigma_n": float(self.sigma_n), "lml": float(self.lml)}


@dataclass(frozen=True)
class ForestModel:
    """Random-forest surrogate; uncertainty = std across tree predictions."""

    X: np.ndarray
    y: np.ndarray
    forest: RandomForestRegressor
    seed: int

    def predict(self, points) -> tuple[np.ndarray, np.ndarray]:
        P = np.atleast_2d(np.asarray(points, dtype=float))
        per_tree = np.stack([tree.predict(P) for tree in self.forest.estimators_])
        return per_tree.mean(axis=0), per_tree.std(axis=0)

    def hyperparams(self) -> dict:
        return {"kind": "forest", "n_trees": int(self.forest.n_estimators),
                "min_samples_leaf": int(self.forest.min_samples_leaf),
                "seed": int(self.seed)}


def _check_training(points, targets) -> tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(points, dtype=float))
    y = np.asarray(targets, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise DomainError(f"got {X.shape[0]} points but {y.size} targets")
    if X.shape[0] < 2:
        raise DomainError("surrogate fitting needs at least 2 points")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DomainError("training data must be finite")
    return X, y


def fit_gp(points, targets, seed: int = 0) -> GpModel:
    """Fit the GP by maximizing the log marginal likelihood.

    The search runs L-BFGS-B from a data-driven start plus N_RESTARTS
    seeded random starts, over (log sigma_f, log lengthscales, log sigma_n)
    with lengthscales in [1e-2, 10] and noise variance in [1e-8, 1].
    Targets are centered; the mean is added back at prediction time.
    """
    X, y = _check_training(points, targets)
    n, d = X.shape
    y_mean = float(y.mean())
    yc = y - y_mean

    spread = float(yc.std())
    sigma_f0 = max(spread, 1e-3)
    bounds = ([(math.log(SIGNAL_BOUNDS[0]), math.log(SIGNAL_BOUNDS[1]))]
              + [(math.log(LENGTHSCALE_BOUNDS[0]), math.log(LENGTHSCALE_BOUNDS[1]))] * d
              + [(0.5 * math.log(NOISE_VAR_BOUNDS[0]), 0.5 * math.log(NOISE_VAR_BOUNDS[1]))])
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    theta0 = np.concatenate([[math.log(sigma_f0)], np.full(d, math.log(0.5)),
                             [math.log(max(0.1 * sigma_f0, 1e-3))]])
    theta0 = np.clip(theta0, lo, hi)
    rng = np.random.default_rng(derive_seed(seed, 17))
    starts = [theta0] + [rng.uniform(lo, hi) for _ in range(N_RESTARTS)]

    best_theta, best_nll = None, np.inf
    trace = []
    for start in starts:
        res = optimize.minimize(_neg_lml, start, args=(X, yc), method="L-BFGS-B",
                                bounds=bounds)
        if res.fun < best_nll:
            best_nll, best_theta = float(res.fun), np.asarray(res.x)
        trace.append(-best_nll)
    if best_theta is None or not math.isfinite(best_nll) or best_nll >= 1e25:
        raise FitError("GP hyperparameter search failed to find a finite likelihood")

    sigma_f, ell, sigma_n = _unpack(best_theta)
    K = matern52(X, X, ell, sigma_f)
    K[np.diag_indices_from(K)] += sigma_n**2
    L, _ = _cholesky_with_jitter(K)
    alpha = linalg.cho_solve((L, True), yc)
    return GpModel(X=X, y=y, y_mean=y_mean, sigma_f=sigma_f, lengthscales=ell,
                   sigma_n=sigma_n, L=L, alpha=alpha, lml=-best_nll,
                   lml_trace=tuple(trace))


def fit_forest(points, targets, seed: int = 0) -> ForestModel:
    """Fit the random-forest surrogate (100 trees, min leaf 2, bootstraps
    and split features drawn from the seed)."""
    X, y = _check_training(points, targets)
    forest = RandomForestRegressor(n_estimators=100, min_samples_leaf=2,
                                   max_features="sqrt", bootstrap=True,
                                   random_state=seed % 2**32)
    forest.fit(X, y)
    return ForestModel(X=X, y=y, forest=forest, seed=seed)


def fit(model_kind: str, points, targets, seed: int = 0):
    if model_kind == "gp":
        return fit_gp(points, targets, seed)
    if model_kind == "forest":
        return fit_forest(points, targets, seed)
    raise DomainError(f"unknown surrogate kind {model_kind!r} (expected 'gp' or 'forest')")


@dataclass(frozen=True)
class AcquisitionSpec:
    """Acquisition rule in minimization convention (targets are losses)."""

    kind: str = "ei"
    xi: float = 0.01
    kappa: float = 1.96
    best_so_far: float | None = None

    def __post_init__(self):
        if self.kind not in ("ei", "pi", "lcb"):
            raise DomainError(f"unknown acquisition {self.kind!r} (expected ei, pi or lcb)")
        if self.xi < 0.0:
            raise DomainError("xi must be >= 0")
        if self.kappa <= 0.0:
            raise DomainError("kappa must be > 0")

    def with_best(self, best: float) -> "AcquisitionSpec":
        return replace(self, best_so_far=float(best))


def acquisition(spec: AcquisitionSpec, mean, std):
    """Score predicted (mean, std) pairs; larger is better for all kinds.

    With improvement = best - xi - mean and z = improvement / std:
    EI = improvement * Phi(z) + std * phi(z), PI = Phi(z), and the LCB
    score is kappa * std - mean.  std = 0 falls back to the limits.
    """
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    if np.any(std < 0.0):
        raise DomainError("std must be >= 0")
    if spec.kind == "lcb":
        return spec.kappa * std - mean
    if spec.best_so_far is None:
        raise DomainError(f"acquisition {spec.kind!r} needs best_so_far")
    improvement = spec.best_so_far - spec.xi - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(std > 0.0, improvement / np.where(std > 0.0, std, 1.0), 0.0)
    if spec.kind == "pi":
        return np.where(std > 0.0, norm.cdf(z), (improvement > 0.0).astype(float))
    ei = np.where(std > 0.0,
                  improvement * norm.cdf(z) + std * norm.pdf(z),
                  np.maximum(improvement, 0.0))
    return np.maximum(ei, 0.0)  # exact nonnegativity (rounding guard)


def candidate_set(model, space: HyperparamSpace, seed: int) -> np.ndarray:
    """1024 scrambled Sobol points plus the 10 best seen points perturbed
    by N(0, 0.05^2) noise, clipped to the cube."""
    d = len(space)
    sob = qmc.Sobol(d, scramble=True, seed=derive_seed(seed, 0))
    candidates = sob.random(N_CANDIDATES)
    order = np.argsort(model.y, kind="stable")[:N_PERTURBED]
    if order.size:
        rng = np.random.default_rng(derive_seed(seed, 1))
        noise = rng.normal(0.0, PERTURB_STD, size=(order.size, d))
        perturbed = np.clip(model.X[order] + noise, 0.0, 1.0)
        candidates = np.vstack([candidates, perturbed])
    return candidates


def propose_next(model, spec: AcquisitionSpec, space: HyperparamSpace,
                 seed: int) -> np.ndarray:
    """Candidate with the highest acquisition value (first on ties)."""
    if spec.kind != "lcb" and spec.best_so_far is None:
        spec = spec.with_best(float(np.min(model.y)))
    candidates = candidate_set(model, space, seed)
    mean, std = model.predict(candidates)
    scores = acquisition(spec, mean, std)
    return candidates[int(np.argmax(scores))]
