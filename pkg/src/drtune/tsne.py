"""Self-contained t-SNE with a compiled inner kernel and a NumPy fallback.

The embedding minimizes KL(P || Q) between Gaussian input affinities P
(bandwidths calibrated per point to a target perplexity) and Student-t
output affinities Q, by gradient descent with per-coordinate gains,
momentum, and early exaggeration.

Backend selection happens at import: the compiled extension is used when it
built, otherwise the NumPy fallback.  Set DRTUNE_TSNE_BACKEND=python or
=compiled to force one explicitly.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .core import DataMatrix
from .errors import ConfigError, DivergenceError, DomainError

from . import _tsne_fallback

try:
    from . import _tsne_kernels
except ImportError:  # extension not built on this platform
    _tsne_kernels = None

BACKEND_ENV = "DRTUNE_TSNE_BACKEND"


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _tsne_kernels is not None else ("python",)


def get_backend(name: str | None = None):
    """Resolve a kernel module by name, env override, or availability."""
    if name is None:
        name = os.environ.get(BACKEND_ENV, "").strip().lower() or None
    if name is None:
        return _tsne_kernels if _tsne_kernels is not None else _tsne_fallback
    if name == "python":
        return _tsne_fallback
    if name == "compiled":
        if _tsne_kernels is None:
            raise ConfigError("compiled t-SNE backend requested but the extension is not built")
        return _tsne_kernels
    raise ConfigError(f"unknown t-SNE backend {name!r} (expected 'compiled' or 'python')")


def active_backend_name() -> str:
    return "compiled" if get_backend() is _tsne_kernels and _tsne_kernels is not None else "python"


@dataclass(frozen=True)
class TsneConfig:
    """Raw t-SNE hyperparameters and optimizer schedule."""

    perplexity: float
    d_prime: int = 2
    n_iter: int = 1000
    learning_rate: float = 200.0
    momentum_start: float = 0.5
    momentum_final: float = 0.8
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    min_gain: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.perplexity < 1.0:
            raise DomainError(f"perplexity must be >= 1, got {self.perplexity}")
        if self.d_prime < 1:
            raise DomainError("d_prime must be >= 1")
        if self.n_iter < 1:
            raise DomainError("n_iter must be >= 1")
        if self.learning_rate <= 0.0:
            raise DomainError("learning rate must be positive")
        for m in (self.momentum_start, self.momentum_final):
            if not 0.0 <= m < 1.0:
                raise DomainError("momentum must be in [0, 1)")
        if self.early_exaggeration < 1.0:
            raise DomainError("early exaggeration factor must be >= 1")
        if self.exaggeration_iters < 0:
            raise DomainError("exaggeration_iters must be >= 0")
        if self.n_iter < self.exaggeration_iters:
            raise DomainError("n_iter must be >= exaggeration_iters")
        if self.min_gain <= 0.0:
            raise DomainError("min_gain must be positive")


@dataclass(frozen=True)
class Embedding:
    """A low-dimensional embedding plus the parameters that produced it."""

    coords: np.ndarray
    params: dict
    final_kl: float | None = None

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 2:
            raise DomainError(f"embedding coordinates must be 2-D, got shape {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise DomainError("embedding coordinates must be finite")
        if self.final_kl is not None and not (math.isfinite(self.final_kl) and self.final_kl >= 0.0):
            raise DomainError(f"final KL must be finite and >= 0, got {self.final_kl}")
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def d_prime(self) -> int:
        return self.coords.shape[1]


def _squared_distances(V: np.ndarray) -> np.ndarray:
    sq = np.sum(V * V, axis=1)
    D2 = sq[:, None] + sq[None, :] - 2.0 * (V @ V.T)
    np.maximum(D2, 0.0, out=D2)
    np.fill_diagonal(D2, 0.0)
    return D2


@dataclass(frozen=True)
class SigmaCalibration:
    """Result of the per-point bandwidth search.

    ``cond_p`` is the row-stochastic conditional matrix (zero diagonal),
    ``beta`` the per-point precisions 1/(2 sigma^2), and ``converged``
    flags rows whose entropy gap closed within tolerance; non-converged
    rows keep their last bisection state.
    """

    cond_p: np.ndarray
    beta: np.ndarray
    converged: np.ndarray

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(0.5 / self.beta)


def calibrate_sigmas(D2: np.ndarray, perplexity: float, tol: float = 1e-5,
                     max_iter: int = 50) -> SigmaCalibration:
    """Per-point precision calibration by bisection on the Shannon entropy.

    For each row, finds beta_i such that the entropy (in bits) of
    p_{j|i} proportional to exp(-beta_i * d_ij^2) matches log2(perplexity)
    within ``tol``, using at most ``max_iter`` bisection steps.
    """
    D2 = np.asarray(D2, dtype=float)
    n = D2.shape[0]
    if D2.shape != (n, n):
        raise DomainError(f"distance matrix must be square, got {D2.shape}")
    if n < 2:
        raise DomainError("need at least 2 points to calibrate")
    if not 1.0 <= perplexity <= n - 1:
        raise DomainError(f"perplexity must be in [1, {n - 1}], got {perplexity}")
    target = math.log2(perplexity)
    ln2 = math.log(2.0)

    off = ~np.eye(n, dtype=bool)
    d2 = D2[off].reshape(n, n - 1)
    # shifting each row by its min leaves p_{j|i} unchanged and keeps exp in range
    d2 = d2 - d2.min(axis=1, keepdims=True)

    beta = np.ones(n)
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    W = np.empty_like(d2)
    diff = np.zeros(n)
    for step in range(max_iter):
        np.exp(-beta[:, None] * d2, out=W)
        s = W.sum(axis=1)  # >= 1 because each row has a zero entry
        avg = (W * d2).sum(axis=1) / s
        H = np.log2(s) + beta * avg / ln2
        diff = H - target
        if np.all(np.abs(diff) <= tol) or step == max_iter - 1:
            break
        # entropy decreases in beta: too-high entropy means beta must grow
        up = diff > tol
        down = diff < -tol
        lo[up] = beta[up]
        hi[down] = beta[down]
        grow = up & np.isinf(hi)
        beta = np.where(grow, beta * 2.0, beta)
        mid = ~grow & (up | down)
        beta = np.where(mid, 0.5 * (lo + hi), beta)

    cond = np.zeros((n, n))
    cond[off] = (W / s[:, None]).ravel()
    return SigmaCalibration(cond_p=cond, beta=beta, converged=np.abs(diff) <= tol)


def joint_probabilities(X, perplexity: float) -> np.ndarray:
    """Symmetrized joint affinities P from data and a target perplexity.

    P = (P_cond + P_cond^T) / (2n), off-diagonal entries clamped at 1e-12
    and then renormalized to sum to one; diagonal is zero.
    """
    V = X.values if isinstance(X, DataMatrix) else np.asarray(X, dtype=float)
    n = V.shape[0]
    cond = calibrate_sigmas(_squared_distances(V), perplexity).cond_p
    P = (cond + cond.T) / (2.0 * n)
    np.maximum(P, 1e-12, out=P)
    np.fill_diagonal(P, 0.0)
    P /= P.sum()
    return np.ascontiguousarray(P)


def kl_and_gradient(P: np.ndarray, Y: np.ndarray, alpha: float = 1.0,
                    backend=None) -> tuple[float, np.ndarray]:
    """KL(P || Q) and the descent gradient at exaggeration factor ``alpha``.

    The returned KL is always that of the plain P (exaggeration enters the
    gradient only), so at alpha=1 value and gradient are exactly consistent.
    """
    if backend is None or isinstance(backend, str):
        backend = get_backend(backend)
    P = np.ascontiguousarray(P, dtype=float)
    Y = np.ascontiguousarray(Y, dtype=float)
    grad = np.empty_like(Y)
    kl = backend.kl_grad(P, Y, alpha, grad, True)
    return float(kl), grad


def _descend(P: np.ndarray, Y: np.ndarray, config: TsneConfig, backend) -> tuple[np.ndarray, float]:
    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)
    grad = np.empty_like(Y)
    exag_end = config.exaggeration_iters
    for it in range(config.n_iter):
        early = it < exag_end
        alpha = config.early_exaggeration if early else 1.0
        momentum = config.momentum_start if early else config.momentum_final
        backend.kl_grad(P, Y, alpha, grad, False)
        shrink = (grad > 0.0) == (velocity > 0.0)
        gains[shrink] *= 0.8
        gains[~shrink] += 0.2
        np.maximum(gains, config.min_gain, out=gains)
        velocity = momentum * velocity - config.learning_rate * (gains * grad)
        Y += velocity
        Y -= Y.mean(axis=0)
        if not np.all(np.isfinite(Y)):
            raise DivergenceError(it)
    kl = backend.kl_grad(P, Y, 1.0, grad, True)
    return Y, max(float(kl), 0.0)


def run_tsne(X, config: TsneConfig, backend=None) -> Embedding:
    """Run the full t-SNE pipeline on a data matrix.

    Initialization is N(0, 1e-4^2) i.i.d. from the config seed; the
    embedding is recentered every iteration.  Raises DivergenceError if the
    coordinates ever become non-finite.
    """
    V = X.values if isinstance(X, DataMatrix) else np.asarray(X, dtype=float)
    n = V.shape[0]
    if n < 5:
        raise DomainError(f"t-SNE needs n >= 5, got n={n}")
    if config.perplexity > n - 1:
        raise DomainError(f"perplexity {config.perplexity} needs n > {config.perplexity}, got n={n}")
    if backend is None or isinstance(backend, str):
        backend = get_backend(backend)
    P = joint_probabilities(V, config.perplexity)
    rng = np.random.default_rng(config.seed)
    Y = rng.normal(0.0, 1e-4, size=(n, config.d_prime))
    Y, kl = _descend(P, Y, config, backend)
    params = {
        "perplexity": float(config.perplexity),
        "d_prime": int(config.d_prime),
        "n_iter": int(config.n_iter),
        "learning_rate": float(config.learning_rate),
        "early_exaggeration": float(config.early_exaggeration),
        "exaggeration_iters": int(config.exaggeration_iters),
        "seed": int(config.seed),
    }
    return Embedding(coords=Y, params=params, final_kl=kl)
