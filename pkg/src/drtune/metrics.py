"""Embedding quality metrics, each reported as a loss in [0, 1] (smaller = better).

Rank-based metrics are driven by the coranking matrix: entry (k, l) counts
ordered pairs (i, j) whose neighbor rank of j seen from i is k in the
original space and l in the embedding.  From its cumulative sums we get

    Q_NX(K) = (1 / (K n)) * sum_{k<=K, l<=K} C[k, l]
    R_NX(K) = ((n-1) Q_NX(K) - K) / (n - 1 - K)
    AUC     = (sum_K R_NX(K)/K) / (sum_K 1/K)          for K = 1 .. n-2

and the LCMC maximizer K_max = argmax_K (Q_NX(K) - K/(n-1)) splits the
scale axis into the Q-local / Q-global averages.  Quality scores q are
stored as losses 1 - q at this module's boundary.

Neighbor ranks break distance ties by the smaller original index, which
keeps every metric deterministic on degenerate data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.cluster import KMeans
from sklearn.metrics import normalized_mutual_info_score

from .core import DataMatrix, derive_seed
from .errors import DomainError

METRIC_NAMES = ("auc", "q_local", "q_global", "avg_ratio", "pearson_dist", "nmi", "misclass")
TASK_DEPENDENT = ("nmi", "misclass")


def _values(X) -> np.ndarray:
    if isinstance(X, DataMatrix):
        return X.values
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DomainError(f"expected a 2-D matrix, got shape {X.shape}")
    return X


def pairwise_distances(X) -> np.ndarray:
    """Full symmetric Euclidean distance matrix with a zero diagonal."""
    V = _values(X)
    sq = np.sum(V * V, axis=1)
    D2 = sq[:, None] + sq[None, :] - 2.0 * (V @ V.T)
    np.maximum(D2, 0.0, out=D2)
    D = np.sqrt(D2)
    np.fill_diagonal(D, 0.0)
    return D


def rank_matrix(D) -> np.ndarray:
    """Neighbor ranks per row: rank_matrix[i, j] is the rank (1..n-1) of j
    among the neighbors of i, self excluded, ties to the smaller index."""
    n = D.shape[0]
    D = np.array(D, dtype=float)
    np.fill_diagonal(D, -np.inf)  # self sorts first, then drops out as rank 0
    order = np.argsort(D, axis=1, kind="stable")
    ranks = np.empty((n, n), dtype=np.int64)
    ranks[np.arange(n)[:, None], order] = np.arange(n)[None, :]
    return ranks


@dataclass(frozen=True)
class CorankingMatrix:
    """(n-1) x (n-1) rank co-occurrence counts; row/column sums all equal n."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        m = self.n - 1
        if counts.shape != (m, m):
            raise DomainError(f"coranking matrix must be {m}x{m}, got {counts.shape}")
        if counts.min() < 0:
            raise DomainError("coranking counts must be nonnegative")
        if counts.sum() != self.n * m:
            raise DomainError("coranking counts must total n(n-1)")
        if not (np.all(counts.sum(axis=0) == self.n) and np.all(counts.sum(axis=1) == self.n)):
            raise DomainError("coranking row and column sums must equal n")
        object.__setattr__(self, "counts", counts)

    def q_nx_curve(self) -> np.ndarray:
        """Q_NX(K) for K = 1 .. n-1 (index K-1)."""
        T = self.counts.cumsum(axis=0).cumsum(axis=1)
        K = np.arange(1, self.n)
        return np.diagonal(T) / (K * self.n)


def coranking(X, X_star) -> CorankingMatrix:
    """Coranking matrix between a dataset and its embedding."""
    V, W = _values(X), _values(X_star)
    if V.shape[0] != W.shape[0]:
        raise DomainError(f"sample counts differ: {V.shape[0]} vs {W.shape[0]}")
    rank_high = rank_matrix(pairwise_distances(V))
    rank_low = rank_matrix(pairwise_distances(W))
    return coranking_from_ranks(rank_high, rank_low)


def coranking_from_ranks(rank_high, rank_low) -> CorankingMatrix:
    n = rank_high.shape[0]
    off = ~np.eye(n, dtype=bool)
    idx = (rank_high[off] - 1) * (n - 1) + (rank_low[off] - 1)
    counts = np.bincount(idx, minlength=(n - 1) ** 2).reshape(n - 1, n - 1)
    return CorankingMatrix(counts, n)


def q_nx(C: CorankingMatrix, K: int) -> float:
    """Fraction of preserved K-neighborhood relationships."""
    if not 1 <= K <= C.n - 2:
        raise DomainError(f"K must be in [1, {C.n - 2}], got {K}")
    return float(C.counts[:K, :K].sum() / (K * C.n))


def auc_rnx(C: CorankingMatrix) -> float:
    """1 - AUC of the R_NX curve (1/K-weighted mean across scales)."""
    n = C.n
    if n < 3:
        raise DomainError("need n >= 3 for R_NX")
    K = np.arange(1, n - 1)
    q = C.q_nx_curve()[: n - 2]
    r = ((n - 1) * q - K) / (n - 1 - K)
    auc = np.sum(r / K) / np.sum(1.0 / K)
    # R_NX may dip below 0 for worse-than-random embeddings; keep the loss
    # within its declared [0, 1] range
    return float(min(1.0, max(0.0, 1.0 - auc)))


def q_local_global(C: CorankingMatrix) -> tuple[float, float]:
    """(1 - Q_local, 1 - Q_global) split at the LCMC-maximizing scale."""
    n = C.n
    if n < 4:
        raise DomainError("need n >= 4 for the local/global split")
    K = np.arange(1, n - 1)
    q = C.q_nx_curve()[: n - 2]
    k_max = int(np.argmax(q - K / (n - 1))) + 1  # first maximizer = smallest K
    q_local = float(np.mean(q[:k_max]))
    # empty global side only on pathological curves; fall back to the split value
    q_global = float(np.mean(q[k_max:])) if k_max < n - 2 else float(q[k_max - 1])
    return 1.0 - q_local, 1.0 - q_global


def _upper_distances(X, X_star):
    V, W = _values(X), _values(X_star)
    if V.shape[0] != W.shape[0]:
        raise DomainError(f"sample counts differ: {V.shape[0]} vs {W.shape[0]}")
    iu = np.triu_indices(V.shape[0], k=1)
    return pairwise_distances(V)[iu], pairwise_distances(W)[iu]


def avg_distance_ratio(X, X_star) -> float:
    """Mean |ratio - 1| of mean-scaled pairwise distances, clamped to [0, 1].

    Both distance sets are divided by their own mean first, so the loss is 0
    whenever distances are preserved up to a global scale.  Pairs that
    coincide in the original space are excluded.
    """
    high, low = _upper_distances(X, X_star)
    keep = high > 0.0
    if not np.any(keep):
        raise DomainError("all rows coincide; no usable pairs")
    high, low = high[keep], low[keep]
    ratio = (low / low.mean()) / (high / high.mean())
    return float(min(1.0, np.mean(np.abs(ratio - 1.0))))


def pearson_dist_corr(X, X_star) -> float:
    """(1 - Pearson correlation of the two pairwise-distance vectors) / 2."""
    high, low = _upper_distances(X, X_star)
    if (np.std(high) <= 1e-12 * max(1.0, float(np.mean(high)))
            or np.std(low) <= 1e-12 * max(1.0, float(np.mean(low)))):
        raise DomainError("pairwise distances have zero variance")
    rho = float(np.corrcoef(high, low)[0, 1])
    return (1.0 - rho) / 2.0


def nmi_loss(X_star, labels, k=None, seed=0) -> float:
    """1 - NMI between a k-means clustering of the embedding and the labels.

    k-means uses k-means++ starts, 10 restarts, best inertia; NMI uses the
    geometric-mean normalization.
    """
    W = _values(X_star)
    if labels is None:
        raise DomainError("nmi requires class labels")
    labels = np.asarray(labels, dtype=int)
    classes = np.unique(labels)
    if classes.size < 2:
        raise DomainError("nmi needs at least two label classes")
    if k is None:
        k = classes.size
    if k < 2 or W.shape[0] < k:
        raise DomainError(f"invalid cluster count k={k} for n={W.shape[0]}")
    km = KMeans(n_clusters=k, init="k-means++", n_init=10, random_state=seed % 2**32)
    assign = km.fit_predict(W)
    nmi = normalized_mutual_info_score(labels, assign, average_method="geometric")
    return float(1.0 - nmi)


def _stratified_split(labels, train_frac, rng):
    train_idx, test_idx = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        n_test = max(1, int(round((1.0 - train_frac) * idx.size)))
        if idx.size - n_test < 1:
            raise DomainError(f"class {c} cannot supply both a training and a test point")
        test_idx.append(idx[:n_test])
        train_idx.append(idx[n_test:])
    return np.concatenate(train_idx), np.concatenate(test_idx)


def _softmax_fit(X, y, n_classes, l2=1e-4, max_iter=500, lr=0.5, tol=1e-6):
    n, d = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    W = np.zeros((d + 1, n_classes))
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    for _ in range(max_iter):
        logits = Xb @ W
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        grad = Xb.T @ (p - onehot) / n
        grad[:-1] += l2 * W[:-1]  # bias unpenalized
        if np.max(np.abs(grad)) < tol:
            break
        W -= lr * grad
    return W


def misclass_loss(X_star, labels, train_frac=0.8, seed=0) -> float:
    """Test misclassification rate of a multinomial logistic regression.

    Plain gradient descent on the cross-entropy with L2 penalty 1e-4, at
    most 500 iterations, on a stratified train/test split (default 80/20)
    drawn from the given seed.  Features are standardized on the training
    fold.
    """
    W = _values(X_star)
    if labels is None:
        raise DomainError("misclassification rate requires class labels")
    labels = np.asarray(labels, dtype=int)
    classes = np.unique(labels)
    if classes.size < 2:
        raise DomainError("classification needs at least two classes")
    if not 0.0 < train_frac < 1.0:
        raise DomainError("train fraction must be in (0, 1)")
    remap = np.searchsorted(classes, labels)
    rng = np.random.default_rng(seed)
    train, test = _stratified_split(remap, train_frac, rng)

    mu = W[train].mean(axis=0)
    sd = W[train].std(axis=0)
    sd[sd < 1e-12] = 1.0
    Xtr = (W[train] - mu) / sd
    Xte = (W[test] - mu) / sd
    weights = _softmax_fit(Xtr, remap[train], classes.size)
    logits = np.hstack([Xte, np.ones((Xte.shape[0], 1))]) @ weights
    pred = np.argmax(logits, axis=1)
    return float(np.mean(pred != remap[test]))


@dataclass(frozen=True)
class Aggregation:
    """How per-repeat losses collapse to one objective value.

    kind "mean": plain average.
    kind "quantile": the q-quantile with linear interpolation (q=0.5 is the
        outlier-robust median alternative).
    kind "var_penalized": mean + k * variance; the penalty is added because
        values are losses, making the objective conservative under high
        repeat variability.
    """

    kind: str = "mean"
    q: float = 0.5
    k: float = 1.0

    def __post_init__(self):
        if self.kind not in ("mean", "quantile", "var_penalized"):
            raise DomainError(f"unknown aggregation {self.kind!r}")
        if self.kind == "quantile" and not 0.0 < self.q < 1.0:
            raise DomainError("quantile q must be in (0, 1)")
        if self.kind == "var_penalized" and self.k < 0:
            raise DomainError("variance multiplier must be >= 0")

    def apply(self, losses) -> float:
        losses = np.asarray(losses, dtype=float)
        if losses.size == 0:
            raise DomainError("cannot aggregate zero losses")
        if self.kind == "mean":
            return float(np.mean(losses))
        if self.kind == "quantile":
            return float(np.quantile(losses, self.q))
        return float(np.mean(losses) + self.k * np.var(losses))


@dataclass(frozen=True)
class MetricSpec:
    """Which metric to tune, how many repeats, and how to aggregate them."""

    name: str
    n_repeat: int = 10
    aggregation: Aggregation = field(default_factory=Aggregation)
    kmeans_k: int | None = None
    train_frac: float = 0.8

    def __post_init__(self):
        if self.name not in METRIC_NAMES:
            raise DomainError(f"unknown metric {self.name!r} (expected one of {METRIC_NAMES})")
        if self.n_repeat < 1:
            raise DomainError("n_repeat must be >= 1")

    @property
    def needs_labels(self) -> bool:
        return self.name in TASK_DEPENDENT


def single_loss(spec: MetricSpec, X, X_star, labels=None, seed=0,
                rank_high=None) -> float:
    """One metric evaluation for one embedding; rank_high caches the
    original-space neighbor ranks across repeats."""
    name = spec.name
    if name in ("auc", "q_local", "q_global"):
        if rank_high is None:
            rank_high = rank_matrix(pairwise_distances(X))
        C = coranking_from_ranks(rank_high, rank_matrix(pairwise_distances(X_star)))
        if name == "auc":
            return auc_rnx(C)
        local, global_ = q_local_global(C)
        return local if name == "q_local" else global_
    if name == "avg_ratio":
        return avg_distance_ratio(X, X_star)
    if name == "pearson_dist":
        return pearson_dist_corr(X, X_star)
    if name == "nmi":
        return nmi_loss(X_star, labels, spec.kmeans_k, seed)
    return misclass_loss(X_star, labels, spec.train_frac, seed)


def evaluate_metric(spec: MetricSpec, X, X_star_list, labels=None,
                    seed=0) -> tuple[list[float], float]:
    """Per-repeat losses for a list of embeddings plus their aggregate."""
    if len(X_star_list) != spec.n_repeat:
        raise DomainError(f"expected {spec.n_repeat} embeddings, got {len(X_star_list)}")
    if isinstance(X, DataMatrix) and labels is None:
        labels = X.labels
    rank_high = None
    if spec.name in ("auc", "q_local", "q_global"):
        rank_high = rank_matrix(pairwise_distances(X))
    losses = [
        single_loss(spec, X, X_star, labels, derive_seed(seed, r), rank_high)
        for r, X_star in enumerate(X_star_list)
    ]
    return losses, spec.aggregation.apply(losses)
