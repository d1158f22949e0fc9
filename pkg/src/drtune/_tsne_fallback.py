"""Pure NumPy implementation of the t-SNE inner kernel.

Drop-in replacement for the compiled extension module: same ``kl_grad``
signature, same clamping rules, so the two backends agree to floating-point
reassociation error on a single evaluation.
"""

from __future__ import annotations

import numpy as np

EPS = 1e-12
COMPILED = False


def _student_t_weights(Y: np.ndarray) -> np.ndarray:
    """Unnormalized Student-t affinities w_ij = 1 / (1 + ||y_i - y_j||^2)."""
    sq = np.sum(Y * Y, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (Y @ Y.T)
    np.maximum(d2, 0.0, out=d2)
    W = 1.0 / (1.0 + d2)
    np.fill_diagonal(W, 0.0)
    return W


def kl_grad(P, Y, alpha, grad, with_kl=True) -> float:
    """Fill ``grad`` with the (possibly exaggerated) KL gradient; return the
    KL divergence of the un-exaggerated P against Q when requested.

    grad_i = 4 * sum_j (alpha * P_ij - Q_ij) * w_ij * (y_i - y_j), with
    Q = w / sum(w) clamped at 1e-12.
    """
    P = np.asarray(P, dtype=float)
    Y = np.asarray(Y, dtype=float)
    W = _student_t_weights(Y)
    Z = W.sum()
    Q = np.maximum(W / Z, EPS)
    M = (alpha * P - Q) * W
    grad[:] = 4.0 * (M.sum(axis=1)[:, None] * Y - M @ Y)
    if with_kl:
        mask = P > 0.0
        return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))
    return 0.0
