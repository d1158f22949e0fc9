# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled t-SNE inner kernel.

Mirrors the pure NumPy fallback exactly (same formulas, same 1e-12 clamp on
Q) but runs the O(n^2 d) pair loops without any n x n temporaries.
"""

from libc.math cimport log

COMPILED = True

cdef double EPS = 1e-12


def kl_grad(double[:, ::1] P, double[:, ::1] Y, double alpha,
            double[:, ::1] grad, bint with_kl=True):
    """Fill ``grad`` with the (possibly exaggerated) KL gradient; return the
    KL divergence of the un-exaggerated P against Q when requested.

    grad_i = 4 * sum_j (alpha * P_ij - Q_ij) * w_ij * (y_i - y_j), with
    Q = w / sum(w) clamped at 1e-12.
    """
    cdef Py_ssize_t n = Y.shape[0]
    cdef Py_ssize_t d = Y.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double Z = 0.0
    cdef double dist, diff, w, q, coef, pij
    cdef double kl = 0.0

    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            dist = 0.0
            for k in range(d):
                diff = Y[i, k] - Y[j, k]
                dist += diff * diff
            Z += 1.0 / (1.0 + dist)

    for i in range(n):
        for k in range(d):
            grad[i, k] = 0.0

    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            dist = 0.0
            for k in range(d):
                diff = Y[i, k] - Y[j, k]
                dist += diff * diff
            w = 1.0 / (1.0 + dist)
            q = w / Z
            if q < EPS:
                q = EPS
            pij = P[i, j]
            coef = 4.0 * (alpha * pij - q) * w
            for k in range(d):
                grad[i, k] += coef * (Y[i, k] - Y[j, k])
            if with_kl and pij > 0.0:
                kl += pij * log(pij / q)

    return kl
