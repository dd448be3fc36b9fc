# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Must stay numerically interchangeable with ``_kernels_py``."""

import numpy as np

from libc.math cimport log, sqrt, erfc, isfinite, NAN
from scipy.linalg.cython_lapack cimport dpotrf

cdef double _INV_SQRT2 = 0.7071067811865476


def summaries(const double[:, ::1] S, bint want_logdet=True):
    """Return ``(tr S, ||S||_F^2, log det S)``; log det is nan unless Cholesky succeeds."""
    cdef Py_ssize_t p = S.shape[0]
    cdef Py_ssize_t i, j
    cdef double tr = 0.0, fro = 0.0, logdet = 0.0, d
    for i in range(p):
        tr += S[i, i]
        for j in range(p):
            fro += S[i, j] * S[i, j]
    if not want_logdet:
        return tr, fro, float("nan")

    # S is symmetric, so its row-major buffer is also a valid column-major input
    L_arr = np.array(S, dtype=np.float64, order="C")
    cdef double[:, ::1] L = L_arr
    cdef char uplo = b"L"
    cdef int n = <int>p, info = 0
    if p == 0:
        return tr, fro, 0.0
    with nogil:
        dpotrf(&uplo, &n, &L[0, 0], &n, &info)
        if info != 0:
            logdet = NAN
        else:
            for j in range(p):
                d = L[j, j]
                if not (d > 0.0) or not isfinite(d):
                    logdet = NAN
                    break
                logdet += 2.0 * log(d)
    return tr, fro, logdet


def assemble_hessian(
    double a1, const double[:, ::1] K,
    double a2, const double[:, ::1] P,
    double a3, const double[:, ::1] G, const double[:, ::1] M,
    const double[:, ::1] D,
    double a5, double a6, const double[:, ::1] W,
    double a7,
    const double[:, ::1] X,
):
    """Fill the (Np)x(Np) Hessian from precomputed pieces (row-major, i outer)."""
    cdef Py_ssize_t N = X.shape[0], p = X.shape[1]
    cdef Py_ssize_t i, j, ii, jj, r, c
    out = np.zeros((N * p, N * p), dtype=np.float64)
    cdef double[:, ::1] H = out
    cdef double v
    with nogil:
        for i in range(N):
            for j in range(p):
                r = i * p + j
                for ii in range(N):
                    for jj in range(p):
                        c = ii * p + jj
                        v = a2 * P[i, jj] * P[ii, j]
                        v += a3 * G[i, ii] * M[j, jj]
                        v += a5 * X[i, j] * X[ii, jj]
                        v += a6 * (W[i, j] * X[ii, jj] + X[i, j] * W[ii, jj])
                        if j == jj:
                            v += a1 * K[i, ii]
                        if i == ii:
                            v += D[j, jj]
                            if j == jj:
                                v += a7
                        H[r, c] = v
    return out


def ks_distance(const double[::1] z_sorted):
    """Exact sup |F_n - Phi| for an ascending sample."""
    cdef Py_ssize_t n = z_sorted.shape[0], i
    cdef double best = 0.0, phi, lo, hi
    cdef double dn = <double>n
    with nogil:
        for i in range(n):
            phi = 0.5 * erfc(-z_sorted[i] * _INV_SQRT2)
            hi = (i + 1) / dn - phi
            lo = phi - i / dn
            if hi > best:
                best = hi
            if lo > best:
                best = lo
    return best
