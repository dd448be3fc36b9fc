"""Pure numpy fallback for the compiled kernels in ``_core.pyx``."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr


def summaries(S: np.ndarray, want_logdet: bool = True) -> tuple[float, float, float]:
    tr = float(np.trace(S))
    fro = float(np.vdot(S, S))
    if not want_logdet:
        return tr, fro, float("nan")
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return tr, fro, float("nan")
    diag = np.diagonal(L)
    if not np.all(diag > 0.0) or not np.all(np.isfinite(diag)):
        return tr, fro, float("nan")
    return tr, fro, float(2.0 * np.sum(np.log(diag)))


def assemble_hessian(a1, K, a2, P, a3, G, M, D, a5, a6, W, a7, X) -> np.ndarray:
    N, p = X.shape
    eye_n = np.eye(N)
    eye_p = np.eye(p)
    # H[i, j, i', j']
    H = a2 * np.einsum("iJ,Ij->ijIJ", P, P)
    H += a3 * np.einsum("iI,jJ->ijIJ", G, M)
    H += a5 * np.einsum("ij,IJ->ijIJ", X, X)
    H += a6 * (np.einsum("ij,IJ->ijIJ", W, X) + np.einsum("ij,IJ->ijIJ", X, W))
    H += a1 * np.einsum("iI,jJ->ijIJ", K, eye_p)
    H += np.einsum("iI,jJ->ijIJ", eye_n, D)
    H += a7 * np.einsum("iI,jJ->ijIJ", eye_n, eye_p)
    return H.reshape(N * p, N * p)


def ks_distance(z_sorted: np.ndarray) -> float:
    n = z_sorted.shape[0]
    phi = ndtr(z_sorted)
    idx = np.arange(n, dtype=np.float64)
    hi = (idx + 1.0) / n - phi
    lo = phi - idx / n
    return float(max(hi.max(initial=0.0), lo.max(initial=0.0), 0.0))
