"""Sample covariances, the four test statistics and their hand-coded derivatives.

Every statistic depends on the data only through ``S = X^T X / N`` and is
evaluated from three summaries: ``tr S``, ``||S||_F^2`` and ``log det S``.
Derivatives are taken with respect to the entries of the ``N x p`` data matrix
``X`` in the known-mean convention. Hessians use the row-major ordering of the
index set ``{(i, j)}``: row ``i`` outer, column ``j`` inner.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from hdcov import _kernels
from hdcov.errors import (
    BadArgument,
    BadDimension,
    BadIndex,
    DegenerateStatistic,
    InsufficientSamples,
    TooLarge,
    ZeroTrace,
)

LRT = "lrt_identity"
NAGAO = "nagao_ledoit_wolf"
LRT_S = "lrt_sphericity"
JOHN = "john"

KINDS = (LRT, NAGAO, LRT_S, JOHN)
ALIASES = {"lrt": LRT, "nagao": NAGAO, "lrt-s": LRT_S, "john": JOHN}
SHORT_NAMES = {v: k for k, v in ALIASES.items()}
SPHERICITY_KINDS = (LRT_S, JOHN)
LOGDET_KINDS = (LRT, LRT_S)

HESSIAN_MAX = 4096


def canonical_kind(kind: str) -> str:
    if kind in KINDS:
        return kind
    try:
        return ALIASES[kind]
    except KeyError:
        raise BadArgument(f"unknown test kind {kind!r}") from None


def _as_data(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise BadDimension(f"data matrix must be 2-D and non-empty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise BadArgument("data matrix has non-finite entries")
    return X


def sample_cov_known_mean(X) -> np.ndarray:
    X = _as_data(X)
    S = X.T @ X / X.shape[0]
    return 0.5 * (S + S.T)


def sample_cov_unknown_mean(X) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(S_*, S)``: the centered covariance with divisor n and its rescaling by n/(n-1)."""
    X = _as_data(X)
    n = X.shape[0]
    if n < 2:
        raise InsufficientSamples(f"need at least 2 rows, got {n}")
    Xc = X - X.mean(axis=0)
    S_star = Xc.T @ Xc / n
    S_star = 0.5 * (S_star + S_star.T)
    return S_star, S_star * (n / (n - 1))


def check_dimensions(kind: str, N: int, p: int) -> None:
    """LRT-type statistics need a non-singular S, which requires p <= N - 1."""
    if kind in LOGDET_KINDS and p > N - 1:
        raise DegenerateStatistic(f"{SHORT_NAMES[kind]} needs p <= N - 1, got N={N}, p={p}")


def _from_summaries(kind: str, tr: float, fro: float, logdet: float, N: int, p: int) -> float:
    if kind == LRT:
        return 0.5 * N * (tr - logdet - p)
    if kind == NAGAO:
        return 0.25 * N * (fro - 2.0 * tr + p - tr * tr / N)
    if kind == LRT_S:
        return 0.5 * N * (p * math.log(tr) - logdet - p * math.log(p))
    return 0.25 * N * (p * p * fro / (tr * tr) - p)


def statistic(kind: str, S, N: int) -> float:
    kind = canonical_kind(kind)
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise BadDimension(f"S must be square, got shape {S.shape}")
    if N < 1:
        raise BadArgument(f"N must be positive, got {N}")
    p = S.shape[0]
    check_dimensions(kind, N, p)
    tr, fro, logdet = _kernels.summaries(S, kind in LOGDET_KINDS)
    if kind in SPHERICITY_KINDS and not tr > 0:
        raise ZeroTrace("tr(S) = 0; sphericity statistics are undefined")
    if kind in LOGDET_KINDS and not math.isfinite(logdet):
        raise DegenerateStatistic("S is singular; log det undefined")
    return _from_summaries(kind, tr, fro, logdet, N, p)


def statistic_from_data(kind: str, X, mean: str = "known") -> float:
    """Statistic of a data matrix; ``mean="unknown"`` centers and uses N = n - 1."""
    X = _as_data(X)
    if mean == "known":
        return statistic(kind, sample_cov_known_mean(X), X.shape[0])
    if mean == "unknown":
        _, S = sample_cov_unknown_mean(X)
        return statistic(kind, S, X.shape[0] - 1)
    raise BadArgument(f"mean must be 'known' or 'unknown', got {mean!r}")


def statistic_known_mean(kind: str, X) -> float:
    """Known-mean statistic of an N x p sample; uses the smaller Gram matrix when p > N."""
    kind = canonical_kind(kind)
    X = np.asarray(X, dtype=np.float64)
    N, p = X.shape
    if kind in LOGDET_KINDS or p <= N:
        return statistic(kind, X.T @ X / N, N)
    K = X @ X.T
    tr = float(np.trace(K)) / N
    fro = float(np.vdot(K, K)) / (N * N)
    if kind == JOHN and not tr > 0:
        raise ZeroTrace("tr(S) = 0; sphericity statistics are undefined")
    return _from_summaries(kind, tr, fro, math.nan, N, p)


def _pieces(kind: str, X: np.ndarray) -> dict:
    N, p = X.shape
    check_dimensions(kind, N, p)
    S = sample_cov_known_mean(X)
    tr = float(np.trace(S))
    out = {"S": S, "tr": tr, "N": N, "p": p}
    if kind in SPHERICITY_KINDS:
        if not tr > 0:
            raise ZeroTrace("tr(S) = 0; sphericity statistics are undefined")
        out["b"] = tr / p
    if kind in LOGDET_KINDS:
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise DegenerateStatistic("S is singular") from None
        if not np.all(np.diagonal(L) > 0):
            raise DegenerateStatistic("S is singular")
        eye = np.eye(p)
        Sinv = np.linalg.solve(L.T, np.linalg.solve(L, eye))
        out["Sinv"] = 0.5 * (Sinv + Sinv.T)
    if kind == JOHN:
        out["b2"] = float(np.vdot(S, S)) / p
    return out


def gradient(kind: str, X) -> np.ndarray:
    kind = canonical_kind(kind)
    X = _as_data(X)
    q = _pieces(kind, X)
    S = q["S"]
    if kind == LRT:
        return X - X @ q["Sinv"]
    if kind == NAGAO:
        return X @ S - X - (q["tr"] / q["N"]) * X
    if kind == LRT_S:
        return X / q["b"] - X @ q["Sinv"]
    b, b2 = q["b"], q["b2"]
    return (X @ S) / b**2 - X * (b2 / b**3)


def hessian(kind: str, X) -> np.ndarray:
    """Dense second derivative, shape ``(N*p, N*p)``."""
    kind = canonical_kind(kind)
    X = _as_data(X)
    N, p = X.shape
    if N * p > HESSIAN_MAX:
        raise TooLarge(f"N*p = {N * p} exceeds the Hessian guard {HESSIAN_MAX}")
    q = _pieces(kind, X)
    S = q["S"]
    zN = np.zeros((N, N))
    zp = np.zeros((p, p))
    zX = np.zeros_like(X)
    if kind in LOGDET_KINDS:
        Sinv = q["Sinv"]
        Y = X @ Sinv
        G = Y @ X.T
        D = np.eye(p) - Sinv
        a5 = a7 = 0.0
        if kind == LRT_S:
            b = q["b"]
            a7 = 1.0 / b - 1.0
            a5 = -2.0 / (N * p * b * b)
        H = _kernels.assemble_hessian(0.0, zN, 1.0 / N, Y, 1.0 / N, G, Sinv, D, a5, 0.0, zX, a7, X)
    elif kind == NAGAO:
        K = X @ X.T
        D = S - np.eye(p)
        H = _kernels.assemble_hessian(
            1.0 / N, K, 1.0 / N, X, 0.0, zN, zp, D, -2.0 / N**2, 0.0, zX, -q["tr"] / N, X
        )
    else:
        b, b2 = q["b"], q["b2"]
        K = X @ X.T
        W = X @ S
        c = 1.0 / (N * b * b)
        H = _kernels.assemble_hessian(
            c, K, c, X, 0.0, zN, zp, S / (b * b),
            6.0 * b2 / (b**4 * N * p), -4.0 / (b**3 * N * p), W, -b2 / b**3, X,
        )
    return 0.5 * (H + H.T)


def _delta(a, b) -> float:
    return 1.0 if a == b else 0.0


def _check_indices(indices: Sequence[Sequence[int]], order: int, N: int, p: int) -> list[tuple[int, int]]:
    if len(indices) != order:
        raise BadIndex(f"need {order} index pairs, got {len(indices)}")
    out = []
    for pair in indices:
        if len(pair) != 2:
            raise BadIndex(f"index {pair!r} is not an (i, j) pair")
        i, j = int(pair[0]), int(pair[1])
        if not (0 <= i < N and 0 <= j < p):
            raise BadIndex(f"index {(i, j)} outside [0,{N}) x [0,{p})")
        out.append((i, j))
    return out


def nagao_third_derivative(indices: Sequence[Sequence[int]], X) -> float:
    """Third partial of the Nagao statistic; linear in X."""
    X = _as_data(X)
    N, p = X.shape
    (i1, j1), (i2, j2), (i3, j3) = _check_indices(indices, 3, N, p)
    d = _delta
    first = (
        d(i1, i3) * d(j1, j2) * X[i2, j3]
        + d(i2, i3) * d(j1, j2) * X[i1, j3]
        + d(i2, i3) * d(j1, j3) * X[i1, j2]
        + d(i1, i3) * d(j2, j3) * X[i2, j1]
        + d(i1, i2) * d(j1, j3) * X[i3, j2]
        + d(i1, i2) * d(j2, j3) * X[i3, j1]
    )
    second = (
        d(i1, i3) * d(j1, j3) * X[i2, j2]
        + d(i2, i3) * d(j2, j3) * X[i1, j1]
        + d(i1, i2) * d(j1, j2) * X[i3, j3]
    )
    return first / N - 2.0 * second / N**2


def nagao_fourth_derivative(indices: Sequence[Sequence[int]], N: int, p: int) -> float:
    """Fourth partial of the Nagao statistic; a constant independent of X."""
    (i1, j1), (i2, j2), (i3, j3), (i4, j4) = _check_indices(indices, 4, N, p)
    d = _delta
    first = (
        d(i1, i3) * d(i2, i4) * d(j1, j2) * d(j3, j4)
        + d(i1, i4) * d(i2, i3) * d(j1, j2) * d(j3, j4)
        + d(i1, i4) * d(i2, i3) * d(j1, j3) * d(j2, j4)
        + d(i1, i3) * d(i2, i4) * d(j1, j4) * d(j2, j3)
        + d(i1, i2) * d(i3, i4) * d(j1, j3) * d(j2, j4)
        + d(i1, i2) * d(i3, i4) * d(j1, j4) * d(j2, j3)
    )
    second = (
        d(i1, i3) * d(i2, i4) * d(j1, j3) * d(j2, j4)
        + d(i1, i4) * d(i2, i3) * d(j1, j4) * d(j2, j3)
        + d(i1, i2) * d(i3, i4) * d(j1, j2) * d(j3, j4)
    )
    return first / N - 2.0 * second / N**2


def nagao_higher_derivatives(order: int, indices: Sequence[Sequence[int]], X) -> float:
    X = _as_data(X)
    if order == 3:
        return nagao_third_derivative(indices, X)
    if order == 4:
        return nagao_fourth_derivative(indices, *X.shape)
    raise BadArgument(f"order must be 3 or 4, got {order!r}")
