from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from hdcov import _kernels, rng
from hdcov.calibration import NullCalibration, null_calibrate_mc, null_statistics_mc, z_alpha
from hdcov.errors import (
    BadArgument,
    BadDimension,
    DegenerateStatistic,
    RatioTooLarge,
    TooLarge,
    UnknownMoment,
)
from hdcov.model import as_psd, sym_sqrt
from hdcov.statistics import canonical_kind, check_dimensions, sample_cov_known_mean, statistic_known_mean

U_MAX = 2048


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    reps: int
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def estimate(values: np.ndarray, seed: int) -> McEstimate:
    mean, se = rng.mean_and_se(values)
    return McEstimate(mean, se, int(np.shape(values)[0]), int(seed))


def _root(Sigma) -> tuple[np.ndarray, bool]:
    """Square root of Sigma and whether it is diagonal (so sampling can scale columns)."""
    Sigma = as_psd(Sigma)
    diag = np.count_nonzero(Sigma - np.diag(np.diagonal(Sigma))) == 0
    if diag:
        return np.sqrt(np.diagonal(Sigma)), True
    return sym_sqrt(Sigma), False


def _transform(Z: np.ndarray, root: np.ndarray, diag: bool) -> np.ndarray:
    return Z * root if diag else Z @ root


def gaussian_sample(Sigma, mu, rows: int, seed: int, tag: int = 0) -> np.ndarray:
    """``rows`` i.i.d. N(mu, Sigma) observations as a rows x p matrix."""
    root, diag = _root(Sigma)
    p = root.shape[0]
    mu = np.zeros(p) if mu is None else np.asarray(mu, dtype=np.float64).ravel()
    if mu.shape[0] != p:
        raise BadDimension(f"mu has length {mu.shape[0]}, expected {p}")
    if rows < 1:
        raise BadArgument("rows must be positive")
    Z = rng.substream(seed, tag, 0).standard_normal((rows, p))
    return _transform(Z, root, diag) + mu


def empirical_power(
    kind: str,
    Sigma,
    n: int,
    p: int,
    alpha: float,
    calib: NullCalibration,
    reps: int,
    seed: int,
    threads: int | None = None,
) -> McEstimate:
    """Rejection rate of the calibrated test over datasets drawn from N(0, Sigma) (known mean, N = n - 1 rows)."""
    kind = canonical_kind(kind)
    if calib.kind != kind or calib.n != n or calib.p != p:
        raise BadArgument("calibration does not match (kind, n, p)")
    z = z_alpha(alpha)
    values = statistics_mc(kind, Sigma, n, p, reps, seed, threads)
    rate = float(np.mean((values - calib.m) / calib.sigma > z))
    return McEstimate(rate, math.sqrt(rate * (1.0 - rate) / reps), reps, seed)


def statistics_mc(
    kind: str, Sigma, n: int, p: int, reps: int, seed: int, threads: int | None = None
) -> np.ndarray:
    """Statistic values over datasets drawn from N(0, Sigma) (known mean, N = n - 1 rows)."""
    kind = canonical_kind(kind)
    N = n - 1
    check_dimensions(kind, N, p)
    root, diag = _root(Sigma)
    if root.shape[0] != p:
        raise BadDimension(f"Sigma has dimension {root.shape[0]}, expected {p}")

    def one(g: np.random.Generator, _r: int) -> float:
        return statistic_known_mean(kind, _transform(g.standard_normal((N, p)), root, diag))

    return rng.replicate_map(one, reps, seed, rng.tag_of("alternative", kind, n, p), threads)


def kolmogorov_distance(sample) -> float:
    """Exact sup-distance between the empirical CDF of ``sample`` and the standard normal CDF."""
    z = np.sort(np.asarray(sample, dtype=np.float64).ravel())
    if z.size == 0:
        raise BadArgument("empty sample")
    return _kernels.ks_distance(z)


@dataclass(frozen=True)
class CltCheck:
    kind: str
    n: int
    p: int
    d_kol: float
    reps: int
    seed: int
    calib_m: float
    calib_sigma: float

    def to_dict(self) -> dict:
        return asdict(self)


def null_clt_check(
    kind: str, n: int, p: int, reps: int, seed: int, threads: int | None = None, calib_reps: int | None = None
) -> CltCheck:
    """d_Kol of null statistics standardized by a calibration drawn from a disjoint stream."""
    kind = canonical_kind(kind)
    if reps < 1000:
        raise BadArgument(f"CLT check needs reps >= 1000, got {reps}")
    calib = null_calibrate_mc(
        kind, n, p, calib_reps or reps, seed, threads, tag=rng.tag_of("clt-calibration", kind, n, p)
    )
    values = null_statistics_mc(kind, n, p, reps, seed, threads, tag=rng.tag_of("clt-sample", kind, n, p))
    d = kolmogorov_distance((values - calib.m) / calib.sigma)
    return CltCheck(kind, n, p, d, reps, seed, calib.m, calib.sigma)


MOMENTS = ("E_tr_S2", "E_tr2_S", "E_tr_S3", "E_tr3_S", "E_trS_trS2", "E_tr2_S2", "E_trS_trS3")
GENERAL_SIGMA_MOMENTS = ("E_tr_S2", "E_tr2_S")


def wishart_trace_oracle(name: str, Sigma, n: int, p: int) -> float:
    """Closed-form trace moments of S = Z^T Z / N with Z having N = n - 1 Gaussian rows.

    The first two hold for any Sigma; the rest are stated for Sigma = I.
    """
    if name not in MOMENTS:
        raise UnknownMoment(f"unknown moment {name!r}; expected one of {', '.join(MOMENTS)}")
    N = n - 1
    if N < 1 or p < 1:
        raise BadArgument("need n >= 2 and p >= 1")
    Sigma = np.eye(p) if Sigma is None else as_psd(Sigma)
    if Sigma.shape[0] != p:
        raise BadDimension(f"Sigma has dimension {Sigma.shape[0]}, expected {p}")
    if name in GENERAL_SIGMA_MOMENTS:
        t1 = float(np.trace(Sigma))
        t2 = float(np.vdot(Sigma, Sigma))
        if name == "E_tr_S2":
            return (1.0 + 1.0 / N) * t2 + t1 * t1 / N
        return t1 * t1 + 2.0 * t2 / N
    if not np.allclose(Sigma, np.eye(p), rtol=0.0, atol=1e-12):
        raise BadArgument(f"{name} is only available for Sigma = I")
    y = p / N
    if name == "E_tr_S3":
        return p * y * y + 3 * p * y + p + 3 * y * y + 3 * y + 4 * y / N
    if name == "E_tr3_S":
        return p**3 + 6 * p * y + 8 * y / N
    if name == "E_trS_trS2":
        return p * p * y + p * p + p * y + 4 * (y * y + y) + 4 * y / N
    P = float(p)
    N1, N2, N3 = N * (N - 1), N * (N - 1) * (N - 2), N * (N - 1) * (N - 2) * (N - 3)
    if name == "E_tr2_S2":
        total = (
            N * P * (P + 2) * (P + 4) * (P + 6)
            + N1 * (P * (P + 2)) ** 2
            + 2 * N1 * 3 * P * (P + 2)
            + 4 * N1 * P * (P + 2) * (P + 4)
            + 4 * N2 * P * (P + 2)
            + 2 * N2 * P * P * (P + 2)
            + N3 * P * P
        )
    else:
        total = (
            N * P * (P + 2) * (P + 4) * (P + 6)
            + N1 * P * P * (P + 2) * (P + 4)
            + 3 * N1 * P * (P + 2) ** 2
            + 3 * N1 * P * (P + 2) * (P + 4)
            + 3 * N2 * P * (P + 2)
            + 3 * N2 * P * P * (P + 2)
            + N3 * P * P
        )
    return total / N**4


def _trace_moments(S: np.ndarray) -> np.ndarray:
    S2 = S @ S
    t1 = float(np.trace(S))
    t2 = float(np.vdot(S, S))
    t3 = float(np.vdot(S2, S))
    return np.array([t2, t1 * t1, t3, t1**3, t1 * t2, t2 * t2, t1 * t3])


def wishart_trace_mc(Sigma, n: int, p: int, reps: int, seed: int, threads: int | None = None) -> dict[str, McEstimate]:
    """Monte Carlo estimates of every moment in ``MOMENTS`` from one shared set of draws."""
    N = n - 1
    root, diag = _root(np.eye(p) if Sigma is None else Sigma)

    def one(g: np.random.Generator, _r: int) -> np.ndarray:
        X = _transform(g.standard_normal((N, p)), root, diag)
        return _trace_moments(X.T @ X / N)

    vals = rng.replicate_map(one, reps, seed, rng.tag_of("wishart", n, p), threads, width=len(MOMENTS))
    return {name: estimate(vals[:, k], seed) for k, name in enumerate(MOMENTS)}


def spectral_variance_mc(n: int, p: int, reps: int, seed: int, threads: int | None = None) -> McEstimate:
    """Sample variance of b(S) b3(S) - b2(S)^2 under Sigma = I, with a delta-method standard error."""
    N = n - 1

    def one(g: np.random.Generator, _r: int) -> float:
        Z = g.standard_normal((N, p))
        K = Z @ Z.T / N  # shares the nonzero spectrum of S
        w = np.linalg.eigvalsh(K)
        return float(np.sum(w) * np.sum(w**3) - np.sum(w**2) ** 2) / (p * p)

    vals = rng.replicate_map(one, reps, seed, rng.tag_of("spectral-variance", n, p), threads)
    var = float(np.var(vals, ddof=1))
    dev2 = (vals - vals.mean()) ** 2
    se = float(np.std(dev2, ddof=1) / math.sqrt(reps))
    return McEstimate(var, se, reps, seed)


def inverse_opnorm_moment_mc(n: int, p: int, q: float, reps: int, seed: int, threads: int | None = None) -> McEstimate:
    """Monte Carlo E ||S_Z^{-1}||_op^q, restricted to p/N <= 0.9 and q <= (N - p - 1)/8."""
    N = n - 1
    if N < 1 or p < 1:
        raise BadArgument("need n >= 2 and p >= 1")
    if p / N > 0.9:
        raise RatioTooLarge(f"p/N = {p / N:.3f} exceeds 0.9")
    if q > (N - p - 1) / 8.0:
        raise RatioTooLarge(f"q = {q} exceeds (N - p - 1)/8 = {(N - p - 1) / 8.0}")
    if q <= 0:
        raise BadArgument("q must be positive")

    def one(g: np.random.Generator, _r: int) -> float:
        Z = g.standard_normal((N, p))
        lam_min = float(np.linalg.eigvalsh(Z.T @ Z / N)[0])
        return lam_min ** (-q)

    vals = rng.replicate_map(one, reps, seed, rng.tag_of("inverse-moment", n, p, q), threads)
    return estimate(vals, seed)


def _spd_power(w: np.ndarray, Q: np.ndarray, k: float) -> np.ndarray:
    M = (Q * w**k) @ Q.T
    return 0.5 * (M + M.T)


def u_matrix(ell: int, m: int, sign: str, X) -> np.ndarray:
    """kron(X S^{-+ell} X^T, S^{-+m}) / N in row-major index order.

    ``sign="inverse"`` uses negative powers of S, ``sign="plus"`` positive ones.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise BadDimension("X must be a matrix")
    N, p = X.shape
    if N * p > U_MAX:
        raise TooLarge(f"N*p = {N * p} exceeds {U_MAX}")
    if int(ell) != ell or int(m) != m or ell < 0 or m < 0:
        raise BadArgument("ell and m must be nonnegative integers")
    if sign not in ("inverse", "plus"):
        raise BadArgument(f"sign must be 'inverse' or 'plus', got {sign!r}")
    S = sample_cov_known_mean(X)
    w, Q = np.linalg.eigh(S)
    if sign == "inverse":
        if not w[0] > 1e-12 * max(w[-1], 1e-300):
            raise DegenerateStatistic("S is singular; inverse powers undefined")
        left, right = _spd_power(w, Q, -ell), _spd_power(w, Q, -m)
    else:
        left, right = _spd_power(w, Q, ell), _spd_power(w, Q, m)
    A = X @ left @ X.T
    U = np.kron(0.5 * (A + A.T), right) / N
    return U


@dataclass(frozen=True)
class BoundCheck:
    lhs: McEstimate
    rhs: float
    holds: bool

    def to_dict(self) -> dict:
        return {"lhs": self.lhs.to_dict(), "rhs": self.rhs, "holds": self.holds}


def fourth_moment_bound_check(A, N: int, reps: int, seed: int, threads: int | None = None) -> BoundCheck:
    """E ||Z A||_F^4 for an N x p standard normal Z against 4N ||A^T A||_F^2 + N^2 ||A||_F^4."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise BadDimension("A must be a matrix")
    if reps < 1000:
        raise BadArgument("fourth-moment check needs reps >= 1000")
    p = A.shape[0]
    AtA = A.T @ A
    fro2 = float(np.vdot(A, A))
    rhs = 4.0 * N * float(np.vdot(AtA, AtA)) + N * N * fro2 * fro2

    def one(g: np.random.Generator, _r: int) -> float:
        ZA = g.standard_normal((N, p)) @ A
        return float(np.vdot(ZA, ZA)) ** 2

    lhs = estimate(rng.replicate_map(one, reps, seed, rng.tag_of("fourth-moment", N, p), threads), seed)
    return BoundCheck(lhs, rhs, lhs.value <= rhs + 3.0 * lhs.std_error)


def trace_concentration_tail_check(
    Sigma, n: int, p: int, reps: int, seed: int, threads: int | None = None
) -> BoundCheck:
    """Empirical P(tr(Sigma S_Z) < tr(Sigma)/2) against the unit-constant shape exp(-N/20)."""
    if reps < 10000:
        raise BadArgument("tail check needs reps >= 10000")
    N = n - 1
    root, diag = _root(Sigma)
    if root.shape[0] != p:
        raise BadDimension(f"Sigma has dimension {root.shape[0]}, expected {p}")
    half = 0.5 * float(np.sum(root**2)) if diag else 0.5 * float(np.trace(root @ root))

    def one(g: np.random.Generator, _r: int) -> float:
        Y = _transform(g.standard_normal((N, p)), root, diag)
        return float(float(np.vdot(Y, Y)) / N < half)

    hits = rng.replicate_map(one, reps, seed, rng.tag_of("trace-tail", n, p), threads)
    rate = float(np.mean(hits))
    tail = McEstimate(rate, math.sqrt(rate * (1.0 - rate) / reps), reps, seed)
    bound = math.exp(-N / 20.0)
    return BoundCheck(tail, bound, rate <= bound + 3.0 * tail.std_error)
