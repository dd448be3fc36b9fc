"""Gaussian contiguity diagnostics.

The transfer map of a statistic T under covariance Sigma sends a standard
normal N x p matrix Z to grad T(Z Sigma^{1/2} + 1 mu^T) Sigma^{1/2}. Its mean
squared Frobenius distance from the null map is the dispersion V^2, and the
ratio err_bar = V / max(|mean gap|, sigma_null) controls how well the null
limit transfers to the alternative. Universal constants in the resulting bounds
are unknown, so bound terms are reported with unit constants as shapes only.

For the sphericity statistics the map is unchanged when Sigma is rescaled, so
the null reference is the identity after normalizing Sigma to unit mean
eigenvalue; every scaled identity gives the same dispersion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hdcov import rng
from hdcov.calibration import null_variance_asymptotic
from hdcov.errors import BadArgument, BadDimension
from hdcov.mclab import McEstimate, estimate
from hdcov.model import as_psd, normalize_sphericity, sym_sqrt
from hdcov.power import mean_gap_leading
from hdcov.statistics import (
    LRT,
    LRT_S,
    NAGAO,
    SPHERICITY_KINDS,
    canonical_kind,
    check_dimensions,
    gradient,
)


def tmap(kind: str, Sigma, mu, Z) -> np.ndarray:
    kind = canonical_kind(kind)
    Z = np.asarray(Z, dtype=np.float64)
    root = sym_sqrt(Sigma)
    if root.shape[0] != Z.shape[1]:
        raise BadDimension(f"Sigma is {root.shape[0]}-dimensional but Z has {Z.shape[1]} columns")
    X = Z @ root
    if mu is not None:
        X = X + np.asarray(mu, dtype=np.float64).ravel()
    return gradient(kind, X) @ root


def _reference(kind: str, Sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(alternative, null) pair of covariances entering the dispersion."""
    p = Sigma.shape[0]
    if kind in SPHERICITY_KINDS:
        return normalize_sphericity(Sigma), np.eye(p)
    return Sigma, np.eye(p)


def dispersion_mc(
    kind: str, Sigma, n: int, p: int, reps: int, seed: int, threads: int | None = None
) -> McEstimate:
    """Monte Carlo V^2 with common random numbers for the two maps."""
    kind = canonical_kind(kind)
    if reps < 100:
        raise BadArgument(f"dispersion needs reps >= 100, got {reps}")
    Sigma = as_psd(Sigma)
    if Sigma.shape[0] != p:
        raise BadDimension(f"Sigma has dimension {Sigma.shape[0]}, expected {p}")
    N = n - 1
    check_dimensions(kind, N, p)
    alt, null = _reference(kind, Sigma)
    root_alt, root_null = sym_sqrt(alt), sym_sqrt(null)

    def one(g: np.random.Generator, _r: int) -> float:
        Z = g.standard_normal((N, p))
        D = gradient(kind, Z @ root_alt) @ root_alt - gradient(kind, Z @ root_null) @ root_null
        return float(np.vdot(D, D))

    vals = rng.replicate_map(one, reps, seed, rng.tag_of("dispersion", kind, n, p), threads)
    return estimate(vals, seed)


def dispersion_closed_lrt(Sigma, N: int) -> float:
    """Exact V^2 = N ||Sigma - I||_F^2 for the identity LRT."""
    Sigma = as_psd(Sigma)
    D = Sigma - np.eye(Sigma.shape[0])
    return float(N) * float(np.vdot(D, D))


@dataclass(frozen=True)
class MeanGap:
    """Mean gap m_Sigma - m_H0 split into its leading term and residual.

    ``q`` is the residual functional inside the bracket of the mean display and
    ``residual`` is its contribution to the gap (the bracket prefactor times q).
    For sphericity and John only bound shapes with unit constant are known, so
    ``exact`` is false and ``gap`` is the leading term alone.
    """

    leading: float
    q: float
    residual: float
    exact: bool

    @property
    def gap(self) -> float:
        return self.leading + self.residual if self.exact else self.leading

    @property
    def residual_bound(self) -> float:
        return abs(self.residual)

    def to_dict(self) -> dict:
        return {"leading": self.leading, "q": self.q, "residual": self.residual,
                "residual_bound": self.residual_bound, "exact": self.exact, "gap": self.gap}


def mean_gap_with_residual(kind: str, Sigma, n: int, p: int) -> MeanGap:
    kind = canonical_kind(kind)
    Sigma = as_psd(Sigma)
    N = n - 1
    leading = mean_gap_leading(kind, Sigma, n, p)
    if kind == LRT:
        return MeanGap(leading, 0.0, 0.0, True)
    if kind == NAGAO:
        q = (1.0 / N - 2.0 / N**2) * (float(np.vdot(Sigma, Sigma)) - p)
        return MeanGap(leading, q, 0.25 * N * q, True)
    R = normalize_sphericity(Sigma)
    b2 = float(np.vdot(R, R)) / p
    if kind == LRT_S:
        q = b2 / N
        return MeanGap(leading, q, 0.5 * N * q, False)
    D = R - np.eye(p)
    q = (b2 + 1.0) * math.sqrt(float(np.vdot(D, D))) / math.sqrt(N)
    return MeanGap(leading, q, 0.25 * N * q, False)


def err_ratio(mean_gap: float, sigma_null: float, V: float) -> float:
    """V / max(|mean_gap|, sigma_null)."""
    if not sigma_null > 0:
        raise BadArgument("sigma_null must be positive")
    if V < 0:
        raise BadArgument("V must be nonnegative")
    if V == 0:
        return 0.0
    return V / max(abs(mean_gap), sigma_null)


def err_bar(kind: str, Sigma, n: int, p: int, sigma_null: float, V: float) -> float:
    """Contiguity ratio using the exact gap where known and the leading gap otherwise."""
    return err_ratio(mean_gap_with_residual(kind, Sigma, n, p).gap, sigma_null, V)


def bound_terms(err_null: float, err_bar: float, t: float = 0.0, K: float = 1.0) -> dict[str, float]:
    """Unit-constant shapes of the two transfer bounds.

    ``K`` only indexes the constant of the second bound and does not change the shape.
    """
    if err_null < 0 or err_bar < 0:
        raise BadArgument("bound inputs must be nonnegative")
    return {
        "thm21": err_null + ((1.0 + abs(t)) * err_bar) ** (2.0 / 3.0),
        "cor22": err_null + err_bar ** (4.0 / 9.0),
    }


@dataclass(frozen=True)
class ContiguityReport:
    kind: str
    V: float
    V_std_error: float
    V_method: str
    mean_gap: float
    sigma_null: float
    err_bar: float
    residual_bound: float
    gap_exact: bool
    reference_note: str

    def bound_term_23(self, t: float = 0.0) -> float:
        return ((1.0 + abs(t)) * self.err_bar) ** (2.0 / 3.0)

    @property
    def bound_term_49(self) -> float:
        return self.err_bar ** (4.0 / 9.0)

    def to_dict(self, t: float = 0.0) -> dict:
        return {
            "kind": self.kind,
            "V": self.V,
            "V_std_error": self.V_std_error,
            "V_method": self.V_method,
            "mean_gap": self.mean_gap,
            "sigma_null": self.sigma_null,
            "err_bar": self.err_bar,
            "t": t,
            "bound_term_23": self.bound_term_23(t),
            "bound_term_49": self.bound_term_49,
            "residual_bound": self.residual_bound,
            "gap_exact": self.gap_exact,
            "reference_note": self.reference_note,
            "constants": "unit (shapes only)",
        }


def contiguity_report(
    kind: str,
    Sigma,
    n: int,
    p: int,
    sigma_null: float | None = None,
    reps: int = 0,
    seed: int | None = None,
    threads: int | None = None,
) -> ContiguityReport:
    """Assemble V, the mean gap and err_bar.

    V is exact for the identity LRT; other kinds need ``reps`` and ``seed`` for
    the Monte Carlo dispersion, except at Sigma = I where V is zero.
    """
    kind = canonical_kind(kind)
    Sigma = as_psd(Sigma)
    N = n - 1
    if sigma_null is None:
        sigma_null = math.sqrt(null_variance_asymptotic(kind, n, p))
    gap = mean_gap_with_residual(kind, Sigma, n, p)
    alt, null = _reference(kind, Sigma)
    if np.array_equal(alt, null):
        V2, se, method = 0.0, 0.0, "exact"
    elif kind == LRT:
        V2, se, method = dispersion_closed_lrt(Sigma, N), 0.0, "closed_form"
    else:
        if reps <= 0 or seed is None:
            raise BadArgument(f"{kind} dispersion needs reps > 0 and a seed")
        est = dispersion_mc(kind, Sigma, n, p, reps, seed, threads)
        V2, se, method = est.value, est.std_error, "monte_carlo"
    V = math.sqrt(max(V2, 0.0))
    V_se = se / (2.0 * V) if V > 0 else 0.0
    if kind in SPHERICITY_KINDS:
        note = "null reference I after scale normalization; exact over the scale family, mu fixed at 0, so V is an upper bound on the composite-null infimum"
    else:
        note = "null reference I, mu fixed at 0, so V is an upper bound on the composite-null infimum"
    return ContiguityReport(
        kind, V, V_se, method, gap.gap, float(sigma_null), err_ratio(gap.gap, sigma_null, V),
        gap.residual_bound, gap.exact, note,
    )

