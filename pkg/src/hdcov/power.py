"""Analytic power: leading mean gaps, predicted power and the spiked-model closed forms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from hdcov.calibration import null_variance_asymptotic, z_alpha
from hdcov.errors import BadArgument, BadDimension
from hdcov.model import logdet_chol, as_psd, normalize_sphericity, stein_loss
from hdcov.statistics import JOHN, LOGDET_KINDS, LRT, LRT_S, NAGAO, canonical_kind, check_dimensions


@dataclass(frozen=True)
class PowerPrediction:
    kind: str
    tau: float
    power: float
    components: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "tau": self.tau, "power": self.power, "components": dict(self.components)}


def power_from_tau(tau: float, alpha: float) -> float:
    """1 - Phi(z_alpha - tau), evaluated as Phi(tau - z_alpha) to keep upper-tail precision."""
    z = z_alpha(alpha)
    if tau == math.inf:
        return 1.0
    if tau == -math.inf:
        return 0.0
    return float(ndtr(tau - z))


def _sigma_matrix(Sigma, p: int) -> np.ndarray:
    Sigma = as_psd(Sigma)
    if Sigma.shape[0] != p:
        raise BadDimension(f"Sigma is {Sigma.shape[0]}x{Sigma.shape[0]}, expected p={p}")
    return Sigma


def mean_gap_leading(kind: str, Sigma, n: int, p: int) -> float:
    """Leading-order m_Sigma - m_H0; +inf for singular Sigma under the log-det tests."""
    kind = canonical_kind(kind)
    Sigma = _sigma_matrix(Sigma, p)
    N = n - 1
    if kind == LRT:
        return 0.5 * N * stein_loss(Sigma, np.eye(p))
    if kind == NAGAO:
        D = Sigma - np.eye(p)
        return 0.25 * N * float(np.vdot(D, D))
    R = normalize_sphericity(Sigma)
    if kind == LRT_S:
        logdet = logdet_chol(R)
        return math.inf if logdet == -math.inf else max(-0.5 * N * logdet, 0.0)
    D = R - np.eye(p)
    return 0.25 * N * float(np.vdot(D, D))


def analytic_power(
    kind: str, Sigma, n: int, p: int, alpha: float, sigma_null: float | None = None
) -> PowerPrediction:
    """Predicted power 1 - Phi(z_alpha - gap/sigma_null); sigma_null defaults to the asymptotic value."""
    kind = canonical_kind(kind)
    z_alpha(alpha)
    source = "given"
    if sigma_null is None:
        sigma_null = math.sqrt(null_variance_asymptotic(kind, n, p))
        source = "asymptotic"
    if not sigma_null > 0:
        raise BadArgument(f"sigma_null must be positive, got {sigma_null}")
    gap = mean_gap_leading(kind, Sigma, n, p)
    tau = gap / sigma_null
    return PowerPrediction(
        kind,
        float(tau),
        power_from_tau(tau, alpha),
        {"mean_gap_leading": float(gap), "sigma_null": float(sigma_null), "alpha": float(alpha),
         "sigma_source": source},
    )


def _spikes(a: Sequence[float], p: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).ravel()
    if a.shape[0] != p:
        raise BadDimension(f"spike vector has length {a.shape[0]}, expected p={p}")
    if not np.all(a > -1.0):
        raise BadArgument("every spike must satisfy a_j > -1")
    return a


def spiked_tau(kind: str, a: Sequence[float], n: int, p: int) -> float:
    kind = canonical_kind(kind)
    a = _spikes(a, p)
    N = n - 1
    check_dimensions(kind, N, p)
    abar = float(np.mean(a))
    if kind in LOGDET_KINDS:
        y = p / N
        denom = math.sqrt(2.0 * (-y - math.log1p(-y)))
        if kind == LRT:
            num = float(np.sum(a - np.log1p(a)))
        else:
            num = float(np.sum(np.log1p(abar) - np.log1p(a)))
        return num / denom
    if kind == NAGAO:
        num = float(np.sum(a * a))
    else:
        num = float(np.sum((a - abar) ** 2)) / (1.0 + abar) ** 2
    return num / (2.0 * p / N)


def spiked_power(kind: str, a: Sequence[float], n: int, p: int, alpha: float) -> float:
    return power_from_tau(spiked_tau(kind, a, n, p), alpha)


@dataclass(frozen=True)
class PowerOrdering:
    lrt_vs_lrts: str | None
    na_vs_john: str
    boundary: float
    tau: dict

    def to_dict(self) -> dict:
        return {"lrt_vs_lrts": self.lrt_vs_lrts, "na_vs_john": self.na_vs_john,
                "boundary": self.boundary, "tau": dict(self.tau)}


def _compare(x: float, y: float, left: str, right: str) -> str:
    if abs(x - y) <= 1e-12 * (1.0 + abs(x) + abs(y)):
        return "tie"
    return left if x > y else right


def ordering_boundary(a: Sequence[float]) -> float:
    """abar^2 - mean(a^2) * (1 - (1 + abar)^2); nonnegative exactly when Nagao beats John."""
    a = np.asarray(a, dtype=np.float64)
    abar = float(np.mean(a))
    return abar * abar - float(np.mean(a * a)) * (1.0 - (1.0 + abar) ** 2)


def power_ordering(a: Sequence[float], n: int, p: int, alpha: float) -> PowerOrdering:
    """Which test of each pair has the larger mean shift (hence power) under Sigma(a).

    Comparison is on tau rather than power so that saturated powers still order.
    The LRT pair is omitted (``None``) when p >= N makes those tests degenerate.
    """
    z_alpha(alpha)
    a = _spikes(a, p)
    tau = {NAGAO: spiked_tau(NAGAO, a, n, p), JOHN: spiked_tau(JOHN, a, n, p)}
    lrt_pair = None
    if p <= n - 2:
        tau[LRT] = spiked_tau(LRT, a, n, p)
        tau[LRT_S] = spiked_tau(LRT_S, a, n, p)
        lrt_pair = _compare(tau[LRT], tau[LRT_S], "lrt", "lrt-s")
    na = _compare(tau[NAGAO], tau[JOHN], "nagao", "john")
    return PowerOrdering(lrt_pair, na, ordering_boundary(a), tau)
