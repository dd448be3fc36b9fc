"""Null calibration (m, sigma) for each test and the one-sided decision rule."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.special import digamma, ndtri

from hdcov import rng
from hdcov.errors import BadArgument, BadDimension, Unsupported
from hdcov.statistics import (
    JOHN,
    LOGDET_KINDS,
    LRT,
    NAGAO,
    SHORT_NAMES,
    canonical_kind,
    check_dimensions,
    statistic_from_data,
    statistic_known_mean,
)

METHODS = ("asymptotic", "exact", "monte_carlo")
SCHEMA_VERSION = 1
MIN_REPS = 100


@dataclass(frozen=True)
class NullCalibration:
    kind: str
    n: int
    p: int
    m: float
    sigma: float
    method: str
    reps: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise BadArgument(f"unknown calibration method {self.method!r}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise BadArgument(f"sigma must be positive and finite, got {self.sigma}")
        if not math.isfinite(self.m):
            raise BadArgument("m must be finite")

    @property
    def N(self) -> int:
        return self.n - 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> NullCalibration:
        try:
            return cls(
                kind=canonical_kind(d["kind"]),
                n=int(d["n"]),
                p=int(d["p"]),
                m=float(d["m"]),
                sigma=float(d["sigma"]),
                method=str(d["method"]),
                reps=int(d.get("reps", 0)),
                seed=int(d.get("seed", 0)),
            )
        except KeyError as exc:
            raise BadArgument(f"calibration record lacks field {exc.args[0]!r}") from None

    @classmethod
    def read(cls, path: str | Path) -> NullCalibration:
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise BadArgument(f"{path}: malformed calibration JSON ({exc})") from None
        if not isinstance(d, dict):
            raise BadArgument(f"{path}: calibration record must be a JSON object")
        return cls.from_dict(d)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())


def z_alpha(alpha: float) -> float:
    """Upper alpha quantile of the standard normal."""
    if not 0.0 < alpha < 1.0:
        raise BadArgument(f"alpha must lie in (0, 1), got {alpha}")
    return float(-ndtri(alpha))


def _check_shape(kind: str, n: int, p: int) -> int:
    if int(n) != n or int(p) != p or n < 2 or p < 1:
        raise BadArgument(f"need integers n >= 2 and p >= 1, got n={n}, p={p}")
    N = int(n) - 1
    check_dimensions(kind, N, int(p))
    return N


def null_variance_asymptotic(kind: str, n: int, p: int) -> float:
    kind = canonical_kind(kind)
    N = _check_shape(kind, n, p)
    if kind in LOGDET_KINDS:
        y = p / N
        return 0.5 * N * N * (-y - math.log1p(-y))
    return p * p / 4.0


def null_mean_exact(kind: str, n: int, p: int) -> float:
    """Finite-sample null mean.

    Nagao's mean is exact from its moment display. The two log-determinant
    statistics use the Wishart identity for E log det and E log tr (digamma
    sums), which is standard distribution theory rather than part of the
    method itself. John's statistic has no closed form here.
    """
    kind = canonical_kind(kind)
    N = _check_shape(kind, n, p)
    if kind == NAGAO:
        return 0.25 * p * (1.0 - 2.0 / N)
    if kind == JOHN:
        raise Unsupported("no closed-form null mean for john; use Monte Carlo calibration")
    i = np.arange(1, p + 1)
    e_logdet = float(np.sum(digamma((N - i + 1) / 2.0))) + p * math.log(2.0) - p * math.log(N)
    if kind == LRT:
        return -0.5 * N * e_logdet
    e_logtr = float(digamma(N * p / 2.0)) + math.log(2.0) - math.log(N)
    return 0.5 * N * (p * e_logtr - e_logdet - p * math.log(p))


def null_calibrate_asymptotic(kind: str, n: int, p: int) -> NullCalibration:
    """Asymptotic sigma with the exact null mean (unsupported for john)."""
    kind = canonical_kind(kind)
    return NullCalibration(
        kind, int(n), int(p), null_mean_exact(kind, n, p),
        math.sqrt(null_variance_asymptotic(kind, n, p)), "asymptotic",
    )


def null_statistics_mc(
    kind: str, n: int, p: int, reps: int, seed: int, threads: int | None = None, tag: int | None = None
) -> np.ndarray:
    """Statistic values over ``reps`` null datasets (known mean, N = n - 1 rows, Sigma = I)."""
    kind = canonical_kind(kind)
    N = _check_shape(kind, n, p)
    tag = rng.tag_of("null", kind, n, p) if tag is None else tag

    def one(g: np.random.Generator, _r: int) -> float:
        return statistic_known_mean(kind, g.standard_normal((N, p)))

    return rng.replicate_map(one, reps, seed, tag, threads)


def null_calibrate_mc(
    kind: str, n: int, p: int, reps: int, seed: int, threads: int | None = None, tag: int | None = None
) -> NullCalibration:
    kind = canonical_kind(kind)
    if reps < MIN_REPS:
        raise BadArgument(f"Monte Carlo calibration needs reps >= {MIN_REPS}, got {reps}")
    values = null_statistics_mc(kind, n, p, reps, seed, threads, tag)
    return NullCalibration(
        kind, int(n), int(p), float(np.mean(values)), float(np.std(values, ddof=1)),
        "monte_carlo", int(reps), rng.check_seed(seed),
    )


@dataclass(frozen=True)
class Decision:
    statistic: float
    zscore: float
    reject: bool
    z_alpha: float

    def to_dict(self) -> dict:
        return asdict(self)


def decide_value(value: float, calib: NullCalibration, alpha: float) -> Decision:
    z = z_alpha(alpha)
    score = (value - calib.m) / calib.sigma
    return Decision(float(value), float(score), bool(score > z), z)


def decide(kind: str, X, calib: NullCalibration, alpha: float, mean: str = "unknown") -> Decision:
    """Reject iff the standardized statistic strictly exceeds z_alpha.

    With ``mean="unknown"`` X has n rows and is centered; with ``mean="known"``
    it has N = n - 1 mean-zero rows.
    """
    kind = canonical_kind(kind)
    if kind != calib.kind:
        raise BadArgument(f"calibration is for {SHORT_NAMES[calib.kind]}, not {SHORT_NAMES[kind]}")
    X = np.asarray(X, dtype=np.float64)
    rows = calib.n if mean == "unknown" else calib.n - 1
    if X.ndim != 2 or X.shape != (rows, calib.p):
        raise BadDimension(f"data has shape {X.shape}, calibration expects ({rows}, {calib.p})")
    return decide_value(statistic_from_data(kind, X, mean), calib, alpha)

