"""Covariance models and the scalar matrix functionals used everywhere else."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from hdcov.errors import BadArgument, BadDimension, InvalidReference, NotPSD

PSD_TOL = 1e-12
ASYMMETRY_TOL = 1e-8

KINDS = ("identity", "scaled_identity", "diagonal", "spiked", "dense")


@dataclass(frozen=True)
class CovarianceSpec:
    """Declarative description of a covariance matrix.

    ``kind`` selects which of the optional fields is used: ``lam`` for
    ``scaled_identity``, ``eigenvalues`` for ``diagonal``, ``a`` for ``spiked``
    (realized as ``diag(1 + a)``) and ``entries`` for ``dense``.
    """

    kind: str
    p: int
    lam: float | None = None
    eigenvalues: tuple[float, ...] | None = None
    a: tuple[float, ...] | None = None
    entries: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise BadArgument(f"unknown covariance kind {self.kind!r}")
        if not isinstance(self.p, (int, np.integer)) or self.p < 1:
            raise BadDimension(f"p must be a positive integer, got {self.p!r}")
        if self.kind == "scaled_identity":
            if self.lam is None or not self.lam > 0:
                raise BadArgument("scaled_identity needs lambda > 0")
        elif self.kind == "diagonal":
            if self.eigenvalues is None or len(self.eigenvalues) != self.p:
                raise BadDimension("diagonal needs p eigenvalues")
            if any(not v > 0 for v in self.eigenvalues):
                raise BadArgument("diagonal eigenvalues must be positive")
        elif self.kind == "spiked":
            if self.a is None or len(self.a) != self.p:
                raise BadDimension("spiked needs a vector of length p")
            if any(not v > -1 for v in self.a):
                raise BadArgument("spikes must satisfy a_j > -1")
        elif self.kind == "dense":
            if self.entries is None:
                raise BadArgument("dense needs entries")
            if np.shape(self.entries) != (self.p, self.p):
                raise BadDimension(f"dense entries must be {self.p}x{self.p}")

    @classmethod
    def identity(cls, p: int) -> CovarianceSpec:
        return cls("identity", p)

    @classmethod
    def spiked(cls, a: Sequence[float]) -> CovarianceSpec:
        a = tuple(float(v) for v in a)
        return cls("spiked", len(a), a=a)

    @classmethod
    def dense(cls, entries: np.ndarray) -> CovarianceSpec:
        entries = np.asarray(entries, dtype=np.float64)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise BadDimension("dense entries must be a square matrix")
        return cls("dense", entries.shape[0], entries=entries)

    @classmethod
    def from_dict(cls, d: dict[str, Any], base_dir: Path | None = None) -> CovarianceSpec:
        kind = d.get("kind")
        p = d.get("p")
        if kind == "dense":
            if "entries" in d:
                entries = np.asarray(d["entries"], dtype=np.float64)
            elif "path" in d:
                path = Path(d["path"])
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                entries = read_matrix_csv(path)
            else:
                raise BadArgument("dense spec needs 'path' or 'entries'")
            if p is None:
                p = entries.shape[0]
            return cls("dense", int(p), entries=entries)
        if p is None:
            for key in ("eigenvalues", "a"):
                if d.get(key) is not None:
                    p = len(d[key])
        if p is None:
            raise BadDimension("spec needs 'p'")
        return cls(
            kind,
            int(p),
            lam=d.get("lambda"),
            eigenvalues=None if d.get("eigenvalues") is None else tuple(map(float, d["eigenvalues"])),
            a=None if d.get("a") is None else tuple(map(float, d["a"])),
        )

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "p": int(self.p)}
        if self.lam is not None:
            out["lambda"] = self.lam
        if self.eigenvalues is not None:
            out["eigenvalues"] = list(self.eigenvalues)
        if self.a is not None:
            out["a"] = list(self.a)
        if self.entries is not None:
            out["entries"] = np.asarray(self.entries).tolist()
        return out


def read_matrix_csv(path: str | Path, header: bool = False) -> np.ndarray:
    """Comma-separated text, one row per line."""
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1 if header else 0)
    except ValueError as exc:
        raise BadArgument(f"{path}: not a numeric comma-separated matrix ({exc})") from None
    if not np.all(np.isfinite(data)):
        raise BadArgument(f"{path}: non-finite entries")
    return np.asarray(data, dtype=np.float64)


def _parse_json(text: str, what: str) -> dict:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadArgument(f"malformed JSON in {what}: {exc}") from None
    if not isinstance(d, dict):
        raise BadArgument(f"{what} must be a JSON object")
    return d


def load_covariance_spec(source: str, p: int | None = None) -> CovarianceSpec:
    """Parse ``--sigma``: inline JSON, a JSON file, or a dense CSV file."""
    text = source.strip()
    if text.startswith("{"):
        spec = CovarianceSpec.from_dict(_parse_json(text, "sigma spec"))
    else:
        path = Path(source)
        if path.suffix.lower() == ".csv":
            spec = CovarianceSpec.dense(read_matrix_csv(path))
        else:
            spec = CovarianceSpec.from_dict(_parse_json(path.read_text(), str(path)), base_dir=path.parent)
    if p is not None and spec.p != p:
        raise BadDimension(f"sigma has p={spec.p}, expected {p}")
    return spec


def _check_symmetric(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise BadDimension(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise BadArgument("matrix has non-finite entries")
    scale = np.linalg.norm(M)
    if np.linalg.norm(M - M.T) > ASYMMETRY_TOL * max(scale, 1e-300):
        raise BadArgument("matrix is not symmetric")
    return 0.5 * (M + M.T)


def _clip_psd(M: np.ndarray) -> np.ndarray:
    w, Q = np.linalg.eigh(M)
    top = max(float(w[-1]), 0.0)
    if w[0] < -PSD_TOL * top or (top == 0.0 and w[0] < 0.0):
        raise NotPSD(f"smallest eigenvalue {w[0]:.3e} below tolerance (largest {top:.3e})")
    if w[0] >= 0.0:
        return M
    w = np.clip(w, 0.0, None)
    out = (Q * w) @ Q.T
    return 0.5 * (out + out.T)


def build_covariance(spec: CovarianceSpec) -> np.ndarray:
    p = spec.p
    if spec.kind == "identity":
        return np.eye(p)
    if spec.kind == "scaled_identity":
        return float(spec.lam) * np.eye(p)
    if spec.kind == "diagonal":
        return np.diag(np.asarray(spec.eigenvalues, dtype=np.float64))
    if spec.kind == "spiked":
        return np.diag(1.0 + np.asarray(spec.a, dtype=np.float64))
    return _clip_psd(_check_symmetric(spec.entries))


def as_psd(Sigma: np.ndarray) -> np.ndarray:
    """Validate an explicit covariance matrix (symmetrize, PSD check with clipping)."""
    M = _check_symmetric(Sigma)
    if np.count_nonzero(M - np.diag(np.diagonal(M))) == 0:
        d = np.diagonal(M)
        top = max(float(d.max()), 0.0)
        if d.min() < -PSD_TOL * top or (top == 0.0 and d.min() < 0.0):
            raise NotPSD(f"negative diagonal entry {d.min():.3e}")
        return np.diag(np.clip(d, 0.0, None))
    return _clip_psd(M)


def logdet_chol(M: np.ndarray) -> float:
    """log det through Cholesky; -inf when a pivot is non-positive."""
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return -math.inf
    d = np.diagonal(L)
    if not np.all(d > 0):
        return -math.inf
    return float(2.0 * np.sum(np.log(d)))


def stein_loss(Sigma1: np.ndarray, Sigma2: np.ndarray) -> float:
    """tr(S1 S2^-1) - log det(S1 S2^-1) - p, with value +inf for singular S1."""
    S1 = as_psd(Sigma1)
    S2 = _check_symmetric(Sigma2)
    if S1.shape != S2.shape:
        raise BadDimension("Stein loss arguments differ in shape")
    try:
        L2 = np.linalg.cholesky(S2)
    except np.linalg.LinAlgError:
        raise InvalidReference("reference covariance is not positive definite") from None
    if not np.all(np.diagonal(L2) > 0):
        raise InvalidReference("reference covariance is not positive definite")
    # similarity transform L2^-1 S1 L2^-T is symmetric with the same spectrum as S1 S2^-1
    A = np.linalg.solve(L2, S1)
    M = np.linalg.solve(L2, A.T)
    M = 0.5 * (M + M.T)
    logdet = logdet_chol(M)
    if logdet == -math.inf:
        return math.inf
    p = S1.shape[0]
    val = float(np.trace(M)) - logdet - p
    return max(val, 0.0)


def trace_power_mean(M: np.ndarray, ell: int, method: str = "eig") -> float:
    """b_ell(M) = tr(M^ell) / p."""
    if int(ell) != ell or ell < 1:
        raise BadArgument(f"ell must be a positive integer, got {ell!r}")
    M = np.asarray(M, dtype=np.float64)
    p = M.shape[0]
    if method == "eig":
        w = np.linalg.eigvalsh(0.5 * (M + M.T))
        return float(np.sum(w**ell) / p)
    if method == "power":
        return float(np.trace(np.linalg.matrix_power(M, int(ell))) / p)
    raise BadArgument(f"unknown method {method!r}")


def b(M: np.ndarray) -> float:
    """Normalized trace tr(M)/p."""
    M = np.asarray(M)
    return float(np.trace(M)) / M.shape[0]


def normalize_sphericity(Sigma: np.ndarray) -> np.ndarray:
    """Sigma / b(Sigma), the scale-free representative used by the sphericity tests."""
    Sigma = np.asarray(Sigma, dtype=np.float64)
    t = float(np.trace(Sigma))
    if not t > 0:
        raise BadArgument("normalize_sphericity needs tr(Sigma) > 0")
    return Sigma * (Sigma.shape[0] / t)


def sym_sqrt(Sigma: np.ndarray) -> np.ndarray:
    M = as_psd(Sigma)
    if np.count_nonzero(M - np.diag(np.diagonal(M))) == 0:
        return np.diag(np.sqrt(np.diagonal(M)))
    w, Q = np.linalg.eigh(M)
    top = max(float(w[-1]), 0.0)
    if w[0] < -PSD_TOL * top:
        raise NotPSD(f"smallest eigenvalue {w[0]:.3e} below tolerance")
    root = (Q * np.sqrt(np.clip(w, 0.0, None))) @ Q.T
    return 0.5 * (root + root.T)
