"""Kernel backend selection.

The compiled extension ``hdcov._core`` is used when it imports; otherwise the
numpy fallback in ``hdcov._kernels_py`` is used. Set ``HDCOV_PURE_PYTHON=1`` to
force the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

import numpy as np

from hdcov import _kernels_py
from hdcov.errors import BadArgument


def _load_compiled() -> ModuleType | None:
    if os.environ.get("HDCOV_PURE_PYTHON", "").lower() in ("1", "true", "yes"):
        return None
    try:
        from hdcov import _core
    except ImportError:
        return None
    return _core


_compiled = _load_compiled()
_impl: ModuleType = _compiled if _compiled is not None else _kernels_py

BACKEND = "compiled" if _compiled is not None else "python"


def available_backends() -> list[str]:
    names = ["python"]
    try:
        from hdcov import _core  # noqa: F401
    except ImportError:
        return names
    return ["compiled", *names]


def backend(name: str) -> ModuleType:
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from hdcov import _core

        return _core
    raise BadArgument(f"unknown backend {name!r}")


def _c(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def summaries(S, want_logdet: bool = True) -> tuple[float, float, float]:
    """``(tr S, ||S||_F^2, log det S)``; log det is nan when S is not PD."""
    return _impl.summaries(_c(S), want_logdet)


def assemble_hessian(a1, K, a2, P, a3, G, M, D, a5, a6, W, a7, X) -> np.ndarray:
    return _impl.assemble_hessian(
        float(a1), _c(K), float(a2), _c(P), float(a3), _c(G), _c(M), _c(D),
        float(a5), float(a6), _c(W), float(a7), _c(X),
    )


def ks_distance(z_sorted) -> float:
    return float(_impl.ks_distance(_c(z_sorted)))
