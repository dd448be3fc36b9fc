from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def gen() -> np.random.Generator:
    return np.random.default_rng(12345)


def random_spd(g: np.random.Generator, p: int, lo: float = 0.5, hi: float = 2.0) -> np.ndarray:
    Q, _ = np.linalg.qr(g.standard_normal((p, p)))
    M = (Q * g.uniform(lo, hi, p)) @ Q.T
    return 0.5 * (M + M.T)


def fd_grad(f, X: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Fourth-order central differences; kept separate from the library's own oracle."""
    out = np.empty_like(X)
    for idx in np.ndindex(*X.shape):
        vals = []
        for k in (-2, -1, 1, 2):
            Y = X.copy()
            Y[idx] += k * h
            vals.append(f(Y))
        out[idx] = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h)
    return out


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance checks")
        for line in LINES:
            terminalreporter.write_line(line)
