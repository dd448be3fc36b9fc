from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hdcov import rng
from hdcov.calibration import (
    NullCalibration,
    decide,
    decide_value,
    null_calibrate_asymptotic,
    null_calibrate_mc,
    null_mean_exact,
    null_statistics_mc,
    null_variance_asymptotic,
    z_alpha,
)
from hdcov.errors import BadArgument, BadDimension, DegenerateStatistic, Unsupported
from hdcov.mclab import statistics_mc


def mp_upper_quantile(alpha: float) -> float:
    mpmath.mp.dps = 40
    return float(-mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(alpha) - 1))


@given(st.floats(1e-8, 1 - 1e-8))
def test_z_alpha_against_high_precision(alpha):
    assert abs(z_alpha(alpha) - mp_upper_quantile(alpha)) <= 1e-9


def test_z_alpha_domain():
    assert z_alpha(0.5) == 0.0
    assert z_alpha(0.05) == pytest.approx(1.6448536269514722, abs=1e-12)
    for bad in (0.0, 1.0, -0.1, float("nan")):
        with pytest.raises(BadArgument):
            z_alpha(bad)


def test_variance_examples():
    assert null_variance_asymptotic("lrt", 101, 50) == pytest.approx(5000 * (-0.5 - math.log(0.5)), abs=1e-9)
    assert null_variance_asymptotic("lrt", 101, 50) == pytest.approx(965.735903, abs=1e-6)
    assert null_variance_asymptotic("nagao", 33, 10) == 25.0
    assert null_variance_asymptotic("john", 5, 2) == 1.0
    assert null_variance_asymptotic("lrt-s", 101, 50) == null_variance_asymptotic("lrt", 101, 50)


def test_mean_examples():
    assert null_mean_exact("nagao", 11, 4) == pytest.approx(0.8)
    assert null_mean_exact("nagao", 3, 4) == 0.0
    with pytest.raises(Unsupported):
        null_mean_exact("john", 11, 4)
    with pytest.raises(DegenerateStatistic):
        null_mean_exact("lrt", 10, 20)


def test_calibration_record_roundtrip(tmp_path):
    c = null_calibrate_asymptotic("nagao", 51, 10)
    assert c.method == "asymptotic" and c.sigma == 5.0
    path = tmp_path / "c.json"
    c.write(path)
    assert NullCalibration.read(path) == c
    assert '"schema_version": 1' in path.read_text()
    with pytest.raises(BadArgument):
        NullCalibration.from_dict({"kind": "lrt", "n": 5})
    with pytest.raises(BadArgument):
        NullCalibration("john", 5, 2, 0.0, -1.0, "monte_carlo")


def test_decide_strict_inequality():
    calib = NullCalibration("nagao_ledoit_wolf", 11, 2, 0.0, 1.0, "monte_carlo", 100, 1)
    assert not decide_value(z_alpha(0.05), calib, 0.05).reject
    assert decide_value(np.nextafter(z_alpha(0.05), 10.0), calib, 0.05).reject
    d = decide_value(0.0, calib, 0.5)
    assert d.zscore == 0.0 and not d.reject


def test_decide_shape_checks():
    calib = null_calibrate_asymptotic("nagao", 11, 2)
    with pytest.raises(BadDimension):
        decide("nagao", np.ones((10, 2)), calib, 0.05)
    with pytest.raises(BadArgument):
        decide("lrt", np.ones((11, 2)), calib, 0.05)
    g = np.random.default_rng(0)
    assert decide("nagao", g.standard_normal((10, 2)), calib, 0.05, mean="known").z_alpha > 0


def test_mc_calibration_reproducible_across_threads():
    a = null_calibrate_mc("john", 21, 5, 500, 11, threads=1)
    b = null_calibrate_mc("john", 21, 5, 500, 11, threads=4)
    assert (a.m, a.sigma) == (b.m, b.sigma)
    with pytest.raises(BadArgument):
        null_calibrate_mc("john", 21, 5, 50, 11)


def test_sphericity_calibration_scale_free():
    for kind in ("lrt-s", "john"):
        base = statistics_mc(kind, np.eye(6), 31, 6, 300, 5, 1)
        scaled = statistics_mc(kind, 7.5 * np.eye(6), 31, 6, 300, 5, 1)
        assert np.allclose(base, scaled, rtol=1e-10, atol=1e-10)


@pytest.mark.slow
def test_nagao_mc_mean_matches_exact():
    c = null_calibrate_mc("nagao", 51, 10, 20000, 7)
    assert abs(c.m - 2.4) <= 4 * c.sigma / math.sqrt(c.reps)


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["lrt", "lrt-s"])
def test_logdet_exact_mean_matches_mc(kind):
    vals = null_statistics_mc(kind, 61, 10, 20000, 3)
    se = np.std(vals, ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - null_mean_exact(kind, 61, 10)) <= 4 * se


@pytest.mark.slow
def test_lrt_mc_variance_near_asymptotic():
    c = null_calibrate_mc("lrt", 201, 50, 5000, 21)
    assert abs(c.sigma**2 / null_variance_asymptotic("lrt", 201, 50) - 1) <= 0.10


@pytest.mark.slow
def test_john_mc_variance_near_asymptotic():
    c = null_calibrate_mc("john", 101, 100, 5000, 22)
    assert abs(c.sigma**2 / 2500.0 - 1) <= 0.15


@pytest.mark.slow
def test_disjoint_seed_sigmas_agree():
    a = null_calibrate_mc("nagao", 41, 20, 20000, 1)
    b = null_calibrate_mc("nagao", 41, 20, 20000, 2)
    assert abs(a.sigma / b.sigma - 1) <= 0.05


@pytest.mark.slow
def test_decide_null_rejection_rate():
    n, p, reps, alpha = 31, 8, 3000, 0.05
    calib = null_calibrate_mc("nagao", n, p, 20000, 101)
    rejects = 0
    for r in range(reps):
        X = rng.substream(202, 0, r).standard_normal((n, p)) + 3.0
        rejects += decide("nagao", X, calib, alpha).reject
    rate = rejects / reps
    assert abs(rate - alpha) <= 3 * math.sqrt(alpha * (1 - alpha) / reps)
