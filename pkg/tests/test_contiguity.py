from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import fd_grad, random_spd
from hdcov.contiguity import (
    bound_terms,
    contiguity_report,
    dispersion_closed_lrt,
    dispersion_mc,
    err_bar,
    err_ratio,
    mean_gap_with_residual,
    tmap,
)
from hdcov.errors import BadArgument
from hdcov.model import sym_sqrt
from hdcov.statistics import KINDS, sample_cov_known_mean, statistic


def test_tmap_lrt_closed_forms(gen):
    Z = gen.standard_normal((12, 4))
    Sz_inv = np.linalg.inv(sample_cov_known_mean(Z))
    assert np.allclose(tmap("lrt", np.eye(4), None, Z), Z - Z @ Sz_inv)
    Sigma = random_spd(gen, 4)
    assert np.allclose(tmap("lrt", Sigma, None, Z), Z @ Sigma - Z @ Sz_inv, atol=1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_tmap_chain_rule(kind, gen):
    Z = gen.standard_normal((6, 3))
    Sigma = random_spd(gen, 3)
    R = sym_sqrt(Sigma)

    def f(W):
        X = W @ R
        return statistic(kind, sample_cov_known_mean(X), X.shape[0])

    fd = fd_grad(f, Z)
    assert np.max(np.abs(tmap(kind, Sigma, None, Z) - fd)) <= 1e-5 * max(1.0, np.max(np.abs(fd)))


@pytest.mark.parametrize("kind", KINDS)
def test_dispersion_null_is_zero(kind):
    assert dispersion_mc(kind, np.eye(4), 21, 4, 100, 1).value == 0.0


def test_dispersion_sphericity_scale_family_is_zero():
    assert dispersion_mc("john", 3.0 * np.eye(4), 21, 4, 100, 1).value == pytest.approx(0.0, abs=1e-20)


def test_dispersion_closed_examples():
    assert dispersion_closed_lrt(np.eye(3), 10) == 0.0
    assert dispersion_closed_lrt(np.diag([2.0, 1.0]), 10) == 10.0


def test_lrt_dispersion_mc_matches_closed_form():
    p, N = 10, 40
    Sigma = np.diag([2.0] + [1.0] * (p - 1))
    est = dispersion_mc("lrt", Sigma, N + 1, p, 2000, 4)
    assert abs(est.value - 40.0) <= 3 * est.std_error


@pytest.mark.slow
def test_nagao_dispersion_scales_with_distance():
    g = np.random.default_rng(1)
    p, N = 8, 32
    A = g.standard_normal((p, p))
    D = (A + A.T) / 2
    D /= np.linalg.norm(D, 2)
    xs, ys, consts = [], [], []
    for eps in (0.05, 0.1, 0.2, 0.4):
        Sigma = np.eye(p) + eps * D
        v = dispersion_mc("nagao", Sigma, N + 1, p, 400, 3).value
        dist = float(np.sum((Sigma - np.eye(p)) ** 2))
        xs.append(math.log(dist))
        ys.append(math.log(v))
        consts.append(v / (N * max(np.linalg.norm(Sigma, 2) ** 2, 1.0) * dist))
    slope = np.polyfit(xs, ys, 1)[0]
    assert 0.85 <= slope <= 1.15
    assert max(consts) < 10.0


def test_mean_gap_examples():
    gap = mean_gap_with_residual("lrt", np.diag([2.0, 1.0, 0.5]), 21, 3)
    assert gap.exact and gap.residual == 0.0 and gap.q == 0.0
    gap = mean_gap_with_residual("nagao", np.eye(4), 11, 4)
    assert gap.leading == 0.0 and gap.q == 0.0
    gap = mean_gap_with_residual("nagao", np.diag([2.0, 1.0]), 11, 2)
    assert gap.q == pytest.approx(0.24)
    assert gap.exact and gap.gap == pytest.approx(gap.leading + 2.5 * 0.24)
    for kind in ("lrt-s", "john"):
        assert not mean_gap_with_residual(kind, np.diag([2.0, 1.0]), 11, 2).exact


def test_err_ratio_and_bar():
    assert err_ratio(5.0, 2.0, 0.0) == 0.0
    assert err_ratio(1.0, 2.0, 4.0) == 2.0
    assert err_ratio(-8.0, 2.0, 4.0) == 0.5
    with pytest.raises(BadArgument):
        err_ratio(1.0, 0.0, 1.0)
    assert err_bar("nagao", np.eye(3), 11, 3, 1.5, 0.0) == 0.0


@given(st.floats(0.05, 20.0))
def test_err_bar_sphericity_scale_invariant(c):
    Sigma = np.diag([2.0, 1.0, 1.0, 0.5])
    for kind in ("lrt-s", "john"):
        a = err_bar(kind, Sigma, 21, 4, 3.0, 1.7)
        b = err_bar(kind, c * Sigma, 21, 4, 3.0, 1.7)
        assert a == pytest.approx(b, rel=1e-10)


def test_bound_terms():
    assert bound_terms(0.3, 0.0) == {"thm21": 0.3, "cor22": 0.3}
    assert bound_terms(0.3, 1.0, t=0.0)["thm21"] == pytest.approx(1.3)
    with pytest.raises(BadArgument):
        bound_terms(-1.0, 0.0)


@given(st.floats(0.0, 10.0), st.floats(0.0, 10.0), st.floats(0.01, 5.0))
def test_bound_increasing_in_abs_t(t1, t2, e):
    lo, hi = sorted((t1, t2))
    assert bound_terms(0.0, e, t=lo)["thm21"] <= bound_terms(0.0, e, t=-hi)["thm21"] + 1e-15


def test_report_paths():
    r = contiguity_report("nagao", np.eye(5), 21, 5)
    assert r.err_bar == 0.0 and r.V_method == "exact"
    r = contiguity_report("lrt", np.diag([2.0, 1.0, 1.0]), 41, 3)
    assert r.V_method == "closed_form" and r.V == pytest.approx(math.sqrt(40.0))
    with pytest.raises(BadArgument):
        contiguity_report("john", np.diag([2.0, 1.0, 1.0]), 41, 3)
    r = contiguity_report("john", np.diag([2.0, 1.0, 1.0]), 41, 3, reps=200, seed=1)
    d = r.to_dict(t=1.0)
    assert d["V_method"] == "monte_carlo" and d["constants"].startswith("unit")
    assert d["bound_term_23"] == pytest.approx((2.0 * r.err_bar) ** (2 / 3))
    assert d["bound_term_49"] == pytest.approx(r.err_bar ** (4 / 9))


def test_lrt_err_bar_decays():
    vals = []
    for p in (20, 40, 80, 160):
        N = 4 * p
        Sigma = np.diag([2.0] + [1.0] * (p - 1))
        vals.append(contiguity_report("lrt", Sigma, N + 1, p).err_bar)
    slope = np.polyfit(np.log([20, 40, 80, 160]), np.log(vals), 1)[0]
    assert slope <= -0.4
