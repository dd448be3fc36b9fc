from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import fd_grad
from hdcov.errors import BadArgument, BadIndex, DegenerateStatistic, TooLarge, ZeroTrace
from hdcov.statistics import (
    JOHN,
    KINDS,
    LRT,
    LRT_S,
    NAGAO,
    canonical_kind,
    gradient,
    hessian,
    nagao_fourth_derivative,
    nagao_higher_derivatives,
    nagao_third_derivative,
    sample_cov_known_mean,
    sample_cov_unknown_mean,
    statistic,
    statistic_from_data,
    statistic_known_mean,
)

seeds = st.integers(0, 2**32 - 1)


def T(kind, X):
    return statistic(kind, sample_cov_known_mean(X), X.shape[0])


def test_aliases():
    assert canonical_kind("lrt") == LRT
    assert canonical_kind("lrt-s") == LRT_S
    assert canonical_kind(NAGAO) == NAGAO
    with pytest.raises(BadArgument):
        canonical_kind("wald")


def test_sample_cov_examples():
    assert np.array_equal(sample_cov_known_mean(np.zeros((3, 2))), np.zeros((2, 2)))
    assert sample_cov_known_mean([[2.0]])[0, 0] == 4.0
    assert sample_cov_known_mean([[1.0], [3.0]])[0, 0] == 5.0
    s_star, s = sample_cov_unknown_mean([[0.0], [2.0]])
    assert (s_star[0, 0], s[0, 0]) == (1.0, 2.0)
    s_star, s = sample_cov_unknown_mean([[0.0], [1.0], [2.0]])
    assert s_star[0, 0] == pytest.approx(2 / 3) and s[0, 0] == pytest.approx(1.0)
    s_star, s = sample_cov_unknown_mean(np.tile([[1.0, -2.0]], (4, 1)))
    assert not s_star.any() and not s.any()


def test_statistic_examples():
    assert statistic(LRT, np.eye(3), 10) == pytest.approx(0.0, abs=1e-14)
    for N, p in ((5, 3), (20, 7)):
        assert statistic(NAGAO, np.eye(p), N) == pytest.approx(-p * p / 4)
    for lam in (0.3, 1.0, 17.0):
        assert statistic(LRT_S, lam * np.eye(4), 9) == pytest.approx(0.0, abs=1e-12)
        assert statistic(JOHN, lam * np.eye(4), 9) == pytest.approx(0.0, abs=1e-12)
    assert statistic(LRT, np.array([[math.e]]), 2) == pytest.approx(math.e - 2, abs=1e-12)


def test_statistic_against_direct_formulas(gen):
    X = gen.standard_normal((30, 5))
    N, p = X.shape
    S = X.T @ X / N
    tr, fro = np.trace(S), np.sum(S * S)
    logdet = np.linalg.slogdet(S)[1]
    assert T(LRT, X) == pytest.approx(N / 2 * (tr - logdet - p), rel=1e-12)
    assert T(NAGAO, X) == pytest.approx(N / 4 * (np.sum((S - np.eye(p)) ** 2) - tr**2 / N), rel=1e-12)
    assert T(LRT_S, X) == pytest.approx(N / 2 * (p * np.log(tr / p) - logdet), rel=1e-12)
    R = S / (tr / p)
    assert T(JOHN, X) == pytest.approx(N / 4 * np.sum((R - np.eye(p)) ** 2), rel=1e-12)


def test_degenerate_cases():
    with pytest.raises(DegenerateStatistic):
        statistic(LRT, np.diag([1.0, 0.0]), 5)
    with pytest.raises(DegenerateStatistic):
        statistic(LRT, np.eye(5), 3)
    with pytest.raises(ZeroTrace):
        statistic(JOHN, np.zeros((2, 2)), 5)
    with pytest.raises(DegenerateStatistic):
        statistic_from_data(LRT, np.ones((6, 2)), mean="unknown")


def test_gram_route_matches_direct(gen):
    X = gen.standard_normal((5, 12))
    for kind in (NAGAO, JOHN):
        assert statistic_known_mean(kind, X) == pytest.approx(T(kind, X), rel=1e-10)


@given(st.sampled_from(KINDS), st.integers(0, 2**32 - 1), st.floats(-5, 5))
def test_location_invariance(kind, seed, shift):
    g = np.random.default_rng(seed)
    X = g.standard_normal((12, 4))
    base = statistic_from_data(kind, X, mean="unknown")
    moved = statistic_from_data(kind, X + shift * g.standard_normal(4), mean="unknown")
    assert moved == pytest.approx(base, rel=1e-9, abs=1e-9)


@given(st.sampled_from((LRT_S, JOHN)), seeds, st.floats(1e-3, 1e3))
def test_scale_invariance(kind, seed, c):
    X = np.random.default_rng(seed).standard_normal((10, 4))
    assert T(kind, c * X) == pytest.approx(T(kind, X), rel=1e-9, abs=1e-9)


@given(st.sampled_from(KINDS), seeds)
def test_orthogonal_invariance(kind, seed):
    g = np.random.default_rng(seed)
    X = g.standard_normal((10, 4))
    Q, _ = np.linalg.qr(g.standard_normal((4, 4)))
    assert T(kind, X @ Q) == pytest.approx(T(kind, X), rel=1e-8, abs=1e-8)


def test_gradient_lrt_zero_at_identity():
    X = np.vstack([np.eye(3), np.eye(3)]) * math.sqrt(3)
    assert np.allclose(sample_cov_known_mean(X), np.eye(3))
    assert np.max(np.abs(gradient(LRT, X))) <= 1e-13


@given(st.sampled_from(KINDS), st.sampled_from([(6, 2), (6, 3), (8, 3), (8, 4)]), seeds)
def test_gradient_matches_finite_differences(kind, shape, seed):
    X = np.random.default_rng(seed).standard_normal(shape)
    fd = fd_grad(lambda Y: T(kind, Y), X)
    g = gradient(kind, X)
    assert np.max(np.abs(g - fd)) <= 1e-5 * max(1.0, np.max(np.abs(fd)))


@given(st.sampled_from(KINDS), seeds)
def test_hessian_matches_finite_differences(kind, seed):
    X = np.random.default_rng(seed).standard_normal((6, 3))
    H = hessian(kind, X)
    assert np.allclose(H, H.T, atol=1e-12 * max(1.0, np.max(np.abs(H))))
    cols = []
    for idx in np.ndindex(*X.shape):
        def gi(Y, idx=idx):
            return gradient(kind, Y)[idx]
        cols.append(fd_grad(gi, X).ravel())
    fd = np.array(cols)
    assert np.max(np.abs(H - fd)) <= 1e-5 * max(1.0, np.max(np.abs(fd)))


@given(seeds, st.floats(0.1, 10.0))
def test_john_gradient_homogeneity(seed, c):
    X = np.random.default_rng(seed).standard_normal((8, 3))
    assert np.allclose(gradient(JOHN, c * X), gradient(JOHN, X) / c, rtol=1e-9, atol=1e-12)


def test_lrt_hessian_at_identity_block_term():
    X = np.vstack([np.eye(3), np.eye(3)]) * math.sqrt(3)
    N, p = X.shape
    H = hessian(LRT, X).reshape(N, p, N, p)
    # the I - S^{-1} term vanishes at S = I, leaving a symmetric remainder
    assert np.allclose(H, H.transpose(2, 3, 0, 1))


def test_hessian_size_limit():
    with pytest.raises(TooLarge):
        hessian(NAGAO, np.ones((100, 50)))


def test_nagao_hessian_affine_quadratic(gen):
    """Third differences of the Hessian vanish: it is quadratic in X, so the fourth derivative is constant."""
    X, D = gen.standard_normal((5, 3)), gen.standard_normal((5, 3))
    H0, H1, H2, H3 = (hessian(NAGAO, X + t * D) for t in (0.0, 1.0, 2.0, 3.0))
    assert np.max(np.abs(H3 - 3 * H2 + 3 * H1 - H0)) <= 1e-10 * np.max(np.abs(H3))


def _third_by_fd(X, idx):
    (i1, j1), (i2, j2), (i3, j3) = idx
    N, p = X.shape

    def h(Y):
        return hessian(NAGAO, Y)[i1 * p + j1, i2 * p + j2]

    E = np.zeros_like(X)
    E[i3, j3] = 1.0
    return (h(X + E) - h(X - E)) / 2.0  # exact: central differences of a quadratic


@given(seeds, st.data())
def test_nagao_third_matches_hessian_derivative(seed, data):
    N, p = 4, 3
    X = np.random.default_rng(seed).standard_normal((N, p))
    pairs = st.tuples(st.integers(0, N - 1), st.integers(0, p - 1))
    idx = data.draw(st.lists(pairs, min_size=3, max_size=3))
    assert nagao_third_derivative(idx, X) == pytest.approx(_third_by_fd(X, idx), abs=1e-10)
    assert nagao_higher_derivatives(3, idx, X) == nagao_third_derivative(idx, X)


@given(st.data())
def test_nagao_fourth_matches_third_derivative(data):
    N, p = 4, 3
    pairs = st.tuples(st.integers(0, N - 1), st.integers(0, p - 1))
    idx = data.draw(st.lists(pairs, min_size=4, max_size=4))
    X = np.random.default_rng(1).standard_normal((N, p))
    E = np.zeros_like(X)
    E[idx[3]] = 1.0
    fd = (nagao_third_derivative(idx[:3], X + E) - nagao_third_derivative(idx[:3], X - E)) / 2.0
    assert nagao_fourth_derivative(idx, N, p) == pytest.approx(fd, abs=1e-12)


def test_nagao_fourth_examples():
    N, p = 7, 3
    assert nagao_fourth_derivative([(2, 1)] * 4, N, p) == pytest.approx(6 / N - 6 / N**2)
    assert nagao_fourth_derivative([(0, 0), (1, 1), (2, 2), (3, 0)], N, p) == 0.0
    assert nagao_third_derivative([(0, 0), (1, 1), (0, 1)], np.zeros((N, p))) == 0.0


def test_nagao_index_errors():
    X = np.ones((3, 2))
    with pytest.raises(BadIndex):
        nagao_third_derivative([(0, 0), (0, 0), (3, 0)], X)
    with pytest.raises(BadIndex):
        nagao_third_derivative([(0, 0), (0, 0)], X)
    with pytest.raises(BadArgument):
        nagao_higher_derivatives(5, [(0, 0)] * 5, X)


@pytest.mark.slow
def test_known_and_unknown_mean_modes_agree_in_distribution():
    g = np.random.default_rng(99)
    n, p, reps = 21, 4, 4000
    mu = np.arange(p, dtype=float)
    L = np.linalg.cholesky(np.diag([2.0, 1.0, 1.0, 0.5]))
    for kind in KINDS:
        unk = [statistic_from_data(kind, g.standard_normal((n, p)) @ L.T + mu, "unknown") for _ in range(reps)]
        kn = [statistic_from_data(kind, g.standard_normal((n - 1, p)) @ L.T, "known") for _ in range(reps)]
        se = math.sqrt(np.var(unk) / reps + np.var(kn) / reps)
        assert abs(np.mean(unk) - np.mean(kn)) <= 4 * se
