"""Named oracle checks grouped by acceptance criterion.

Each criterion function takes a :class:`Context` and returns a list of
:class:`Check`. Randomized criteria derive every draw from ``ctx.seed`` through
the replicate substreams, so rerunning with another thread count must give
identical ``observed`` values; criterion 11 checks exactly that.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from hdcov import _kernels, rng
from hdcov.calibration import null_calibrate_mc, null_mean_exact
from hdcov.contiguity import dispersion_closed_lrt, dispersion_mc, err_ratio, mean_gap_with_residual
from hdcov.mclab import (
    MOMENTS,
    empirical_power,
    null_clt_check,
    statistics_mc,
    u_matrix,
    wishart_trace_mc,
    wishart_trace_oracle,
)
from hdcov.power import analytic_power, ordering_boundary, power_ordering, spiked_power, spiked_tau
from hdcov.statistics import KINDS, SHORT_NAMES, gradient, hessian, sample_cov_known_mean, statistic

DEFAULT_SEED = 20240917
ALPHA = 0.05


@dataclass(frozen=True)
class Context:
    seed: int = DEFAULT_SEED
    threads: int | None = None


@dataclass
class Check:
    name: str
    criterion: int
    passed: bool
    observed: float
    expected: float
    tolerance: float
    detail: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["status"] = self.status
        return d

    def line(self) -> str:
        return (
            f"[{self.status.upper()}] C{self.criterion} {self.name}: observed={self.observed:.6g} "
            f"expected={self.expected:.6g} tol={self.tolerance:.3g} {self.detail}".rstrip()
        )


def _fixed_rng(ctx: Context, *label) -> np.random.Generator:
    return rng.substream(ctx.seed, rng.tag_of("verify", *label), 0)


def _random_orthogonal(g: np.random.Generator, p: int) -> np.ndarray:
    Q, R = np.linalg.qr(g.standard_normal((p, p)))
    return Q * np.sign(np.diagonal(R))


def _rotate(Q: np.ndarray, eig: np.ndarray) -> np.ndarray:
    M = (Q * eig) @ Q.T
    return 0.5 * (M + M.T)


# ---- finite-difference oracles ----

def fd_step(x: float) -> float:
    return np.finfo(float).eps ** (1.0 / 3.0) * (1.0 + abs(x))


def fd_gradient(f: Callable[[np.ndarray], float], X: np.ndarray) -> np.ndarray:
    out = np.empty_like(X)
    for idx in np.ndindex(*X.shape):
        h = fd_step(X[idx])
        Xp, Xm = X.copy(), X.copy()
        Xp[idx] += h
        Xm[idx] -= h
        out[idx] = (f(Xp) - f(Xm)) / (2.0 * h)
    return out


def fd_jacobian(g: Callable[[np.ndarray], np.ndarray], X: np.ndarray) -> np.ndarray:
    """Columns are central differences of ``g`` (flattened row-major) along each entry of X."""
    cols = []
    for idx in np.ndindex(*X.shape):
        h = fd_step(X[idx])
        Xp, Xm = X.copy(), X.copy()
        Xp[idx] += h
        Xm[idx] -= h
        cols.append(((g(Xp) - g(Xm)) / (2.0 * h)).ravel())
    return np.stack(cols, axis=1)


def relative_error(a: np.ndarray, ref: np.ndarray) -> float:
    return float(np.max(np.abs(a - ref)) / max(float(np.max(np.abs(ref))), 1e-300))


def derivative_instances(ctx: Context, count: int = 20) -> list[np.ndarray]:
    shapes = [(N, p) for N in (6, 8) for p in (2, 3, 4)]
    g = _fixed_rng(ctx, "derivatives")
    return [g.standard_normal(shapes[k % len(shapes)]) for k in range(count)]


def criterion_1(ctx: Context) -> list[Check]:
    checks = []
    instances = derivative_instances(ctx)
    for kind in KINDS:
        def f(Y, kind=kind):
            return statistic(kind, sample_cov_known_mean(Y), Y.shape[0])

        g_err = max(relative_error(gradient(kind, X), fd_gradient(f, X)) for X in instances)
        h_err = max(
            relative_error(hessian(kind, X), fd_jacobian(lambda Y, kind=kind: gradient(kind, Y), X))
            for X in instances
        )
        name = SHORT_NAMES[kind]
        checks.append(Check(f"gradient_fd_{name}", 1, g_err <= 1e-5, g_err, 0.0, 1e-5, "max relative error, 20 instances"))
        checks.append(Check(f"hessian_fd_{name}", 1, h_err <= 1e-4, h_err, 0.0, 1e-4, "max relative error, 20 instances"))
    return checks


def criterion_2(ctx: Context) -> list[Check]:
    N, p, reps = 40, 10, 2000
    g = _fixed_rng(ctx, "lrt-dispersion")
    worst, zs = 0.0, []
    for k in range(10):
        Sigma = _rotate(_random_orthogonal(g, p), g.uniform(0.5, 2.0, p))
        est = dispersion_mc("lrt", Sigma, N + 1, p, reps, ctx.seed + k, ctx.threads)
        z = abs(est.value - dispersion_closed_lrt(Sigma, N)) / est.std_error
        zs.append(z)
        worst = max(worst, z)
    return [Check("lrt_dispersion_closed_form", 2, worst <= 3.0, worst, 0.0, 3.0,
                  "max |MC - N||Sigma-I||_F^2| / SE over 10 random Sigma", {"z": zs})]


def criterion_3(ctx: Context) -> list[Check]:
    N, p, reps = 50, 10, 20000
    n = N + 1
    g = _fixed_rng(ctx, "nagao-mean")
    m_null = null_mean_exact("nagao", n, p)
    checks = []
    for k in range(5):
        Sigma = np.diag(g.uniform(0.5, 2.0, p))
        gap = mean_gap_with_residual("nagao", Sigma, n, p)
        expected = gap.leading + gap.residual + m_null
        values = statistics_mc("nagao", Sigma, n, p, reps, ctx.seed + k, ctx.threads)
        mean = float(np.mean(values))
        se = float(np.std(values, ddof=1) / math.sqrt(reps))
        z = abs(mean - expected) / se
        checks.append(Check(f"nagao_mean_sigma{k}", 3, z <= 4.0, mean, expected, 4.0 * se, f"z={z:.2f}"))
    return checks


def criterion_4(ctx: Context) -> list[Check]:
    N, p, reps = 20, 10, 50000
    est = wishart_trace_mc(None, N + 1, p, reps, ctx.seed, ctx.threads)
    checks = []
    for name in MOMENTS:
        exact = wishart_trace_oracle(name, None, N + 1, p)
        e = est[name]
        z = abs(e.value - exact) / e.std_error
        checks.append(Check(f"wishart_{name}", 4, z <= 4.0, e.value, exact, 4.0 * e.std_error, f"z={z:.2f}"))
    spot = wishart_trace_oracle("E_tr_S3", None, 3, 2)
    checks.append(Check("wishart_E_tr_S3_spot", 4, spot == 18.0, spot, 18.0, 0.0, "N=p=2"))
    v = wishart_trace_oracle("E_tr2_S", None, N + 1, p)
    checks.append(Check("wishart_E_tr2_S_spot", 4, abs(v - (p * p + 2 * p / N)) <= 1e-12 * v, v, p * p + 2 * p / N, 1e-12 * v, "p^2 + 2p/N"))
    return checks


def _u_pairs(limit: int = 4):
    for l1 in range(limit + 1):
        for m1 in range(limit + 1 - l1):
            yield l1, m1


def criterion_5(ctx: Context) -> list[Check]:
    N, p = 6, 3
    g = _fixed_rng(ctx, "u-matrix")
    semi, norm, norm0, plus_norm, plus_semi = 0.0, 0.0, 0.0, 0.0, 0.0
    for _ in range(5):
        X = g.standard_normal((N, p))
        w = np.linalg.eigvalsh(sample_cov_known_mean(X))
        lo, hi = float(w[0]), float(w[-1])
        inv = {lm: u_matrix(*lm, "inverse", X) for lm in _u_pairs() if sum(lm) >= 1}
        plus = {lm: u_matrix(*lm, "plus", X) for lm in _u_pairs()}
        for (l1, m1), A in inv.items():
            for (l2, m2), B in inv.items():
                if l1 + l2 >= 1 and l1 + l2 - 1 + m1 + m2 >= 1:
                    ref = u_matrix(l1 + l2 - 1, m1 + m2, "inverse", X)
                    semi = max(semi, relative_error(A @ B, ref))
            op = float(np.linalg.norm(A, 2))
            if l1 >= 1:
                norm = max(norm, abs(op - lo ** (1 - l1 - m1)) / lo ** (1 - l1 - m1))
            else:
                norm0 = max(norm0, abs(op - hi * lo ** (-m1)) / (hi * lo ** (-m1)))
        for (l1, m1), A in plus.items():
            bound = hi ** (l1 + m1 + 1)
            plus_norm = max(plus_norm, (float(np.linalg.norm(A, 2)) - bound) / bound)
            for (l2, m2), B in plus.items():
                if l1 + l2 + 1 + m1 + m2 <= 9:
                    plus_semi = max(plus_semi, relative_error(A @ B, u_matrix(l1 + l2 + 1, m1 + m2, "plus", X)))
    tol = 1e-9
    return [
        Check("u_semigroup", 5, semi <= tol, semi, 0.0, tol, "relative, all l+m<=4 pairs, 5 draws"),
        Check("u_norm_identity_l_ge_1", 5, norm <= tol, norm, 0.0, tol, "||U|| vs ||S^-1||^(l+m-1)"),
        Check("u_norm_l0_exact_value", 5, norm0 <= tol, norm0, 0.0, tol, "||U_0,m|| vs lmax*lmin^-m"),
        Check("u_plus_norm_bound", 5, plus_norm <= tol, plus_norm, 0.0, tol, "(||U+|| - ||S||^(l+m+1))/bound"),
        Check("u_plus_semigroup", 5, plus_semi <= tol, plus_semi, 0.0, tol, "exponent l1+l2+1"),
    ]


CLT_TREND_GRID = ((48, 12), (96, 24))
CLT_TREND_REPS = 100000


def criterion_6(ctx: Context) -> list[Check]:
    checks = []
    for kind in KINDS:
        name = SHORT_NAMES[kind]
        r = null_clt_check(kind, 201, 50, 5000, ctx.seed, ctx.threads)
        checks.append(Check(f"clt_dkol_{name}", 6, r.d_kol <= 0.05, r.d_kol, 0.0, 0.05, "(N,p)=(200,50), reps=5000"))
        d = [null_clt_check(kind, N + 1, p, CLT_TREND_REPS, ctx.seed, ctx.threads).d_kol for N, p in CLT_TREND_GRID]
        checks.append(Check(f"clt_trend_{name}", 6, d[1] < d[0], d[1], d[0], 0.0,
                            f"d_Kol at p=24 below p=12 (p/N=0.25, reps={CLT_TREND_REPS})", {"d_kol": d}))
    return checks


POWER_CASES = (("lrt", 201, 50), ("lrt-s", 201, 50), ("nagao", 101, 100), ("nagao", 101, 200),
               ("john", 101, 100), ("john", 101, 200))
POWER_CALIB_REPS = 20000


def dense_alternative(p: int, scale: float, seed: int) -> np.ndarray:
    """Randomly rotated diag(1 + a) with a evenly spread over [-scale*sqrt(3), scale*sqrt(3)]."""
    g = rng.substream(seed, rng.tag_of("dense-alternative", p), 0)
    a = scale * math.sqrt(3.0) * np.linspace(-1.0, 1.0, p)
    return _rotate(_random_orthogonal(g, p), 1.0 + a)


def power_alternatives(kind: str, p: int, seed: int) -> list[tuple[str, np.ndarray]]:
    out = []
    for a1 in (0.5, 1.0, 2.0):
        a = np.zeros(p)
        a[0] = a1
        out.append((f"spike{a1:g}", np.diag(1.0 + a)))
    scale = 0.15 if kind in ("lrt", "lrt-s") else 0.2
    out.append(("dense", dense_alternative(p, scale, seed)))
    return out


def criterion_7(ctx: Context) -> list[Check]:
    checks = []
    for kind, n, p in POWER_CASES:
        calib = null_calibrate_mc(kind, n, p, POWER_CALIB_REPS, ctx.seed, ctx.threads,
                                  tag=rng.tag_of("power-calibration", kind, n, p))
        for label, Sigma in power_alternatives(kind, p, ctx.seed):
            emp = empirical_power(kind, Sigma, n, p, ALPHA, calib, 2000, ctx.seed, ctx.threads)
            pred = analytic_power(kind, Sigma, n, p, ALPHA, sigma_null=calib.sigma).power
            asym = analytic_power(kind, Sigma, n, p, ALPHA).power
            diff = abs(emp.value - pred)
            checks.append(Check(
                f"power_{kind}_N{n - 1}_p{p}_{label}", 7, diff <= 0.05, emp.value, pred, 0.05,
                f"se={emp.std_error:.3f}, asymptotic-sigma prediction {asym:.3f}",
            ))
    return checks


SIZE_CASES = (("lrt", 201, 50), ("lrt-s", 201, 50), ("nagao", 101, 100), ("john", 101, 100))


def criterion_8(ctx: Context) -> list[Check]:
    checks = []
    reps = 5000
    tol = 3.0 * math.sqrt(ALPHA * (1 - ALPHA) / reps)
    for kind, n, p in SIZE_CASES:
        calib = null_calibrate_mc(kind, n, p, POWER_CALIB_REPS, ctx.seed, ctx.threads,
                                  tag=rng.tag_of("size-calibration", kind, n, p))
        rate = empirical_power(kind, np.eye(p), n, p, ALPHA, calib, reps, ctx.seed, ctx.threads).value
        checks.append(Check(f"size_{kind}", 8, abs(rate - ALPHA) <= tol, rate, ALPHA, tol, f"(n,p)=({n},{p})"))
    return checks


def criterion_9(ctx: Context) -> list[Check]:
    g = _fixed_rng(ctx, "orderings")
    n, p = 201, 50
    violations = 0
    for _ in range(1000):
        a = g.uniform(-0.9, 3.0, p) * (g.random(p) < g.uniform(0.05, 1.0))
        tl, ts = spiked_tau("lrt", a, n, p), spiked_tau("lrt-s", a, n, p)
        bl, bs = spiked_power("lrt", a, n, p, ALPHA), spiked_power("lrt-s", a, n, p, ALPHA)
        if tl < ts or bl < bs:
            violations += 1
    mismatches, points, signs = 0, 0, set()
    for _ in range(20):
        v = g.standard_normal(p) - 0.5
        c_max = 0.95 / max(float(np.max(-v)), 1e-9)
        for c in np.linspace(0.01, 1.0, 50) * c_max:
            a = c * v
            bnd = ordering_boundary(a)
            if abs(bnd) <= 1e-12 * float(np.mean(a * a)):
                continue
            points += 1
            signs.add(bnd > 0)
            expected = "nagao" if bnd > 0 else "john"
            if power_ordering(a, 101, p, ALPHA).na_vs_john != expected:
                mismatches += 1
    straddles = signs == {True, False}
    return [
        Check("ordering_lrt_ge_lrts", 9, violations == 0, violations, 0, 0, "violations over 1000 random spike vectors"),
        Check("ordering_na_john_boundary", 9, mismatches == 0 and straddles, mismatches, 0, 0,
              f"{points} grid points, both boundary signs present={straddles}"),
    ]


def _slope(p: np.ndarray, y: np.ndarray) -> float:
    return float(np.polyfit(np.log(p), np.log(y), 1)[0])


def criterion_10(ctx: Context) -> list[Check]:
    grid = np.array([20, 40, 80, 160])
    closed, mc, na = [], [], []
    for p in grid:
        N = 4 * int(p)
        n = N + 1
        a = np.zeros(p)
        a[0] = 1.0
        Sigma = np.diag(1.0 + a)
        sigma = math.sqrt(0.5 * N * N * (-0.25 - math.log(0.75)))
        gap = mean_gap_with_residual("lrt", Sigma, n, int(p)).gap
        closed.append(err_ratio(gap, sigma, math.sqrt(dispersion_closed_lrt(Sigma, N))))
        V2 = dispersion_mc("lrt", Sigma, n, int(p), 200, ctx.seed, ctx.threads).value
        mc.append(err_ratio(gap, sigma, math.sqrt(V2)))
        gna = mean_gap_with_residual("nagao", Sigma, n, int(p)).gap
        V2na = dispersion_mc("nagao", Sigma, n, int(p), 200, ctx.seed, ctx.threads).value
        na.append(err_ratio(gna, int(p) / 2.0, math.sqrt(V2na)))
    s_closed, s_mc, s_na = _slope(grid, np.array(closed)), _slope(grid, np.array(mc)), _slope(grid, np.array(na))
    return [
        Check("err_bar_slope_lrt", 10, s_closed <= -0.4, s_closed, -0.5, -0.4, "closed-form V, p in 20..160, p/N=0.25"),
        Check("err_bar_slope_lrt_mc", 10, s_mc <= -0.4, s_mc, -0.5, -0.4, "Monte Carlo V, reps=200"),
        Check("err_bar_slope_nagao_mc", 10, s_na <= -0.4, s_na, -0.5, -0.4, "Monte Carlo V, reps=200"),
    ]


CRITERIA: dict[int, Callable[[Context], list[Check]]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
}
RANDOMIZED = (2, 3, 4, 6, 7, 8, 10)


def fingerprint(checks: list[Check]) -> list[tuple]:
    return [(c.name, c.observed, c.expected, repr(c.extra)) for c in checks]


def reproducibility_check(
    criterion: int, ctx: Context, first: list[Check] | None = None, threads: tuple[int, int] = (8, 1)
) -> Check:
    """Rerun a randomized criterion at another thread count and compare every observed value bitwise."""
    fn = CRITERIA[criterion]
    if first is None:
        first = fn(replace(ctx, threads=threads[0]))
    second = fn(replace(ctx, threads=threads[1]))
    same = fingerprint(first) == fingerprint(second)
    return Check(f"reproducible_c{criterion}", 11, same, float(same), 1.0, 0.0,
                 f"threads {threads[0]} vs {threads[1]}")


def run_suite(
    criteria: list[int] | None = None,
    seed: int = DEFAULT_SEED,
    threads: int = 8,
    reproducibility: str = "light",
    log: Callable[[str], None] | None = None,
) -> list[Check]:
    """Run the selected criteria.

    ``reproducibility`` is ``"full"`` (rerun every randomized criterion at one
    thread), ``"light"`` (rerun the cheaper randomized criteria) or ``"off"``.
    """
    criteria = sorted(CRITERIA) + [11] if criteria is None else sorted(criteria)
    ctx = Context(seed=seed, threads=threads)
    results: dict[int, list[Check]] = {}
    checks: list[Check] = []
    for c in criteria:
        if c == 11:
            continue
        t0 = time.perf_counter()
        results[c] = CRITERIA[c](ctx)
        for ch in results[c]:
            ch.extra.setdefault("seconds", round(time.perf_counter() - t0, 3))
            if log:
                log(ch.line())
        checks.extend(results[c])
    if 11 in criteria and reproducibility != "off":
        targets = RANDOMIZED if reproducibility == "full" else (2, 3, 4, 8, 10)
        for c in targets:
            first = results.get(c)
            if first is not None:
                # timing extras differ between runs; compare with them stripped
                first = [replace(ch, extra={k: v for k, v in ch.extra.items() if k != "seconds"}) for ch in first]
            ch = reproducibility_check(c, ctx, first, (threads, 1 if threads != 1 else 8))
            if log:
                log(ch.line())
            checks.append(ch)
    return checks


def report(checks: list[Check], seed: int) -> dict:
    return {
        "schema_version": 1,
        "backend": _kernels.BACKEND,
        "seed": seed,
        "passed": sum(c.passed for c in checks),
        "failed": sum(not c.passed for c in checks),
        "checks": [c.to_dict() for c in checks],
    }
