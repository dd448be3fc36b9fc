"""Command-line front end: ``hdcov {calibrate,test,power,simulate,sweep,verify}``.

Exit codes: 0 success, 1 internal error or failed check, 2 user error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from hdcov import rng
from hdcov.calibration import NullCalibration, decide, null_calibrate_asymptotic, null_calibrate_mc, z_alpha
from hdcov.contiguity import contiguity_report
from hdcov.errors import HdcovError
from hdcov.mclab import empirical_power
from hdcov.model import CovarianceSpec, build_covariance, load_covariance_spec, read_matrix_csv
from hdcov.power import analytic_power, power_ordering, spiked_power
from hdcov.statistics import ALIASES, KINDS, LOGDET_KINDS, SHORT_NAMES, canonical_kind, check_dimensions

CSV_SCHEMA_VERSION = 1
DEFAULT_CALIB_REPS = 10000


class UserError(Exception):
    pass


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return buf.getvalue()


def _emit(payload: dict | list[dict], fmt: str, out: str | None) -> None:
    if fmt == "json":
        _write(_json(payload), out)
    else:
        _write(_csv(payload if isinstance(payload, list) else [_flatten(payload)]), out)


def _flatten(d: dict, prefix: str = "") -> dict:
    flat = {}
    for k, v in d.items():
        if isinstance(v, dict):
            flat.update(_flatten(v, f"{prefix}{k}."))
        else:
            flat[f"{prefix}{k}"] = v
    return flat


def _seed(args, needed: bool) -> int | None:
    if args.seed is None:
        if needed:
            raise UserError("--seed is required for randomized commands (use --seed auto to pick one)")
        return None
    if args.seed == "auto":
        seed = rng.auto_seed()
        print(f"seed: {seed}", file=sys.stderr)
        return seed
    try:
        return rng.check_seed(int(args.seed))
    except ValueError:
        raise UserError(f"--seed must be an integer or 'auto', got {args.seed!r}") from None


def _kind(name: str) -> str:
    return canonical_kind(name)


def _alpha(args) -> float:
    z_alpha(args.alpha)
    return args.alpha


def _shape(args, kind: str | None = None) -> tuple[int, int]:
    if args.n is None or args.p is None:
        raise UserError("--n and --p are required")
    if args.n < 2 or args.p < 1:
        raise UserError("need --n >= 2 and --p >= 1")
    if kind is not None:
        check_dimensions(kind, args.n - 1, args.p)
    return args.n, args.p


def _sigma(args, p: int) -> tuple[CovarianceSpec, np.ndarray]:
    spec = CovarianceSpec.identity(p) if args.sigma is None else load_covariance_spec(args.sigma, p)
    return spec, build_covariance(spec)


def _spike_descriptor(spec: CovarianceSpec) -> str:
    if spec.kind == "spiked":
        nz = [(j, a) for j, a in enumerate(spec.a) if a != 0.0]
        if not nz:
            return "none"
        return ";".join(f"a{j + 1}={a:g}" for j, a in nz[:8]) + (";..." if len(nz) > 8 else "")
    if spec.kind == "scaled_identity":
        return f"lambda={spec.lam:g}"
    return spec.kind


def _calibration(args, kind: str, n: int, p: int, default: str) -> NullCalibration:
    source = args.calib or default
    if source == "asymptotic":
        return null_calibrate_asymptotic(kind, n, p)
    if source == "mc":
        seed = _seed(args, True)
        reps = args.calib_reps or args.reps or DEFAULT_CALIB_REPS
        return null_calibrate_mc(kind, n, p, reps, seed, args.threads)
    path = Path(source)
    if not path.exists():
        raise UserError(f"--calib must be 'asymptotic', 'mc' or an existing file, got {source!r}")
    calib = NullCalibration.read(path)
    if calib.kind != kind or calib.n != n or calib.p != p:
        raise UserError(
            f"calibration file is for ({SHORT_NAMES[calib.kind]}, n={calib.n}, p={calib.p}), "
            f"not ({SHORT_NAMES[kind]}, n={n}, p={p})"
        )
    return calib


def cmd_calibrate(args) -> int:
    kind = _kind(args.test)
    n, p = _shape(args, kind)
    method = args.calib or "mc"
    if method == "mc":
        seed = _seed(args, True)
        reps = args.reps or DEFAULT_CALIB_REPS
        calib = null_calibrate_mc(kind, n, p, reps, seed, args.threads)
    elif method == "asymptotic":
        calib = null_calibrate_asymptotic(kind, n, p)
    else:
        raise UserError("calibrate accepts --calib mc or --calib asymptotic")
    if args.format == "json":
        text = calib.to_json()
    else:
        text = _csv([calib.to_dict()])
    _write(text, args.out)
    if args.out:
        print(f"{SHORT_NAMES[kind]} n={n} p={p}: m={calib.m:.6g} sigma={calib.sigma:.6g} ({calib.method})")
    return 0


def cmd_test(args) -> int:
    kind = _kind(args.test)
    if not args.data:
        raise UserError("--data is required")
    X = read_matrix_csv(args.data, header=args.header)
    rows, p = X.shape
    n = rows if args.mean == "unknown" else rows + 1
    if args.p is not None and args.p != p:
        raise UserError(f"data has p={p} columns, --p says {args.p}")
    if args.n is not None and args.n != n:
        raise UserError(f"data implies n={n}, --n says {args.n}")
    calib = _calibration(args, kind, n, p, "asymptotic")
    d = decide(kind, X, calib, _alpha(args), mean=args.mean)
    payload = {"kind": SHORT_NAMES[kind], "n": n, "p": p, "alpha": args.alpha, **d.to_dict(),
               "calibration": calib.method}
    _emit(payload, args.format, args.out)
    return 0


def cmd_power(args) -> int:
    kind = _kind(args.test)
    n, p = _shape(args, kind)
    alpha = _alpha(args)
    spec, Sigma = _sigma(args, p)
    calib = _calibration(args, kind, n, p, "asymptotic") if (args.calib or "asymptotic") != "asymptotic" else None
    pred = analytic_power(kind, Sigma, n, p, alpha, None if calib is None else calib.sigma)
    payload: dict = pred.to_dict()
    payload["kind"] = SHORT_NAMES[kind]
    payload.update({"n": n, "p": p, "sigma_spec": _spike_descriptor(spec)})
    if spec.kind == "spiked" and calib is None:
        payload["spiked_power"] = spiked_power(kind, spec.a, n, p, alpha)
    if args.diagnose:
        seed = _seed(args, False)
        report = contiguity_report(kind, Sigma, n, p, pred.components["sigma_null"],
                                   args.reps or 0, seed, args.threads)
        payload["contiguity"] = {**report.to_dict(t=args.t), "kind": SHORT_NAMES[kind]}
    _emit(payload, args.format, args.out)
    return 0


def _power_row(kind: str, n: int, p: int, alpha: float, spec: CovarianceSpec, Sigma: np.ndarray,
               reps: int, seed: int | None, threads: int | None, calib_reps: int) -> dict:
    asym = analytic_power(kind, Sigma, n, p, alpha)
    row = {"kind": SHORT_NAMES[kind], "n": n, "p": p, "alpha": alpha, "spike_descriptor": _spike_descriptor(spec)}
    if reps > 0:
        calib = null_calibrate_mc(kind, n, p, calib_reps, seed, threads,
                                  tag=rng.tag_of("cli-calibration", kind, n, p))
        pred = analytic_power(kind, Sigma, n, p, alpha, calib.sigma)
        emp = empirical_power(kind, Sigma, n, p, alpha, calib, reps, seed, threads)
        row.update({"tau": pred.tau + 0.0, "power_analytic": pred.power, "power_empirical": emp.value,
                    "se": emp.std_error, "discrepancy": emp.value - pred.power,
                    "sigma_source": "monte_carlo", "power_asymptotic": asym.power})
    else:
        row.update({"tau": asym.tau + 0.0, "power_analytic": asym.power, "power_empirical": "", "se": "",
                    "discrepancy": "", "sigma_source": "asymptotic", "power_asymptotic": asym.power})
    return row


def cmd_simulate(args) -> int:
    kind = _kind(args.test)
    n, p = _shape(args, kind)
    alpha = _alpha(args)
    if not args.reps or args.reps < 100:
        raise UserError("simulate needs --reps >= 100")
    seed = _seed(args, True)
    spec, Sigma = _sigma(args, p)
    row = _power_row(kind, n, p, alpha, spec, Sigma, args.reps, seed, args.threads,
                     args.calib_reps or max(args.reps, DEFAULT_CALIB_REPS))
    row["schema_version"] = CSV_SCHEMA_VERSION
    _emit([row] if args.format == "csv" else row, args.format, args.out)
    return 0


def _parse_floats(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UserError(f"malformed grid {text!r}") from None
    if not vals:
        raise UserError("grid is empty")
    return vals


def _parse_np_grid(text: str) -> list[tuple[int, int]]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            n, p = (int(v) for v in item.lower().split("x"))
        except ValueError:
            raise UserError(f"malformed (n,p) grid entry {item!r}; use NxP, e.g. 201x50") from None
        out.append((n, p))
    if not out:
        raise UserError("grid is empty")
    return out


def _ordering_columns(a: np.ndarray, n: int, p: int, alpha: float) -> dict:
    o = power_ordering(a, n, p, alpha)
    betas = {"beta_lrt": "", "beta_lrt_s": ""}
    if o.lrt_vs_lrts is not None:
        betas = {"beta_lrt": spiked_power("lrt", a, n, p, alpha), "beta_lrt_s": spiked_power("lrt-s", a, n, p, alpha)}
    return {**betas, "beta_nagao": spiked_power("nagao", a, n, p, alpha),
            "beta_john": spiked_power("john", a, n, p, alpha),
            "lrt_vs_lrts": o.lrt_vs_lrts or "", "na_vs_john": o.na_vs_john, "boundary": o.boundary}


def cmd_sweep(args) -> int:
    alpha = _alpha(args)
    kinds = list(KINDS) if args.test == "all" else [_kind(args.test)]
    if (args.spike_grid is None) == (args.np_grid is None):
        raise UserError("give exactly one of --spike-grid or --np-grid")
    reps = args.reps or 0
    seed = _seed(args, reps > 0)
    if args.spike_grid is not None:
        n, p = _shape(args)
        points = [(n, p, a1) for a1 in _parse_floats(args.spike_grid)]
    else:
        points = [(n, p, args.spike) for n, p in _parse_np_grid(args.np_grid)]
    rows = []
    for n, p, a1 in points:
        if n < 2 or p < 1:
            raise UserError(f"invalid grid point n={n}, p={p}")
        a = np.zeros(p)
        a[0] = a1
        spec = CovarianceSpec.spiked(a)
        Sigma = build_covariance(spec)
        extra = _ordering_columns(a, n, p, alpha)
        for kind in kinds:
            if kind in LOGDET_KINDS and p > n - 2 and args.test == "all":
                continue
            row = _power_row(kind, n, p, alpha, spec, Sigma, reps, seed, args.threads,
                             args.calib_reps or max(reps, DEFAULT_CALIB_REPS))
            row.update(extra)
            rows.append(row)
    _emit(rows, args.format, args.out)
    return 0


def cmd_verify(args) -> int:
    from hdcov import verify

    seed = _seed(args, False)
    seed = verify.DEFAULT_SEED if seed is None else seed
    criteria = None
    if args.criteria:
        try:
            criteria = sorted({int(c) for c in args.criteria.split(",") if c.strip()})
        except ValueError:
            raise UserError(f"malformed --criteria {args.criteria!r}") from None
        unknown = [c for c in criteria if c not in verify.CRITERIA and c != 11]
        if unknown:
            raise UserError(f"unknown criteria {unknown}")
    threads = args.threads if args.threads is not None else 8
    checks = verify.run_suite(criteria, seed, threads, args.reproducibility,
                              log=lambda line: print(line, file=sys.stderr, flush=True))
    report = verify.report(checks, seed)
    text = _json(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"{report['passed']} passed, {report['failed']} failed", file=sys.stderr)
    return 0 if report["failed"] == 0 else 1


def _threads(text: str) -> int:
    k = int(text)
    if k < 1:
        raise argparse.ArgumentTypeError("--threads must be at least 1")
    return k


def build_parser() -> argparse.ArgumentParser:
    test_choices = sorted(ALIASES) + list(KINDS)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, help="sample count n (N = n - 1)")
    common.add_argument("--p", type=int, help="dimension p")
    common.add_argument("--alpha", type=float, default=0.05)
    common.add_argument("--sigma", help="covariance spec: inline JSON, JSON file or dense CSV file")
    common.add_argument("--reps", type=int, default=0, help="Monte Carlo replicates")
    common.add_argument("--calib-reps", type=int, default=0, help="replicates for Monte Carlo calibration")
    common.add_argument("--seed", help="master seed (integer) or 'auto'")
    common.add_argument("--calib", help="calibration source: file, 'asymptotic' or 'mc'")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--threads", type=_threads, default=None,
                        help="worker threads (default: $HDCOV_THREADS); results do not depend on it")

    parser = argparse.ArgumentParser(prog="hdcov", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", parents=[common], help="null mean and sd of a statistic")
    p.add_argument("--test", required=True, choices=test_choices)
    p.set_defaults(func=cmd_calibrate, default_format="json")

    p = sub.add_parser("test", parents=[common], help="run a test on a data file")
    p.add_argument("--test", required=True, choices=test_choices)
    p.add_argument("--data", required=True, help="CSV data file, one observation per line")
    p.add_argument("--header", action="store_true", help="data file has a header line")
    p.add_argument("--mean", choices=("unknown", "known"), default="unknown")
    p.set_defaults(func=cmd_test, default_format="json")

    p = sub.add_parser("power", parents=[common], help="analytic power under a covariance")
    p.add_argument("--test", required=True, choices=test_choices)
    p.add_argument("--diagnose", action="store_true", help="add the contiguity report")
    p.add_argument("--t", type=float, default=0.0, help="evaluation point of the 2/3-exponent bound term")
    p.set_defaults(func=cmd_power, default_format="json")

    p = sub.add_parser("simulate", parents=[common], help="analytic vs empirical power")
    p.add_argument("--test", required=True, choices=test_choices)
    p.set_defaults(func=cmd_simulate, default_format="csv")

    p = sub.add_parser("sweep", parents=[common], help="power curves over a grid")
    p.add_argument("--test", required=True, choices=test_choices + ["all"])
    p.add_argument("--spike-grid", help="comma-separated single-spike magnitudes a1")
    p.add_argument("--np-grid", help="comma-separated NxP pairs of (n, p), e.g. 101x25,201x50")
    p.add_argument("--spike", type=float, default=1.0, help="spike a1 used with --np-grid")
    p.set_defaults(func=cmd_sweep, default_format="csv")

    p = sub.add_parser("verify", parents=[common], help="run the oracle suite")
    p.add_argument("--criteria", help="comma-separated criterion numbers (default: all)")
    p.add_argument("--reproducibility", choices=("light", "full", "off"), default="light")
    p.set_defaults(func=cmd_verify, default_format="json")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = args.default_format
    try:
        if args.reps and args.reps < 0:
            raise UserError("--reps must be nonnegative")
        return args.func(args)
    except (UserError, HdcovError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
