"""Compare the compiled and pure-Python kernel backends.

Run with ``python3 benchmarks/bench_kernels.py [--repeat K]``. Prints the best
per-call time for each kernel and backend and the speedup, after checking the
two backends agree on the inputs used.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from hdcov._kernels import available_backends, backend


def _hessian_args(g: np.random.Generator, N: int, p: int) -> tuple:
    X = g.standard_normal((N, p))
    S = X.T @ X / N
    Sinv = np.linalg.inv(S)
    return (0.5, X @ X.T / N, 1.0 / N, X @ Sinv, 1.0 / N, X @ Sinv @ X.T, Sinv, np.eye(p) - Sinv,
            0.3, 0.1, X @ S, 0.2, X)


def cases(g: np.random.Generator) -> dict[str, tuple[str, tuple]]:
    A = g.standard_normal((200, 100))
    return {
        "summaries p=100": ("summaries", (np.ascontiguousarray(A.T @ A / 200), True)),
        "summaries p=400": ("summaries", (np.ascontiguousarray(np.cov(g.standard_normal((800, 400)), rowvar=False)), True)),
        "assemble_hessian N=32 p=8": ("assemble_hessian", _hessian_args(g, 32, 8)),
        "assemble_hessian N=64 p=16": ("assemble_hessian", _hessian_args(g, 64, 16)),
        "ks_distance 1e5": ("ks_distance", (np.sort(g.standard_normal(100000)),)),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    names = available_backends()
    if "compiled" not in names:
        print("compiled backend not built; only the Python fallback is available")
    g = np.random.default_rng(0)
    print(f"{'kernel':32s} " + " ".join(f"{n:>12s}" for n in names) + ("    speedup" if len(names) > 1 else ""))
    for label, (fn, fargs) in cases(g).items():
        outs = [getattr(backend(n), fn)(*fargs) for n in names]
        if len(outs) > 1:
            assert np.allclose(outs[0], outs[1], rtol=1e-10, atol=1e-10), label
        times = []
        for n in names:
            f = getattr(backend(n), fn)
            t = timeit.Timer(lambda: f(*fargs))
            number, _ = t.autorange()
            times.append(min(t.repeat(args.repeat, number)) / number)
        cols = " ".join(f"{1e6 * t:10.1f}us" for t in times)
        speed = f"  {times[-1] / times[0]:8.2f}x" if len(times) > 1 else ""
        print(f"{label:32s} {cols}{speed}")


if __name__ == "__main__":
    main()
