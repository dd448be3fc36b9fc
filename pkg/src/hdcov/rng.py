"""Deterministic replicate-parallel Monte Carlo.

Replicate ``r`` of an experiment tagged ``tag`` under master seed ``seed`` always
draws from ``Philox(SeedSequence([seed, tag, r]))``. Workers fill a preallocated
array by replicate index and every reduction runs afterwards over that array, so
results do not depend on the number of threads. BLAS is pinned to one thread
inside the map so that matrix products are bitwise stable as well.
"""

from __future__ import annotations

import os
import secrets
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np
from threadpoolctl import threadpool_limits

from hdcov.errors import BadArgument

SEED_MAX = 2**64 - 1


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise BadArgument(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def auto_seed() -> int:
    return secrets.randbits(63)


def tag_of(*parts) -> int:
    """Stable 32-bit tag from a description of the experiment."""
    text = "|".join(str(p) for p in parts)
    return zlib.crc32(text.encode())


def substream(seed: int, tag: int, rep: int) -> np.random.Generator:
    ss = np.random.SeedSequence([check_seed(seed), int(tag), int(rep)])
    return np.random.Generator(np.random.Philox(ss))


def default_threads() -> int:
    env = os.environ.get("HDCOV_THREADS")
    if env:
        try:
            k = int(env)
        except ValueError:
            raise BadArgument(f"HDCOV_THREADS must be an integer, got {env!r}") from None
        if k < 1:
            raise BadArgument("HDCOV_THREADS must be at least 1")
        return k
    return max(1, min(8, os.cpu_count() or 1))


def replicate_map(
    fn: Callable[[np.random.Generator, int], float | np.ndarray],
    reps: int,
    seed: int,
    tag: int,
    threads: int | None = None,
    width: int | None = None,
) -> np.ndarray:
    """Evaluate ``fn(rng_r, r)`` for every replicate; returns shape ``(reps,)`` or ``(reps, width)``."""
    if reps < 1:
        raise BadArgument(f"reps must be positive, got {reps}")
    seed = check_seed(seed)
    threads = default_threads() if threads is None else int(threads)
    if threads < 1:
        raise BadArgument("threads must be at least 1")
    out = np.empty((reps,) if width is None else (reps, width), dtype=np.float64)

    def run(lo: int, hi: int) -> None:
        for r in range(lo, hi):
            out[r] = fn(substream(seed, tag, r), r)

    with threadpool_limits(limits=1):
        if threads == 1 or reps < 2:
            run(0, reps)
        else:
            bounds = np.linspace(0, reps, min(threads * 4, reps) + 1).astype(int)
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = [pool.submit(run, lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]
                for f in futures:
                    f.result()
    return out


def mean_and_se(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    mean = float(np.mean(values))
    if n < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / np.sqrt(n))
