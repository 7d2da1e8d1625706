"""Timing harness for the batch objectives.

Matrices are generated outside the timed region, in chunks of at most
``chunk_bytes`` so large sizes do not need every matrix in memory at once.
Each method sees the same matrix sequence for a given size. BLAS/LAPACK is
limited to one thread while timing.
"""
import time
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from bnm._kernels import KERNELS
from bnm.errors import InsufficientData
from bnm.matrix import svd
from bnm.metrics import entropy, fast_nuclear_norm, nuclear_norm

METHODS = ("BNM", "EntMin", "FBNM")
REFERENCE_SIZES = ((100, 100), (100, 1000), (100, 10000), (1000, 100), (10000, 100), (1000, 1000))
WARMUP = 10


@dataclass(frozen=True)
class BenchResult:
    b: int
    c: int
    method: str
    total_seconds: float
    repeats: int


@dataclass(frozen=True)
class KernelBenchResult:
    b: int
    c: int
    kernel: str
    total_seconds: float
    repeats: int


def random_prediction_batch(rng, count, b, c):
    """``count`` softmax matrices of standard-normal logits, shape (count, b, c)."""
    z = rng.standard_normal((count, b, c))
    z -= z.max(axis=2, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=2, keepdims=True)
    return z


def _method_fns(svd_method):
    return {
        "BNM": lambda a: nuclear_norm(a, method=svd_method),
        "EntMin": entropy,
        "FBNM": fast_nuclear_norm,
    }


def _time_sequence(fns, b, c, repeats, seed, chunk_bytes):
    rng = np.random.default_rng(seed)
    chunk = max(1, min(repeats, chunk_bytes // (8 * b * c)))
    totals = dict.fromkeys(fns, 0.0)
    done = 0
    while done < repeats:
        n = min(chunk, repeats - done)
        mats = random_prediction_batch(rng, n, b, c)
        if done == 0:
            for fn in fns.values():
                for k in range(WARMUP):
                    fn(mats[k % n])
        for name, fn in fns.items():
            start = time.perf_counter()
            for k in range(n):
                fn(mats[k])
            totals[name] += time.perf_counter() - start
        done += n
    return totals


def run_bench(sizes=REFERENCE_SIZES, repeats=1000, seed=7, methods=METHODS,
              svd_method="lapack", chunk_bytes=64 << 20):
    """Total wall-clock seconds per (size, method) over ``repeats`` matrices.

    ``svd_method`` picks the exact nuclear norm backend for ``BNM``
    (``"lapack"`` or ``"jacobi"``).
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    all_fns = _method_fns(svd_method)
    fns = {m: all_fns[m] for m in methods}
    results = []
    with threadpool_limits(limits=1):
        for b, c in sizes:
            totals = _time_sequence(fns, int(b), int(c), repeats, seed, chunk_bytes)
            results.extend(BenchResult(int(b), int(c), m, totals[m], repeats) for m in methods)
    return results


def compare_kernels(sizes=((16, 16), (36, 65), (64, 64), (128, 126)), repeats=20, seed=7,
                    kernels=None, chunk_bytes=64 << 20):
    """Time full Jacobi SVDs with each available kernel, plus LAPACK as reference."""
    kernels = sorted(KERNELS) if kernels is None else list(kernels)
    fns = {k: (lambda a, k=k: svd(a, kernel=k)) for k in kernels}
    fns["lapack"] = lambda a: np.linalg.svd(a, full_matrices=False)
    out = []
    with threadpool_limits(limits=1):
        for b, c in sizes:
            totals = _time_sequence(fns, int(b), int(c), repeats, seed, chunk_bytes)
            out.extend(KernelBenchResult(int(b), int(c), k, totals[k], repeats) for k in fns)
    return out


def ratio(results, numerator="BNM", denominator="FBNM"):
    """``{(b, c): t_numerator / t_denominator}``."""
    times = {(r.b, r.c, r.method): r.total_seconds for r in results}
    return {(b, c): t / times[(b, c, denominator)]
            for (b, c, m), t in times.items() if m == numerator and (b, c, denominator) in times}


def fit_exponent(sizes, times):
    """Least-squares slope of log(time) against log(size)."""
    n = np.log(np.asarray(sizes, dtype=float))
    t = np.log(np.asarray(times, dtype=float))
    slope, _ = np.polyfit(n, t, 1)
    return float(slope)


def scaling_fit(results, method):
    """Fitted exponent of total time against n for square sizes n = B = C."""
    square = sorted((r.b, r.total_seconds) for r in results if r.method == method and r.b == r.c)
    if len({n for n, _ in square}) < 3:
        raise InsufficientData(f"need >= 3 square sizes for {method}, got {len(square)}")
    return fit_exponent([n for n, _ in square], [t for _, t in square])
