"""Category occupancy of uniformly sampled batches.

Batches draw ``b`` category labels uniformly with replacement from ``c``
categories. The Monte Carlo path uses numpy's Philox counter-based
generator: trials are split into fixed blocks of ``BLOCK_TRIALS`` and block
``k`` uses ``Philox(seed).jumped(k)``, so results do not depend on how many
workers process the blocks.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from bnm.errors import NumericalOverflow

BLOCK_TRIALS = 10_000


@dataclass(frozen=True)
class OccupancyStats:
    """Percentages of categories holding 0, 1, 2 and >= 3 samples of a batch."""

    ratio_0: float
    ratio_1: float
    ratio_2: float
    ratio_3plus: float
    trials: int
    c: int
    b: int

    def as_row(self):
        return [self.ratio_0, self.ratio_1, self.ratio_2, self.ratio_3plus]


def _check(c, b):
    if c < 1 or b < 1:
        raise ValueError(f"c and b must be >= 1, got c={c}, b={b}")


def block_generator(seed, block):
    return np.random.Generator(np.random.Philox(seed).jumped(block))


def _block_histogram(c, b, trials, seed, block):
    rng = block_generator(seed, block)
    labels = rng.integers(0, c, size=(trials, b))
    offsets = (np.arange(trials) * c)[:, None]
    counts = np.bincount((labels + offsets).ravel(), minlength=trials * c)
    hist = np.bincount(np.minimum(counts, 3), minlength=4)
    return hist.astype(np.int64)


def occupancy_monte_carlo(c, b, trials, seed=0, workers=1):
    """Average occupancy histogram over ``trials`` sampled batches."""
    _check(c, b)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    blocks = []
    start = 0
    while start < trials:
        size = min(BLOCK_TRIALS, trials - start)
        blocks.append((len(blocks), size))
        start += size
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hists = list(pool.map(lambda blk: _block_histogram(c, b, blk[1], seed, blk[0]), blocks))
    else:
        hists = [_block_histogram(c, b, size, seed, k) for k, size in blocks]
    total = np.sum(hists, axis=0)
    pct = 100.0 * total / (trials * c)
    return OccupancyStats(*map(float, pct), trials=int(trials), c=int(c), b=int(b))


def _log_binom_pmf(b, k, p):
    if p == 1.0:
        return 0.0 if k == b else -math.inf
    return (math.lgamma(b + 1) - math.lgamma(k + 1) - math.lgamma(b - k + 1)
            + k * math.log(p) + (b - k) * math.log1p(-p))


def occupancy_analytic(c, b):
    """Binomial(b, 1/c) occupancy probabilities for 0, 1, 2 samples; the rest is >= 3."""
    _check(c, b)
    p = 1.0 / c
    ratios = []
    for k in range(3):
        if k > b:
            ratios.append(0.0)
            continue
        logp = _log_binom_pmf(b, k, p)
        if logp > 709.0:
            raise NumericalOverflow(f"binomial term overflows for b={b}, k={k}")
        ratios.append(100.0 * math.exp(logp))
    return OccupancyStats(ratios[0], ratios[1], ratios[2], 100.0 - sum(ratios),
                          trials=0, c=int(c), b=int(b))


def expected_category_count(c, b):
    """Expected number of distinct categories among ``b`` uniform draws from ``c``."""
    _check(c, b)
    return c * -math.expm1(b * math.log1p(-1.0 / c)) if c > 1 else 1.0
