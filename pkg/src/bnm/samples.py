"""Seeded random prediction matrices with controlled structure.

Used by the gradient checks, the approximation-quality study and the
acceptance suite.
"""
import numpy as np

from bnm.errors import NumericalError
from bnm.matrix import softmax, svd
from bnm.metrics import top_columns

SIGMA_GAP = 0.05
MAX_RESAMPLES = 1000


def random_softmax(rng, b, c, scale=1.0):
    return softmax(scale * rng.standard_normal((b, c))).values


def gap_filtered_matrix(rng, b, c, gap=SIGMA_GAP, attempts=MAX_RESAMPLES):
    """Diagonal-dominant softmax matrix whose singular values are separated.

    Returns the matrix and the number of rejected draws.
    """
    for tries in range(attempts):
        logits = rng.standard_normal((b, c)) + 3.0 * np.eye(b, c)
        A = softmax(logits).values
        sigma = svd(A).singular_values
        if sigma[-1] > gap and (sigma.size < 2 or np.min(-np.diff(sigma)) > gap):
            return A, tries
    raise NumericalError(f"no matrix passed the singular value gap filter in {attempts} draws")


def sharp_matrix(rng, b, c, min_peak=0.9):
    """Softmax matrix with per-row maximum entry >= ``min_peak``."""
    logits = rng.standard_normal((b, c))
    peak = rng.integers(0, c, size=b)
    A = softmax(logits).values
    while True:
        low = A.max(axis=1) < min_peak
        if not low.any():
            return A
        logits[np.flatnonzero(low), peak[low]] += 1.0
        A = softmax(logits).values


def selection_stable_mask(A, d, h):
    """Entries of selected columns whose +-h perturbation keeps the top-d set."""
    selected, norms = top_columns(A, d)
    mask = np.zeros(A.shape, dtype=bool)
    unselected = np.setdiff1d(np.arange(A.shape[1]), selected)
    ceiling = norms[unselected].max() if unselected.size else -np.inf
    for j in selected:
        col = A[:, j]
        base = norms[j] ** 2 - col ** 2
        lo = np.sqrt(np.maximum(base + (col - h * np.maximum(1.0, np.abs(col))) ** 2, 0.0))
        hi = np.sqrt(base + (col + h * np.maximum(1.0, np.abs(col))) ** 2)
        mask[:, j] = (np.minimum(lo, hi) > ceiling)
    return mask
