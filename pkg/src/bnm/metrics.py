"""Scalar measurements of a batch prediction matrix.

Every function accepts a :class:`~bnm.matrix.PredictionMatrix` or a plain
array. Plain arrays are not simplex-validated, which lets the gradient
harness probe points just off the simplex.
"""
import math
from dataclasses import dataclass

import numpy as np

from bnm.errors import InvalidD, ZeroGroundTruth
from bnm.matrix import argmax_rows, as_array, one_hot, svd

TINY = 1e-300
CHAIN_SLACK = 1e-9


def entropy(A):
    """Mean row Shannon entropy in nats, ``-(1/B) sum A log A``.

    Entries below 1e-300 (including exact zeros) contribute nothing.
    """
    a = as_array(A)
    pos = a > TINY
    safe = np.where(pos, a, 1.0)
    return float(-np.sum(np.where(pos, a * np.log(safe), 0.0)) / a.shape[0]) + 0.0


def frobenius_norm(A):
    a = as_array(A)
    return float(np.sqrt(np.einsum("ij,ij->", a, a)))


def nuclear_norm(A, method="jacobi", kernel=None):
    """Sum of singular values.

    ``method="jacobi"`` uses :func:`bnm.matrix.svd`; ``method="lapack"`` sums
    ``numpy.linalg.svd`` singular values and exists for timing comparisons
    against a library SVD.
    """
    if method == "jacobi":
        return float(np.sum(svd(A, kernel=kernel).singular_values))
    if method == "lapack":
        return float(np.sum(np.linalg.svd(as_array(A), compute_uv=False)))
    raise ValueError(f"unknown nuclear norm method {method!r}")


def column_norms(A):
    a = as_array(A)
    return np.sqrt(np.einsum("ij,ij->j", a, a))


def resolve_d(A, d):
    rows, cols = as_array(A).shape
    if d is None:
        return min(rows, cols)
    if isinstance(d, bool) or int(d) != d or not 1 <= d <= cols:
        raise InvalidD(f"d must be an integer in [1, {cols}], got {d!r}")
    return int(d)


def top_columns(A, d=None):
    """Indices of the ``d`` largest column L2 norms, plus all column norms.

    Equal norms are ordered by ascending column index.
    """
    norms = column_norms(A)
    d = resolve_d(A, d)
    order = np.argsort(-norms, kind="stable")
    return order[:d], norms


def fast_nuclear_norm(A, d=None):
    """Sum of the ``d`` largest column L2 norms (no SVD).

    ``d`` defaults to ``min(B, C)``.
    """
    selected, norms = top_columns(A, d)
    return float(np.sum(norms[selected]))


def predicted_category_count(A):
    """Number of distinct row-wise argmax columns."""
    return int(np.unique(argmax_rows(A)).size)


def diversity_ratio(A, ground_truth_count):
    if ground_truth_count < 1:
        raise ZeroGroundTruth(f"ground truth category count must be >= 1, got {ground_truth_count}")
    return predicted_category_count(A) / ground_truth_count


def effective_rank(A, kernel=None):
    """Number of singular values above the clamp threshold."""
    return svd(A, kernel=kernel).rank


def argmax_one_hot(A):
    a = as_array(A)
    return one_hot(argmax_rows(a), a.shape[1])


def weighted_norm_objective(A, w_nuclear, w_frobenius):
    return w_nuclear * nuclear_norm(A) + w_frobenius * frobenius_norm(A)


def _le(x, y):
    return x <= y + CHAIN_SLACK * max(abs(x), abs(y))


@dataclass(frozen=True)
class BoundsReport:
    """Norms of one matrix and the bounds that tie them together.

    ``chain_ok`` checks ``nuclear/sqrt(D) <= frobenius <= nuclear <=
    sqrt(D)*frobenius``; ``bounds_ok`` checks ``sqrt(B/C) <= frobenius <=
    sqrt(B)`` and ``nuclear <= sqrt(D*B)``. Both use 1e-9 relative slack.
    """

    b: int
    c: int
    frobenius: float
    nuclear: float
    fast_nuclear: float
    entropy: float
    f_lower: float
    f_upper: float
    nuclear_upper: float
    chain_ok: bool
    bounds_ok: bool


def bounds_report(A, kernel=None):
    a = as_array(A)
    b, c = a.shape
    dim = min(b, c)
    fro = frobenius_norm(a)
    nuc = nuclear_norm(a, kernel=kernel)
    root_d = math.sqrt(dim)
    f_lower = math.sqrt(b / c)
    f_upper = math.sqrt(b)
    nuc_upper = math.sqrt(dim * b)
    chain_ok = (_le(nuc / root_d, fro) and _le(fro, nuc) and _le(nuc, root_d * fro))
    bounds_ok = (_le(f_lower, fro) and _le(fro, f_upper) and _le(nuc, nuc_upper)
                 and _le(root_d * fro, nuc_upper))
    return BoundsReport(
        b=b, c=c, frobenius=fro, nuclear=nuc, fast_nuclear=fast_nuclear_norm(a),
        entropy=entropy(a), f_lower=f_lower, f_upper=f_upper, nuclear_upper=nuc_upper,
        chain_ok=bool(chain_ok), bounds_ok=bool(bounds_ok),
    )
