"""Batch nuclear-norm objectives for domain adaptation.

Exact and fast (top-d column norm) batch nuclear norms, entropy and
Frobenius discriminability measures, diversity metrics, analytic gradients,
the multi-batch loss accumulation, a synthetic linear-softmax trainer and a
timing harness.
"""
from bnm._kernels import DEFAULT_KERNEL, KERNELS
from bnm.matrix import PredictionMatrix, SvdResult, from_rows, softmax, stack, svd
from bnm.metrics import (
    BoundsReport,
    bounds_report,
    diversity_ratio,
    effective_rank,
    entropy,
    fast_nuclear_norm,
    frobenius_norm,
    nuclear_norm,
    predicted_category_count,
    weighted_norm_objective,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_KERNEL",
    "KERNELS",
    "PredictionMatrix",
    "SvdResult",
    "from_rows",
    "softmax",
    "stack",
    "svd",
    "BoundsReport",
    "bounds_report",
    "diversity_ratio",
    "effective_rank",
    "entropy",
    "fast_nuclear_norm",
    "frobenius_norm",
    "nuclear_norm",
    "predicted_category_count",
    "weighted_norm_objective",
]
