"""The batch nuclear-norm loss family and multi-batch accumulation."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from bnm.errors import ColumnMismatch, DimensionMismatch, ValidationError, ZeroProbabilityAtLabel
from bnm.gradients import fast_nuclear_grad, nuclear_grad
from bnm.matrix import as_array, stack
from bnm.metrics import fast_nuclear_norm, nuclear_norm

VARIANTS = ("BNM", "BNM2", "FBNM", "FBNM2")
DEFAULT_LAMBDA = 0.5
DEFAULT_K = 3


class LabelBatch:
    """Source labels as category indices; ``one_hot`` gives the B x C indicator."""

    def __init__(self, labels, cols=None):
        arr = np.asarray(labels)
        if arr.ndim == 2:
            if not (np.all((arr == 0) | (arr == 1)) and np.all(arr.sum(axis=1) == 1)):
                raise ValidationError("one-hot label matrix must have exactly one 1 per row")
            cols = arr.shape[1] if cols is None else cols
            arr = np.argmax(arr, axis=1)
        arr = np.asarray(arr, dtype=np.intp)
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError("labels must be a non-empty vector of category indices")
        if np.any(arr < 0) or (cols is not None and np.any(arr >= cols)):
            raise ValidationError(f"label indices must lie in [0, {cols})")
        self.indices = arr
        self.cols = cols

    def __len__(self):
        return self.indices.size

    def one_hot(self, cols=None):
        cols = self.cols if cols is None else cols
        out = np.zeros((self.indices.size, cols))
        out[np.arange(self.indices.size), self.indices] = 1.0
        return out


def _labels(labels):
    return labels if isinstance(labels, LabelBatch) else LabelBatch(labels)


def cls_loss(A_source, labels):
    """Mean negative log-likelihood of the labeled classes and its gradient in A."""
    a = as_array(A_source)
    y = _labels(labels).indices
    if y.size != a.shape[0]:
        raise DimensionMismatch(f"{y.size} labels for {a.shape[0]} predictions")
    if np.any(y >= a.shape[1]):
        raise DimensionMismatch(f"label index out of range for C={a.shape[1]}")
    rows = np.arange(a.shape[0])
    p = a[rows, y]
    if np.any(p <= 0.0):
        raise ZeroProbabilityAtLabel(f"zero probability at labeled entry of row {int(np.argmax(p <= 0.0))}")
    b = a.shape[0]
    grad = np.zeros_like(a)
    grad[rows, y] = -1.0 / (b * p)
    return float(-np.sum(np.log(p)) / b), grad


def _norm_and_grad(a, fast, d):
    if fast:
        return fast_nuclear_norm(a, d), fast_nuclear_grad(a, d)
    return nuclear_norm(a), nuclear_grad(a)


def bnmax_loss(A_target, fast=False, d=None, rows=None):
    """``-(1/B_T) ||A||_*`` and its gradient; ``rows`` overrides B_T."""
    a = as_array(A_target)
    scale = a.shape[0] if rows is None else rows
    value, grad = _norm_and_grad(a, fast, d)
    return -value / scale, -grad / scale


def bnmin_loss(A_source, fast=False, d=None, rows=None):
    """``+(1/B_S) ||A||_*`` and its gradient; ``rows`` overrides B_S."""
    a = as_array(A_source)
    scale = a.shape[0] if rows is None else rows
    value, grad = _norm_and_grad(a, fast, d)
    return value / scale, grad / scale


@dataclass
class LossBreakdown:
    """Per-term loss values and gradients with respect to the current batches.

    ``total = cls + lam * (bnmin + bnmax)``; ``bnmin`` is 0 for the
    single-sided variants. For multi-batch steps ``ready`` tells whether the
    norm terms were evaluated, ``mask`` is the row range of the newest batch
    within the stacked matrices and ``stacked_grad_*`` are the gradients with
    respect to the full stacked matrices (zero outside ``mask``).
    """

    cls: float
    bnmax: float
    bnmin: float
    total: float
    lam: float
    grad_source: Optional[np.ndarray] = None
    grad_target: Optional[np.ndarray] = None
    ready: bool = True
    mask: Optional[range] = None
    stacked_grad_source: Optional[np.ndarray] = field(default=None, repr=False)
    stacked_grad_target: Optional[np.ndarray] = field(default=None, repr=False)


def _check_variant(variant):
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return variant.startswith("F"), variant.endswith("2")


def combined_loss(A_source, labels, A_target, variant="BNM", lam=DEFAULT_LAMBDA, d=None):
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    fast, two_sided = _check_variant(variant)
    cls, grad_s = cls_loss(A_source, labels)
    bnmax, g_max = bnmax_loss(A_target, fast, d)
    grad_t = lam * g_max
    bnmin = 0.0
    if two_sided:
        bnmin, g_min = bnmin_loss(A_source, fast, d)
        grad_s = grad_s + lam * g_min
    total = cls + lam * (bnmin + bnmax)
    return LossBreakdown(cls, bnmax, bnmin, total, lam, grad_s, grad_t)


@dataclass
class Pending:
    count: int


@dataclass
class Ready:
    stacked: object
    mask: range


class MultiBatchBuffer:
    """Collects ``k`` consecutive prediction matrices before a norm update.

    Not safe for concurrent mutation.
    """

    def __init__(self, k=DEFAULT_K, columns=None):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = int(k)
        self.columns = columns
        self.stored = []

    def __len__(self):
        return len(self.stored)

    def push(self, A):
        """Store ``A``; on the k-th push return :class:`Ready` and clear."""
        a = as_array(A)
        if self.columns is None:
            self.columns = a.shape[1]
        elif a.shape[1] != self.columns:
            raise ColumnMismatch(f"batch has {a.shape[1]} columns, buffer holds {self.columns}")
        self.stored.append(np.array(a))
        if len(self.stored) < self.k:
            return Pending(len(self.stored))
        batches, self.stored = self.stored, []
        total = sum(b.shape[0] for b in batches)
        return Ready(stack(batches), range(total - batches[-1].shape[0], total))


def buffer_push(buffer, A):
    return buffer.push(A)


def multibatch_bnm_step(buffer_source, buffer_target, A_source, labels, A_target,
                        variant="BNM", lam=DEFAULT_LAMBDA, d=None, legacy_norm=False):
    """One iteration of multi-batch BNM accumulation.

    The classification term is computed on every call. Norm terms are only
    evaluated when the buffers fill, over the stacked matrices, normalized
    by the stacked row count (or by the current batch size with
    ``legacy_norm``). Gradients flow only through the newest batch.
    """
    if buffer_source.k != buffer_target.k:
        raise ValueError("source and target buffers must share k")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    fast, two_sided = _check_variant(variant)
    a_s = as_array(A_source)
    a_t = as_array(A_target)
    cls, grad_s = cls_loss(a_s, labels)
    state_s = buffer_source.push(a_s)
    state_t = buffer_target.push(a_t)
    if isinstance(state_t, Pending) or isinstance(state_s, Pending):
        if isinstance(state_t, Pending) != isinstance(state_s, Pending):
            raise RuntimeError("source and target buffers are out of step")
        return LossBreakdown(cls, 0.0, 0.0, cls, lam, grad_s, np.zeros_like(a_t), ready=False)

    stacked_t = as_array(state_t.stacked)
    rows_t = a_t.shape[0] if legacy_norm else stacked_t.shape[0]
    bnmax, g_max = bnmax_loss(stacked_t, fast, d, rows=rows_t)
    sg_t = np.zeros_like(stacked_t)
    sg_t[state_t.mask.start:state_t.mask.stop] = lam * g_max[state_t.mask.start:state_t.mask.stop]

    stacked_s = as_array(state_s.stacked)
    sg_s = np.zeros_like(stacked_s)
    sg_s[state_s.mask.start:state_s.mask.stop] = grad_s
    bnmin = 0.0
    if two_sided:
        rows_s = a_s.shape[0] if legacy_norm else stacked_s.shape[0]
        bnmin, g_min = bnmin_loss(stacked_s, fast, d, rows=rows_s)
        sg_s[state_s.mask.start:state_s.mask.stop] += lam * g_min[state_s.mask.start:state_s.mask.stop]
    total = cls + lam * (bnmin + bnmax)
    return LossBreakdown(
        cls, bnmax, bnmin, total, lam,
        grad_source=sg_s[state_s.mask.start:state_s.mask.stop].copy(),
        grad_target=sg_t[state_t.mask.start:state_t.mask.stop].copy(),
        ready=True, mask=state_t.mask,
        stacked_grad_source=sg_s, stacked_grad_target=sg_t,
    )
