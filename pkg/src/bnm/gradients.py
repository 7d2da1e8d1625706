"""Analytic gradients of the scalar objectives, plus a finite-difference check.

Gradients treat ``A`` as an unconstrained matrix; the simplex is handled by
chaining through softmax upstream.
"""
from dataclasses import dataclass

import numpy as np

from bnm.errors import ZeroColumnSelected, ZeroEntry
from bnm.matrix import as_array, svd
from bnm.metrics import top_columns


def entropy_grad(A):
    a = as_array(A)
    if np.any(a <= 0.0):
        i, j = np.argwhere(a <= 0.0)[0]
        raise ZeroEntry(f"entropy gradient undefined at zero entry ({i}, {j})")
    return -(np.log(a) + 1.0) / a.shape[0]


def frobenius_grad(A):
    a = as_array(A)
    return a / np.sqrt(np.einsum("ij,ij->", a, a))


def nuclear_grad(A, kernel=None):
    """Subgradient ``U_r V_r^T`` over singular values above the clamp threshold.

    This is the gradient whenever the retained singular values are distinct
    and positive; at repeated or zero singular values it is one valid
    subgradient (spectral norm <= 1, ``<G, A> = ||A||_*``).
    """
    res = svd(A, kernel=kernel)
    r = res.rank
    return res.left_vectors[:, :r] @ res.right_vectors[:, :r].T


def fast_nuclear_grad(A, d=None):
    """Gradient of the top-``d`` column-norm sum with the selection held fixed."""
    a = as_array(A)
    selected, norms = top_columns(a, d)
    if np.any(norms[selected] <= 0.0):
        j = int(selected[np.argmax(norms[selected] <= 0.0)])
        raise ZeroColumnSelected(f"selected column {j} has zero norm")
    grad = np.zeros_like(a)
    grad[:, selected] = a[:, selected] / norms[selected]
    return grad


@dataclass(frozen=True)
class GradientCheckReport:
    max_rel_error: float
    max_abs_error: float
    probe_count: int
    step: float


def finite_diff_check(objective, analytic_grad, A, step=1e-6, probes=20, seed=0,
                      mask=None, scale_step=True, rel_floor=1.0):
    """Compare an analytic gradient with central differences along unit entries.

    Each probe picks one entry ``(i, j)`` with a seeded generator (restricted
    to ``mask`` when given) and compares ``(f(A + h E) - f(A - h E)) / 2h``
    with ``G[i, j]``. With ``scale_step`` the step is ``step * max(1, |A_ij|)``.

    The relative error divides by ``max(|G_ij|, |fd|, rel_floor * max|G|)``.
    The default ``rel_floor=1`` makes it the infinity-norm relative error,
    so entries where the gradient nearly vanishes are judged against the
    gradient's overall scale rather than their own.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if probes < 1:
        raise ValueError("probes must be >= 1")
    a = np.array(as_array(A), dtype=np.float64)
    grad = np.asarray(analytic_grad(a), dtype=np.float64)
    candidates = np.argwhere(np.ones(a.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool))
    if candidates.size == 0:
        raise ValueError("mask selects no entries")
    rng = np.random.default_rng(seed)
    picks = candidates[rng.integers(0, len(candidates), size=probes)]
    floor = rel_floor * float(np.max(np.abs(grad)))
    max_rel = 0.0
    max_abs = 0.0
    for i, j in picks:
        h = step * max(1.0, abs(a[i, j])) if scale_step else step
        orig = a[i, j]
        a[i, j] = orig + h
        f_plus = objective(a)
        a[i, j] = orig - h
        f_minus = objective(a)
        a[i, j] = orig
        fd = (f_plus - f_minus) / (2.0 * h)
        err = abs(fd - grad[i, j])
        denom = max(abs(grad[i, j]), abs(fd), floor)
        max_abs = max(max_abs, err)
        max_rel = max(max_rel, err / denom if denom > 0 else err)
    return GradientCheckReport(float(max_rel), float(max_abs), int(probes), float(step))
