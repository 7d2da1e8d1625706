"""Synthetic two-domain task and a linear softmax trainer.

The target labels produced by :func:`generate_dataset` are used only for
evaluation; no loss ever sees them.
"""
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from bnm import losses
from bnm.errors import (
    DegenerateConfig,
    DimensionMismatch,
    NonFiniteLoss,
    NumericalError,
    ValidationError,
)
from bnm.gradients import entropy_grad, fast_nuclear_grad, frobenius_grad, nuclear_grad
from bnm.matrix import as_array, softmax
from bnm.metrics import (
    entropy,
    fast_nuclear_norm,
    frobenius_norm,
    nuclear_norm,
    predicted_category_count,
)

TRAIN_VARIANTS = ("EntMin", "BFM", "BNM", "BNM2", "FBNM", "FBNM2")
LOG_COLUMNS = ("step", "src_entropy", "tgt_entropy", "diversity_ratio", "accuracy",
               "cls", "bnmax", "bnmin", "total")


@dataclass(frozen=True)
class SyntheticConfig:
    feature_dim: int = 2
    categories: int = 3
    source_per_class: int = 200
    target_size: int = 300
    target_proportions: tuple = (0.7, 0.2, 0.1)
    domain_shift: Optional[tuple] = None
    shift_magnitude: float = 1.0
    class_separation: float = 1.25
    noise_sigma: float = 0.5
    seed: int = 1

    def __post_init__(self):
        props = np.asarray(self.target_proportions, dtype=float)
        if props.shape != (self.categories,):
            raise ValidationError("target_proportions needs one entry per category")
        if np.any(props < 0) or abs(props.sum() - 1.0) > 1e-9:
            raise ValidationError("target_proportions must be nonnegative and sum to 1")
        if self.noise_sigma <= 0:
            raise ValidationError("noise_sigma must be positive")
        if self.categories < 2 or self.feature_dim < 1:
            raise ValidationError("need categories >= 2 and feature_dim >= 1")
        if self.domain_shift is not None and len(self.domain_shift) != self.feature_dim:
            raise ValidationError("domain_shift must have length feature_dim")


@dataclass
class SyntheticData:
    source_x: np.ndarray
    source_y: np.ndarray
    target_x: np.ndarray
    target_y: np.ndarray
    class_means: np.ndarray
    shift: np.ndarray


def proportional_counts(proportions, total):
    """Largest-remainder allocation of ``total`` items; ties to the lowest index."""
    props = np.asarray(proportions, dtype=float)
    raw = props * total
    counts = np.floor(raw + 1e-9).astype(int)
    short = total - counts.sum()
    if short > 0:
        frac = raw - counts
        order = np.argsort(-frac, kind="stable")
        counts[order[:short]] += 1
    return counts


def generate_dataset(config):
    rng = np.random.default_rng(config.seed)
    c, f = config.categories, config.feature_dim
    if c > f + 1:
        warnings.warn(DegenerateConfig(
            f"{c} class means cannot be equidistant in {f} dimensions"), stacklevel=2)
    means = rng.standard_normal((c, f))
    means -= means.mean(axis=0)
    norms = np.linalg.norm(means, axis=1, keepdims=True)
    means = config.class_separation * means / np.where(norms > 0, norms, 1.0)
    if config.domain_shift is None:
        direction = rng.standard_normal(f)
        shift = config.shift_magnitude * direction / np.linalg.norm(direction)
    else:
        shift = np.asarray(config.domain_shift, dtype=float)

    source_y = np.repeat(np.arange(c), config.source_per_class)
    source_x = means[source_y] + config.noise_sigma * rng.standard_normal((source_y.size, f))
    counts = proportional_counts(config.target_proportions, config.target_size)
    target_y = np.repeat(np.arange(c), counts)
    target_x = means[target_y] + shift + config.noise_sigma * rng.standard_normal((target_y.size, f))
    return SyntheticData(source_x, source_y, target_x, target_y, means, shift)


@dataclass
class SoftmaxClassifier:
    weights: np.ndarray
    bias: np.ndarray

    @classmethod
    def zeros(cls, categories, feature_dim):
        return cls(np.zeros((categories, feature_dim)), np.zeros(categories))

    def logits(self, x):
        return np.asarray(x, dtype=float) @ self.weights.T + self.bias

    def predict_proba(self, x):
        return softmax(self.logits(x)).values

    def copy(self):
        return SoftmaxClassifier(self.weights.copy(), self.bias.copy())


@dataclass(frozen=True)
class TrainConfig:
    variant: str = "BNM"
    lam: float = losses.DEFAULT_LAMBDA
    learning_rate: float = 0.1
    steps: int = 500
    batch_source: int = 24
    batch_target: int = 24
    k: int = 1
    d: Optional[int] = None
    seed: int = 0
    w_nuclear: Optional[float] = None
    w_frobenius: Optional[float] = None
    legacy_multibatch_norm: bool = False

    def __post_init__(self):
        if self.variant not in TRAIN_VARIANTS:
            raise ValidationError(f"unknown variant {self.variant!r}; expected one of {TRAIN_VARIANTS}")
        if self.learning_rate <= 0 or self.steps < 1 or self.batch_source < 1 or self.batch_target < 1:
            raise ValidationError("need learning_rate > 0, steps >= 1 and batch sizes >= 1")
        if self.lam < 0 or self.k < 1:
            raise ValidationError("need lam >= 0 and k >= 1")
        if (self.w_nuclear is None) != (self.w_frobenius is None):
            raise ValidationError("w_nuclear and w_frobenius must be given together")


@dataclass
class TrainLog:
    records: list = field(default_factory=list)

    def append(self, **row):
        self.records.append(row)

    def column(self, name):
        return np.array([r[name] for r in self.records])

    def __len__(self):
        return len(self.records)


def evaluate(model, features, labels):
    """Fraction of argmax predictions equal to ``labels``."""
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DimensionMismatch("evaluation set is empty")
    if y.shape != (x.shape[0],):
        raise DimensionMismatch(f"{y.size} labels for {x.shape[0]} samples")
    if x.shape[1] != model.weights.shape[1]:
        raise DimensionMismatch(f"features have dimension {x.shape[1]}, model expects {model.weights.shape[1]}")
    return float(np.mean(np.argmax(model.logits(x), axis=1) == y))


def entropy_min_loss(A_target):
    return entropy(A_target), entropy_grad(A_target)


def bfm_loss(A_target):
    a = as_array(A_target)
    return -frobenius_norm(a) / a.shape[0], -frobenius_grad(a) / a.shape[0]


def weighted_target_loss(A_target, w_nuclear, w_frobenius, fast=False, d=None):
    """``-(1/B_T) (w_nuclear ||A||_* + w_frobenius ||A||_F)`` and its gradient."""
    a = as_array(A_target)
    if fast:
        nuc, g_nuc = fast_nuclear_norm(a, d), fast_nuclear_grad(a, d)
    else:
        nuc, g_nuc = nuclear_norm(a), nuclear_grad(a)
    scale = a.shape[0]
    value = -(w_nuclear * nuc + w_frobenius * frobenius_norm(a)) / scale
    return value, -(w_nuclear * g_nuc + w_frobenius * frobenius_grad(a)) / scale


def softmax_backward(A, grad_A):
    """Chain ``dL/dA`` through a row-wise softmax: ``A * (g - <g, A>)``."""
    return A * (grad_A - np.sum(grad_A * A, axis=1, keepdims=True))


def batch_diversity(probs, true_labels):
    return predicted_category_count(probs) / np.unique(true_labels).size


def _step_losses(config, a_s, y_s, a_t, buffers):
    """Loss breakdown for one step, gradients with respect to both batches."""
    variant, lam = config.variant, config.lam
    if config.w_nuclear is not None:
        cls, g_s = losses.cls_loss(a_s, y_s)
        value, g_t = weighted_target_loss(a_t, config.w_nuclear, config.w_frobenius,
                                          fast=variant.startswith("F"), d=config.d)
        return losses.LossBreakdown(cls, value, 0.0, cls + lam * value, lam, g_s, lam * g_t)
    if variant == "EntMin":
        cls, g_s = losses.cls_loss(a_s, y_s)
        value, g_t = entropy_min_loss(np.maximum(a_t, 1e-300))
        return losses.LossBreakdown(cls, value, 0.0, cls + lam * value, lam, g_s, lam * g_t)
    if variant == "BFM":
        cls, g_s = losses.cls_loss(a_s, y_s)
        value, g_t = bfm_loss(a_t)
        return losses.LossBreakdown(cls, value, 0.0, cls + lam * value, lam, g_s, lam * g_t)
    if buffers is not None:
        return losses.multibatch_bnm_step(buffers[0], buffers[1], a_s, y_s, a_t, variant, lam,
                                          config.d, legacy_norm=config.legacy_multibatch_norm)
    return losses.combined_loss(a_s, y_s, a_t, variant, lam, config.d)


def train(model, data, config):
    """Plain gradient descent on cls + lambda * (variant's unsupervised term).

    Each step draws a source and a target batch uniformly with replacement
    from a generator seeded by ``config.seed``. Returns the trained copy of
    ``model`` and a per-step :class:`TrainLog`.
    """
    if model.weights.shape[1] != data.source_x.shape[1]:
        raise DimensionMismatch("model and data feature dimensions differ")
    model = model.copy()
    rng = np.random.default_rng(config.seed)
    buffers = None
    if config.k > 1 and config.variant in losses.VARIANTS and config.w_nuclear is None:
        buffers = (losses.MultiBatchBuffer(config.k), losses.MultiBatchBuffer(config.k))
    log = TrainLog()
    n_s, n_t = data.source_x.shape[0], data.target_x.shape[0]
    for step in range(config.steps):
        idx_s = rng.integers(0, n_s, size=config.batch_source)
        idx_t = rng.integers(0, n_t, size=config.batch_target)
        x_s, y_s = data.source_x[idx_s], data.source_y[idx_s]
        x_t = data.target_x[idx_t]
        a_s = model.predict_proba(x_s)
        a_t = model.predict_proba(x_t)
        try:
            br = _step_losses(config, a_s, y_s, a_t, buffers)
        except NumericalError as err:
            # saturated probabilities after a blow-up; report where it happened
            raise NonFiniteLoss(step, float("nan")) from err
        if not np.isfinite(br.total):
            raise NonFiniteLoss(step, br.total)
        dz_s = softmax_backward(a_s, br.grad_source)
        dz_t = softmax_backward(a_t, br.grad_target)
        grad_w = dz_s.T @ x_s + dz_t.T @ x_t
        grad_b = dz_s.sum(axis=0) + dz_t.sum(axis=0)
        if not (np.all(np.isfinite(grad_w)) and np.all(np.isfinite(grad_b))):
            raise NonFiniteLoss(step, float("nan"))
        model.weights -= config.learning_rate * grad_w
        model.bias -= config.learning_rate * grad_b
        log.append(
            step=step,
            src_entropy=entropy(a_s),
            tgt_entropy=entropy(a_t),
            diversity_ratio=batch_diversity(a_t, data.target_y[idx_t]),
            accuracy=evaluate(model, data.target_x, data.target_y),
            cls=br.cls, bnmax=br.bnmax, bnmin=br.bnmin, total=br.total,
        )
    return model, log


def final_diversity(model, data, batch_size=24, batches=200, seed=0):
    """Mean predicted-category count over mean true count, on random target batches."""
    rng = np.random.default_rng(seed)
    pred, true = 0, 0
    for _ in range(batches):
        idx = rng.integers(0, data.target_x.shape[0], size=batch_size)
        pred += predicted_category_count(model.predict_proba(data.target_x[idx]))
        true += np.unique(data.target_y[idx]).size
    return pred / true


CANONICAL_TASK = SyntheticConfig()
CANONICAL_TRAIN = TrainConfig()


def run_variant(variant, data=None, **overrides):
    """Train a zero-initialized model on ``data`` (canonical task by default)."""
    data = generate_dataset(CANONICAL_TASK) if data is None else data
    config = replace(CANONICAL_TRAIN, variant=variant, **overrides)
    model = SoftmaxClassifier.zeros(data.class_means.shape[0], data.source_x.shape[1])
    return train(model, data, config)
