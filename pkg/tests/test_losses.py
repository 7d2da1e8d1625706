import math

import numpy as np
import pytest

from bnm.errors import ColumnMismatch, DimensionMismatch, ValidationError, ZeroProbabilityAtLabel
from bnm.gradients import finite_diff_check
from bnm.losses import (
    DEFAULT_K,
    DEFAULT_LAMBDA,
    LabelBatch,
    MultiBatchBuffer,
    Pending,
    Ready,
    bnmax_loss,
    bnmin_loss,
    buffer_push,
    cls_loss,
    combined_loss,
    multibatch_bnm_step,
)
from bnm.matrix import softmax, stack
from bnm.metrics import nuclear_norm
from bnm.samples import gap_filtered_matrix

from conftest import IDENTITY, UNIFORM


def test_defaults():
    assert DEFAULT_LAMBDA == 0.5 and DEFAULT_K == 3


def test_label_batch_forms():
    lb = LabelBatch([[0, 1, 0], [1, 0, 0]])
    np.testing.assert_array_equal(lb.indices, [1, 0])
    np.testing.assert_array_equal(lb.one_hot(), [[0, 1, 0], [1, 0, 0]])
    assert len(LabelBatch([2, 0], cols=3)) == 2
    with pytest.raises(ValidationError):
        LabelBatch([[1, 1], [0, 1]])
    with pytest.raises(ValidationError):
        LabelBatch([3], cols=3)
    with pytest.raises(ValidationError):
        LabelBatch([])


def test_cls_loss_examples():
    assert cls_loss([[1.0, 0.0]], [0])[0] == 0.0
    assert cls_loss([[0.5, 0.5]], [0])[0] == pytest.approx(math.log(2), rel=1e-15)
    loss, grad = cls_loss([[0.5, 0.5], [0.25, 0.75]], [0, 1])
    assert loss == pytest.approx((math.log(2) + math.log(4 / 3)) / 2, rel=1e-14)
    assert loss == pytest.approx(0.490415, abs=1e-6)
    np.testing.assert_allclose(grad, [[-1.0, 0.0], [0.0, -0.5 / 0.75]], rtol=1e-15)


def test_cls_loss_errors():
    with pytest.raises(ZeroProbabilityAtLabel):
        cls_loss([[0.0, 1.0]], [0])
    with pytest.raises(DimensionMismatch):
        cls_loss([[0.5, 0.5]], [0, 1])
    with pytest.raises(DimensionMismatch):
        cls_loss([[0.5, 0.5]], LabelBatch([2]))


def test_bnmax_bnmin_examples():
    assert bnmax_loss(IDENTITY)[0] == pytest.approx(-1.0, abs=1e-12)
    assert bnmax_loss(UNIFORM)[0] == pytest.approx(-0.5, abs=1e-12)
    assert bnmax_loss(IDENTITY, fast=True, d=2)[0] == -1.0
    assert bnmin_loss(IDENTITY)[0] == pytest.approx(1.0, abs=1e-12)
    assert bnmin_loss(UNIFORM)[0] == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("fast", [False, True])
def test_bnmax_bnmin_antisymmetry(rng, fast):
    A = softmax(3 * rng.standard_normal((6, 4))).values
    vmax, gmax = bnmax_loss(A, fast)
    vmin, gmin = bnmin_loss(A, fast)
    assert vmax == -vmin
    np.testing.assert_array_equal(gmax, -gmin)
    # with different batch sizes only the 1/B factor differs (up to rounding)
    _, gt = bnmax_loss(A, fast, rows=6)
    _, gs = bnmin_loss(A, fast, rows=9)
    np.testing.assert_allclose(gt * 6, -gs * 9, rtol=1e-15, atol=1e-16)


def test_combined_loss_examples(rng):
    lb = combined_loss([[1.0, 0.0]], [0], IDENTITY, "BNM", 0.5)
    assert lb.total == pytest.approx(-0.5, abs=1e-12)
    assert lb.cls == 0.0 and lb.bnmin == 0.0
    A_s = softmax(rng.standard_normal((5, 3))).values
    A_t = softmax(rng.standard_normal((7, 3))).values
    y = rng.integers(0, 3, 5)
    zero = combined_loss(A_s, y, A_t, "BNM", 0.0)
    assert zero.total == cls_loss(A_s, y)[0]
    one = combined_loss(A_s, y, A_t, "BNM", 0.7)
    two = combined_loss(A_s, y, A_t, "BNM2", 0.7)
    assert two.total - one.total == pytest.approx(0.7 * two.bnmin, abs=1e-14)


@pytest.mark.parametrize("variant", ["BNM", "BNM2", "FBNM", "FBNM2"])
def test_combined_total_invariant(rng, variant):
    A_s = softmax(2 * rng.standard_normal((6, 4))).values
    A_t = softmax(2 * rng.standard_normal((8, 4))).values
    y = rng.integers(0, 4, 6)
    lb = combined_loss(A_s, y, A_t, variant, 0.5)
    active = 1 if variant.endswith("2") else 0
    assert lb.total == pytest.approx(lb.cls + lb.lam * (active * lb.bnmin + lb.bnmax), abs=1e-12)
    if not active:
        assert lb.bnmin == 0.0
        np.testing.assert_array_equal(lb.grad_source, cls_loss(A_s, y)[1])


def test_combined_loss_argument_errors():
    with pytest.raises(ValueError):
        combined_loss(IDENTITY, [0, 1], IDENTITY, "XYZ")
    with pytest.raises(ValueError):
        combined_loss(IDENTITY.copy() * 0.5 + 0.25, [0, 1], IDENTITY, "BNM", -1.0)


@pytest.mark.parametrize("variant", ["BNM2", "FBNM2"])
@pytest.mark.parametrize("seed", range(5))
def test_combined_gradients_match_finite_differences(variant, seed):
    rng = np.random.default_rng(seed)
    A_s, _ = gap_filtered_matrix(rng, 6, 4)
    A_t, _ = gap_filtered_matrix(rng, 6, 4)
    y = np.argmax(A_s, axis=1)
    tol = 1e-5 if variant == "BNM2" else 1e-7
    step = 1e-5 if variant == "BNM2" else 1e-6

    def f_s(a):
        return combined_loss(a, y, A_t, variant, 0.5).total

    def g_s(a):
        return combined_loss(a, y, A_t, variant, 0.5).grad_source

    def f_t(a):
        return combined_loss(A_s, y, a, variant, 0.5).total

    def g_t(a):
        return combined_loss(A_s, y, a, variant, 0.5).grad_target

    for f, g, a in ((f_s, g_s, A_s), (f_t, g_t, A_t)):
        rep = finite_diff_check(f, g, a, step, 20, seed, scale_step=False)
        assert rep.max_rel_error < tol


def test_buffer_k1_is_immediate(rng):
    buf = MultiBatchBuffer(1)
    a = softmax(rng.standard_normal((4, 5))).values
    state = buffer_push(buf, a)
    assert isinstance(state, Ready) and state.mask == range(0, 4)
    np.testing.assert_array_equal(state.stacked.values, a)


def test_buffer_k3_control_flow(rng):
    buf = MultiBatchBuffer(3)
    batches = [softmax(rng.standard_normal((4, 5))).values for _ in range(3)]
    assert buffer_push(buf, batches[0]) == Pending(1)
    assert buffer_push(buf, batches[1]) == Pending(2)
    state = buffer_push(buf, batches[2])
    assert isinstance(state, Ready)
    assert state.stacked.shape == (12, 5) and state.mask == range(8, 12)
    np.testing.assert_array_equal(state.stacked.values[8:], batches[2])
    assert len(buf) == 0
    assert isinstance(buffer_push(buf, batches[0]), Pending)
    assert isinstance(buffer_push(buf, batches[1]), Pending)
    assert isinstance(buffer_push(buf, batches[2]), Ready)


def test_buffer_errors(rng):
    buf = MultiBatchBuffer(2, columns=5)
    with pytest.raises(ColumnMismatch):
        buf.push(softmax(rng.standard_normal((4, 3))))
    with pytest.raises(ValueError):
        MultiBatchBuffer(0)


def test_multibatch_k1_matches_combined(rng):
    bs, bt = MultiBatchBuffer(1), MultiBatchBuffer(1)
    for _ in range(3):
        A_s = softmax(rng.standard_normal((5, 4))).values
        A_t = softmax(rng.standard_normal((6, 4))).values
        y = rng.integers(0, 4, 5)
        got = multibatch_bnm_step(bs, bt, A_s, y, A_t, "BNM2", 0.5)
        want = combined_loss(A_s, y, A_t, "BNM2", 0.5)
        for name in ("cls", "bnmax", "bnmin", "total"):
            assert getattr(got, name) == getattr(want, name)
        np.testing.assert_array_equal(got.grad_source, want.grad_source)
        np.testing.assert_array_equal(got.grad_target, want.grad_target)


def test_multibatch_k2_first_call_pending(rng):
    bs, bt = MultiBatchBuffer(2), MultiBatchBuffer(2)
    A_s = softmax(rng.standard_normal((5, 4))).values
    A_t = softmax(rng.standard_normal((6, 4))).values
    y = rng.integers(0, 4, 5)
    lb = multibatch_bnm_step(bs, bt, A_s, y, A_t, "BNM2", 0.5)
    assert not lb.ready and lb.bnmax == 0.0 and lb.bnmin == 0.0
    assert lb.cls == lb.total == cls_loss(A_s, y)[0]
    assert not lb.grad_target.any()


@pytest.mark.parametrize("legacy", [False, True])
def test_multibatch_k3_normalization(rng, legacy):
    bs, bt = MultiBatchBuffer(3), MultiBatchBuffer(3)
    targets = []
    for _ in range(3):
        A_s = softmax(rng.standard_normal((5, 4))).values
        A_t = softmax(rng.standard_normal((6, 4))).values
        targets.append(A_t)
        lb = multibatch_bnm_step(bs, bt, A_s, rng.integers(0, 4, 5), A_t, "BNM", 0.5,
                                 legacy_norm=legacy)
    assert lb.ready
    rows = 6 if legacy else 18
    assert lb.bnmax == -nuclear_norm(stack(targets)) / rows
    assert not lb.stacked_grad_target[:12].any()
    assert lb.stacked_grad_target[12:].any()


def test_multibatch_rejects_mismatched_buffers():
    with pytest.raises(ValueError):
        multibatch_bnm_step(MultiBatchBuffer(2), MultiBatchBuffer(3), IDENTITY, [0, 1], IDENTITY)
