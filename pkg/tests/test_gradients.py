import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bnm import gradients, metrics
from bnm.errors import ZeroColumnSelected, ZeroEntry
from bnm.gradients import (
    entropy_grad,
    fast_nuclear_grad,
    finite_diff_check,
    frobenius_grad,
    nuclear_grad,
)
from bnm.matrix import softmax
from bnm.samples import gap_filtered_matrix, selection_stable_mask, sharp_matrix

from conftest import IDENTITY, REPEATED, UNIFORM

logit_matrices = st.tuples(st.integers(1, 10), st.integers(2, 10)).flatmap(
    lambda shape: arrays(np.float64, shape, elements=st.floats(-6, 6)))


def test_entropy_grad_examples():
    np.testing.assert_allclose(entropy_grad([[0.5, 0.5]]), -(math.log(0.5) + 1), rtol=1e-15)
    assert -(math.log(0.5) + 1) == pytest.approx(-0.306853, abs=1e-6)
    np.testing.assert_allclose(entropy_grad(UNIFORM), -0.5 * (math.log(0.5) + 1), rtol=1e-15)
    assert -0.5 * (math.log(0.5) + 1) == pytest.approx(-0.153426, abs=1e-6)
    with pytest.raises(ZeroEntry):
        entropy_grad(IDENTITY)


def test_frobenius_grad_examples():
    np.testing.assert_allclose(frobenius_grad(IDENTITY), IDENTITY / math.sqrt(2), rtol=1e-15)
    np.testing.assert_array_equal(frobenius_grad(UNIFORM), np.full((2, 2), 0.5))


def test_nuclear_grad_repeated_row():
    np.testing.assert_allclose(nuclear_grad(REPEATED), REPEATED / math.sqrt(2), atol=1e-15)


def test_nuclear_grad_degenerate_identity():
    G = nuclear_grad(IDENTITY)
    assert np.linalg.norm(G, 2) <= 1 + 1e-12
    assert np.sum(G * IDENTITY) == pytest.approx(2.0, rel=1e-12)


def test_fast_nuclear_grad_examples():
    np.testing.assert_array_equal(fast_nuclear_grad(IDENTITY, 2), IDENTITY)
    np.testing.assert_allclose(fast_nuclear_grad(REPEATED, 1), REPEATED / math.sqrt(2), rtol=1e-15)
    with pytest.raises(ZeroColumnSelected):
        fast_nuclear_grad(REPEATED, 2)


def test_finite_diff_check_examples(rng):
    rep = finite_diff_check(metrics.frobenius_norm, frobenius_grad, np.full((4, 4), 0.25),
                            step=1e-6, probes=20, seed=0)
    assert rep.max_rel_error < 1e-8 and rep.probe_count == 20 and rep.step == 1e-6
    A = softmax(rng.standard_normal((8, 5))).values
    assert finite_diff_check(metrics.entropy, entropy_grad, A, 1e-6, 50, 3).max_rel_error < 1e-7
    A, _ = gap_filtered_matrix(rng, 8, 5)
    rep = finite_diff_check(metrics.nuclear_norm, nuclear_grad, A, 1e-5, 50, 3, scale_step=False)
    assert rep.max_rel_error < 1e-5


def test_finite_diff_check_detects_wrong_gradient(rng):
    A = softmax(rng.standard_normal((5, 3))).values
    rep = finite_diff_check(metrics.frobenius_norm, lambda a: 2 * frobenius_grad(a), A, 1e-6, 10, 0)
    assert rep.max_rel_error > 0.3


def test_finite_diff_check_is_deterministic_and_restores_input(rng):
    A = softmax(rng.standard_normal((6, 4))).values
    before = A.copy()
    r1 = finite_diff_check(metrics.entropy, entropy_grad, A, 1e-6, 10, 5)
    r2 = finite_diff_check(metrics.entropy, entropy_grad, A, 1e-6, 10, 5)
    assert r1 == r2
    np.testing.assert_array_equal(A, before)


def test_finite_diff_check_argument_errors(rng):
    A = softmax(rng.standard_normal((3, 3))).values
    with pytest.raises(ValueError):
        finite_diff_check(metrics.entropy, entropy_grad, A, step=0.0)
    with pytest.raises(ValueError):
        finite_diff_check(metrics.entropy, entropy_grad, A, probes=0)
    with pytest.raises(ValueError):
        finite_diff_check(metrics.entropy, entropy_grad, A, mask=np.zeros((3, 3), bool))


def test_mask_restricts_probes(rng):
    A = sharp_matrix(rng, 36, 65)
    mask = selection_stable_mask(A, 36, 1e-6)
    selected, _ = metrics.top_columns(A, 36)
    assert not mask[:, np.setdiff1d(np.arange(65), selected)].any()
    f = lambda a: metrics.fast_nuclear_norm(a, 36)  # noqa: E731
    g = lambda a: fast_nuclear_grad(a, 36)  # noqa: E731
    assert finite_diff_check(f, g, A, 1e-6, 50, 0, mask=mask).max_rel_error < 1e-7


@pytest.mark.parametrize("seed", range(10))
def test_nuclear_grad_diag_dominant_6x4(seed):
    A, _ = gap_filtered_matrix(np.random.default_rng(seed), 6, 4)
    rep = finite_diff_check(metrics.nuclear_norm, nuclear_grad, A, 1e-5, 24, seed, scale_step=False)
    assert rep.max_rel_error < 1e-5


@settings(max_examples=60, deadline=None)
@given(logit_matrices, st.floats(0.2, 20))
def test_nuclear_subgradient_properties(z, scale):
    A = softmax(scale * z).values
    G = nuclear_grad(A)
    assert np.linalg.norm(G, 2) <= 1 + 1e-8
    assert np.sum(G * A) == pytest.approx(metrics.nuclear_norm(A), rel=1e-8)


@given(logit_matrices)
def test_frobenius_grad_unit_norm(z):
    assert np.linalg.norm(frobenius_grad(softmax(z))) == pytest.approx(1.0, abs=1e-12)


def test_gradient_check_report_fields():
    rep = gradients.GradientCheckReport(1e-9, 1e-10, 3, 1e-6)
    assert rep.probe_count >= 1 and rep.step > 0
