import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from occlp import basis as basis_mod
from occlp.basis import (BasisError, basis_for_region, enumerate_basis,
                         eval_grad_phi, eval_phi, grad_matrix, phi_matrix)
from occlp.system import StateRegion


def test_linear_basis_ordering():
    b = enumerate_basis(2, 1)
    assert b.exponents == ((1, 0), (0, 1))
    assert b.count == 2


@pytest.mark.parametrize("m,d,count", [(2, 2, 5), (3, 3, 19), (2, 4, 14), (1, 4, 4)])
def test_counts(m, d, count):
    b = enumerate_basis(m, d)
    assert b.count == count == math.comb(m + d, d) - 1
    assert len(set(b.exponents)) == b.count  # duplicate-free


def test_graded_lex_order_is_deterministic():
    b1 = enumerate_basis(2, 3)
    b2 = enumerate_basis(2, 3)
    assert b1.exponents == b2.exponents
    degrees = [sum(a) for a in b1.exponents]
    assert degrees == sorted(degrees)
    assert b1.exponents[:2] == ((1, 0), (0, 1))
    assert b1.exponents[2:5] == ((2, 0), (1, 1), (0, 2))


def test_invalid_sizes():
    with pytest.raises(BasisError):
        enumerate_basis(0, 2)
    with pytest.raises(BasisError):
        enumerate_basis(2, 0)
    with pytest.raises(BasisError):
        enumerate_basis(2, 2, lower=(0.0, 0.0), upper=(0.0, 1.0))


def test_eval_identity_scaling_examples():
    b = enumerate_basis(2, 3)
    idx = b.exponents.index((1, 1))
    assert eval_phi(b, idx, (1.0, 2.0)) == 2.0
    assert np.allclose(eval_grad_phi(b, idx, (1.0, 2.0)), (2.0, 1.0))

    idx = b.exponents.index((2, 0))
    assert eval_phi(b, idx, (0.0, 5.0)) == 0.0
    assert np.allclose(eval_grad_phi(b, idx, (0.0, 5.0)), (0.0, 0.0))

    idx = b.exponents.index((2, 1))
    assert eval_phi(b, idx, (2.0, 3.0)) == 12.0
    assert np.allclose(eval_grad_phi(b, idx, (2.0, 3.0)), (12.0, 4.0))


def test_index_out_of_range():
    b = enumerate_basis(2, 2)
    with pytest.raises(BasisError):
        eval_phi(b, b.count, (0.0, 0.0))
    with pytest.raises(BasisError):
        eval_grad_phi(b, -1, (0.0, 0.0))


def test_gradients_match_finite_differences_everywhere():
    region = StateRegion(kind="annulus", inner=0.5, outer=1.5)
    b = basis_for_region(region, 4)
    rng = np.random.default_rng(0)
    points = rng.uniform(-1.5, 1.5, size=(100, 2))
    grads = grad_matrix(b, points)
    h = 1e-5
    for j in range(2):
        shift = np.zeros(2)
        shift[j] = h
        numeric = (phi_matrix(b, points + shift) - phi_matrix(b, points - shift)) / (2 * h)
        scale = np.maximum(np.abs(grads[:, :, j]), 1.0)
        assert np.max(np.abs(grads[:, :, j] - numeric) / scale) <= 1e-6


def test_scaling_uses_region_bounding_box():
    region = StateRegion(kind="box", lower=(0.0, -2.0), upper=(4.0, 2.0))
    b = basis_for_region(region, 2)
    assert b.scale_center == (2.0, 0.0)
    assert b.scale_half == (2.0, 2.0)
    # at the box corner every scaled coordinate is 1
    idx = b.exponents.index((1, 1))
    assert eval_phi(b, idx, (4.0, 2.0)) == 1.0
    # gradient carries the chain-rule factor 1 / halfwidth
    idx = b.exponents.index((1, 0))
    assert np.allclose(eval_grad_phi(b, idx, (1.0, 0.0)), (0.5, 0.0))


def test_constant_function_rows_vanish():
    # a constant test function contributes nothing: zero gradient kills the
    # flow row and phi(y0) - phi(y) kills the coupling row
    y0 = np.array([0.3, -0.2])
    points = np.random.default_rng(1).uniform(-1, 1, size=(50, 2))
    const = lambda y: 7.5
    flow_row = [0.0 * const(y) for y in points]  # grad of a constant is zero
    coupling_row = [const(y0) - const(y) for y in points]
    assert np.all(np.asarray(flow_row) == 0.0)
    assert np.all(np.asarray(coupling_row) == 0.0)


@given(st.integers(min_value=1, max_value=4), st.integers(min_value=1, max_value=5))
@settings(max_examples=20, deadline=None)
def test_count_identity_property(m, d):
    assert enumerate_basis(m, d).count == math.comb(m + d, d) - 1


def test_combination_coefficients_reconstruct_radial_polynomial():
    region = StateRegion(kind="annulus", inner=0.5, outer=1.5)
    b = basis_for_region(region, 4)
    sample = region.sample(12)
    target = lambda y: (y[0] ** 2 + y[1] ** 2 - 1.0) ** 2
    coeffs, const, residual = basis_mod.combination_coefficients(b, target, sample)
    assert residual <= 1e-10
    probe = np.array([[1.3, -0.4], [0.5, 0.5], [-1.1, 0.2]])
    values = coeffs @ phi_matrix(b, probe) + const
    expected = [target(y) for y in probe]
    assert np.allclose(values, expected, atol=1e-10)
