"""Finite polynomial test-function family with exact gradients.

Constraint sets that quantify over all continuously differentiable test
functions are truncated to the span of multivariate monomials of total degree
1..d, evaluated in affinely prescaled coordinates (the region's bounding box
mapped onto [-1, 1]^m) for conditioning.  The constant function is excluded:
its flow and initial-coupling rows are identically zero.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .system import StateRegion


class BasisError(ValueError):
    pass


@dataclass(frozen=True)
class BasisSpec:
    """Monomial family in scaled coordinates s = (y - center) / halfwidth."""

    dim: int
    max_degree: int
    exponents: tuple[tuple[int, ...], ...]
    scale_center: tuple[float, ...]
    scale_half: tuple[float, ...]

    @property
    def count(self) -> int:
        return len(self.exponents)

    def scale(self, ys: np.ndarray) -> np.ndarray:
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        return (ys - np.asarray(self.scale_center)) / np.asarray(self.scale_half)


def _graded_lex_exponents(m: int, d: int) -> tuple[tuple[int, ...], ...]:
    exps = [alpha for alpha in itertools.product(range(d + 1), repeat=m)
            if 1 <= sum(alpha) <= d]
    exps.sort(key=lambda alpha: (sum(alpha), tuple(-a for a in alpha)))
    return tuple(exps)


def enumerate_basis(m: int, d: int, lower=None, upper=None) -> BasisSpec:
    """All monomial exponents with 1 <= |alpha| <= d in graded-lex order.

    Without a bounding box the scaling is the identity.  The family size is
    C(m + d, d) - 1.
    """
    if m < 1 or d < 1:
        raise BasisError("state dimension and max_degree must both be >= 1")
    if lower is None:
        center = tuple(0.0 for _ in range(m))
        half = tuple(1.0 for _ in range(m))
    else:
        lo = np.asarray(lower, dtype=float)
        hi = np.asarray(upper, dtype=float)
        if lo.shape != (m,) or hi.shape != (m,) or np.any(hi <= lo):
            raise BasisError("bounding box must satisfy lower < upper componentwise")
        center = tuple(((lo + hi) / 2.0).tolist())
        half = tuple(((hi - lo) / 2.0).tolist())
    basis = BasisSpec(dim=m, max_degree=d,
                      exponents=_graded_lex_exponents(m, d),
                      scale_center=center, scale_half=half)
    assert basis.count == math.comb(m + d, d) - 1
    return basis


def basis_for_region(region: StateRegion, d: int) -> BasisSpec:
    lo, hi = region.bounding_box()
    return enumerate_basis(region.dim, d, lower=lo, upper=hi)


def phi_matrix(basis: BasisSpec, ys: np.ndarray) -> np.ndarray:
    """Values of every basis element at row-stacked points, shape (count, n)."""
    s = basis.scale(ys)  # (n, m)
    n = s.shape[0]
    # s[:, j] ** e for e = 0..d, per axis
    powers = np.ones((basis.dim, basis.max_degree + 1, n))
    for j in range(basis.dim):
        for e in range(1, basis.max_degree + 1):
            powers[j, e] = powers[j, e - 1] * s[:, j]
    out = np.empty((basis.count, n))
    for b, alpha in enumerate(basis.exponents):
        acc = np.ones(n)
        for j, e in enumerate(alpha):
            if e:
                acc = acc * powers[j, e]
        out[b] = acc
    return out


def grad_matrix(basis: BasisSpec, ys: np.ndarray) -> np.ndarray:
    """Gradients w.r.t. unscaled coordinates, shape (count, n, m)."""
    s = basis.scale(ys)
    n = s.shape[0]
    powers = np.ones((basis.dim, basis.max_degree + 1, n))
    for j in range(basis.dim):
        for e in range(1, basis.max_degree + 1):
            powers[j, e] = powers[j, e - 1] * s[:, j]
    half = np.asarray(basis.scale_half)
    out = np.zeros((basis.count, n, basis.dim))
    for b, alpha in enumerate(basis.exponents):
        for j, e in enumerate(alpha):
            if e == 0:
                continue
            acc = np.full(n, e / half[j])  # chain-rule factor of the prescaling
            for i, ei in enumerate(alpha):
                if i == j:
                    acc = acc * powers[i, ei - 1]
                elif ei:
                    acc = acc * powers[i, ei]
            out[b, :, j] = acc
    return out


def eval_phi(basis: BasisSpec, index: int, y) -> float:
    if not 0 <= index < basis.count:
        raise BasisError(f"basis index {index} out of range [0, {basis.count})")
    return float(phi_matrix(basis, np.atleast_2d(y))[index, 0])


def eval_grad_phi(basis: BasisSpec, index: int, y) -> np.ndarray:
    if not 0 <= index < basis.count:
        raise BasisError(f"basis index {index} out of range [0, {basis.count})")
    return grad_matrix(basis, np.atleast_2d(y))[index, 0]


def sup_norms(basis: BasisSpec, sample_points: np.ndarray) -> np.ndarray:
    """Per-element sup |phi| over the given sample, used for normalisation."""
    return np.max(np.abs(phi_matrix(basis, sample_points)), axis=1)


def combination_coefficients(basis: BasisSpec, target_fn, sample_points: np.ndarray):
    """Least-squares coefficients c (and constant) with sum c_b phi_b + const ~= target.

    Exact (residual at rounding level) whenever the target lies in the span of
    the basis plus constants; used to express distinguished polynomials, e.g.
    powers of a first integral, as row combinations.
    """
    values = phi_matrix(basis, sample_points)  # (count, n)
    design = np.vstack([values, np.ones((1, values.shape[1]))]).T
    target = np.asarray([target_fn(y) for y in np.atleast_2d(sample_points)], dtype=float)
    coeffs, *_ = np.linalg.lstsq(design, target, rcond=None)
    residual = float(np.max(np.abs(design @ coeffs - target)))
    return coeffs[:-1], float(coeffs[-1]), residual
