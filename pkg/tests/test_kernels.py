import math

import numpy as np
import pytest

from conftest import random_nodes
from sphquad.geometry import NodeSet
from sphquad.kernels import (
    G1,
    G2,
    KERNELS,
    KernelOperator,
    SurfaceSplineKernel,
    TargetKernel,
    UnisolvencyError,
    get_kernel,
    kernel_integral_constant,
    kernel_matrix,
    pi_integrals,
    pi_legendre_part,
    pi_matrix,
    tps_legendre_coeff,
)
from sphquad.special import integrate_graded, legendre_coefficient, legendre_P

R2 = KERNELS["tps-m2"]
L1 = KERNELS["tps-m2-log1mt"]
LN2 = math.log(2.0)


def test_kernel_values():
    assert L1(-1.0) == pytest.approx(2 * LN2, abs=1e-15)
    assert L1(1.0) == 0.0 and R2(1.0) == 0.0
    assert R2(0.0) == pytest.approx(LN2, abs=1e-16)
    assert L1(1.0 - 1e-16) == 0.0
    with pytest.raises(ValueError):
        L1(1.0 + 1e-9)


def test_kernel_vectorized_paths_agree():
    t = np.linspace(-1, 1, 500)
    small = np.array([L1(v) for v in t[:50]])
    assert np.allclose(L1(t)[:50], small, rtol=1e-15, atol=0)


def test_kernel_construction_errors():
    with pytest.raises(ValueError):
        SurfaceSplineKernel(1)
    with pytest.raises(ValueError):
        SurfaceSplineKernel(3, "r2logr")
    with pytest.raises(ValueError):
        get_kernel("gaussian")


def test_higher_order_kernel_form():
    K = SurfaceSplineKernel(3, "log1mt")
    assert K.s == 2 and K.pi_degree == 2
    t = 0.2
    assert K(t) == pytest.approx(-(1 - t) ** 2 * math.log(1 - t))


def test_kernel_matrix_antipodal_pair():
    A = kernel_matrix(L1, NodeSet([[0, 0, 1.0], [0, 0, -1.0]]))
    assert np.array_equal(np.diag(A), [0.0, 0.0])
    assert A[0, 1] == pytest.approx(2 * LN2, abs=1e-15) and A[0, 1] == A[1, 0]


def test_kernel_matrix_symmetric_and_variant_difference():
    X = random_nodes(60, seed=1)
    A1, A2 = kernel_matrix(L1, X), kernel_matrix(R2, X)
    assert np.array_equal(A1, A1.T)
    G = X.points @ X.points.T
    diff = A2 - A1
    off = ~np.eye(60, dtype=bool)
    assert np.allclose(diff[off], (LN2 * (1 - G))[off], atol=1e-14)


@pytest.mark.parametrize("N", [20, 50, 100])
def test_conditional_positive_definiteness(N, rng):
    X = random_nodes(N, seed=N)
    A = kernel_matrix(L1, X)
    Psi = pi_matrix(X)
    Q, _ = np.linalg.qr(Psi, mode="complete")
    basis = Q[:, 4:]
    for _ in range(100):
        a = basis @ rng.standard_normal(N - 4)
        assert a @ A @ a > 0


def test_pi_matrix(tetrahedron):
    assert np.linalg.matrix_rank(pi_matrix(tetrahedron)) == 4
    X = random_nodes(30, seed=5)
    Psi = pi_matrix(X)
    assert np.allclose(Psi.sum(axis=0) / 30, np.r_[1.0, X.points.mean(axis=0)])
    theta = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    eq = NodeSet(np.column_stack((np.cos(theta), np.sin(theta), np.zeros(12))))
    with pytest.raises(UnisolvencyError, match="not unisolvent"):
        pi_matrix(eq)


def test_pi_integrals():
    assert np.array_equal(pi_integrals(1), [4 * math.pi, 0, 0, 0])
    assert pi_integrals(2).shape == (9,)


def test_integral_constants():
    assert kernel_integral_constant(R2) == pytest.approx(11.1375034152492305670802244193, rel=1e-15)
    assert kernel_integral_constant(L1) == pytest.approx(2.42715905403482204507746882639, rel=1e-15)
    for K in (R2, L1):
        assert kernel_integral_constant(K, numeric=True) == pytest.approx(kernel_integral_constant(K), abs=1e-10)


def test_tps_coefficients():
    assert tps_legendre_coeff(L1, 2) == pytest.approx(math.pi / 3, rel=1e-14)
    assert tps_legendre_coeff(L1, 3) == pytest.approx(math.pi / 15, rel=1e-14)
    with pytest.raises(ValueError):
        tps_legendre_coeff(L1, 1)


@pytest.mark.parametrize("j", range(2, 11))
def test_measured_coefficients_match_closed_form(j):
    a = legendre_coefficient(L1, j)
    assert a * 2 / (2 * j + 1) == pytest.approx(tps_legendre_coeff(L1, j) / (2 * math.pi), abs=1e-9)


def test_coefficient_decay_ratio_constant():
    r = [legendre_coefficient(L1, j) * (j - 1) * j * (j + 1) * (j + 2) / (2 * j + 1) for j in range(2, 13)]
    assert np.ptp(r) / abs(np.mean(r)) < 1e-8


def test_cubic_kernel_coefficients_by_quadrature():
    K = SurfaceSplineKernel(3, "log1mt")
    for j in (3, 4, 7):
        measured = integrate_graded(lambda t: K(t) * legendre_P(j, t))
        assert measured == pytest.approx(tps_legendre_coeff(K, j) / (2 * math.pi), rel=1e-9)


def test_target_kernels():
    assert G2(1.0) == pytest.approx(15.0, rel=1e-14)
    assert G2.coeff(0) == 1.0
    assert G1.coeff(0) == pytest.approx(-4 * math.sqrt(2) / 5, rel=1e-14)
    assert G1(1.0) == 0.0
    with pytest.raises(ValueError):
        TargetKernel("poisson", 1.0)
    with pytest.raises(ValueError):
        G1.coeff(-1)


@pytest.mark.parametrize("g,l", [(G1, 0), (G1, 3), (G1, 20), (G2, 5), (G2, 20)])
def test_target_coefficients_by_quadrature(g, l):
    assert legendre_coefficient(g, l) == pytest.approx(g.coeff(l), rel=1e-9, abs=1e-12)


def test_g1_coefficient_degree_20_frozen():
    # 30-digit quadrature value
    assert G1.coeff(20) == pytest.approx(0.00564231132388657850566374956413, rel=1e-13)


def test_g1_coefficients_large_degree_finite():
    c = np.array([G1.coeff(l) for l in range(65)])
    assert np.all(np.isfinite(c)) and np.all(c[1:] > 0)


def test_pi_legendre_part_closed_form():
    a0, a1 = pi_legendre_part(L1)
    assert a0 == pytest.approx(LN2 - 0.5, abs=1e-12)
    assert a1 == pytest.approx(-LN2 - 1 / 6, abs=1e-12)
    b0, b1 = pi_legendre_part(R2)
    assert (b0 - a0, b1 - a1) == pytest.approx((LN2, -LN2), abs=1e-12)


@pytest.mark.parametrize("K", [R2, L1])
def test_operator_paths_agree(K, rng):
    X = random_nodes(300, seed=9)
    v = rng.standard_normal(300)
    A = kernel_matrix(K, X)
    for deflate in (False, True):
        dense = KernelOperator(K, X, deflate=deflate)
        lazy = KernelOperator(K, X, max_bytes=0, deflate=deflate)
        assert dense.dense and not lazy.dense
        assert np.allclose(dense @ v, lazy @ v, rtol=0, atol=1e-12)
    lazy = KernelOperator(K, X, max_bytes=0)
    assert np.allclose(lazy @ v, A @ v, atol=1e-12)
    assert lazy.count == 1
