"""Restricted surface-spline kernels, the auxiliary space Pi, and target kernels."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.special import gammaln, gammasgn

from .geometry import as_points
from .special import _check_domain, integrate_graded, sph_harm_degree

LN2 = math.log(2.0)

# t within this distance of 1 is treated as the t = 1 limit
_ONE_TOL = 1e-15


class UnisolvencyError(ValueError):
    pass


@numba.njit(cache=True)
def _phi_m2(u, out, variant_r2):
    ln2 = math.log(2.0)
    for i in range(u.shape[0]):
        ui = u[i]
        if ui > _ONE_TOL:
            out[i] = ui * (math.log(ui) + ln2) if variant_r2 else ui * math.log(ui)
        else:
            out[i] = 0.0


@dataclass(frozen=True)
class SurfaceSplineKernel:
    """Phi(t) = (-1)^(s+1) (1-t)^s log(1-t) on S^2, s = m - 1.

    ``variant='r2logr'`` (m = 2 only) is the Euclidean r^2 log r restricted
    to the sphere, (1-t) log(2-2t); it differs from the ``log1mt`` form by
    ln2 (1-t), a member of Pi, and so yields the same quadrature weights.
    """

    m: int = 2
    variant: str = "r2logr"

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"smoothness order m must be >= 2, got {self.m}")
        if self.variant not in ("log1mt", "r2logr"):
            raise ValueError(f"unknown kernel variant {self.variant!r}")
        if self.variant == "r2logr" and self.m != 2:
            raise ValueError("the r2logr variant is defined for m = 2 only")

    @property
    def s(self):
        return self.m - 1

    @property
    def name(self):
        return "tps-m2" if (self.m, self.variant) == (2, "r2logr") else f"tps-m{self.m}-{self.variant}"

    @property
    def pi_degree(self):
        # the kernel is conditionally positive definite w.r.t. harmonics of degree <= s
        return self.s

    def of_u(self, u):
        """Phi as a function of u = 1 - t >= 0 (u = |x - y|^2 / 2 on the sphere)."""
        u = np.asarray(u, dtype=float)
        if self.m == 2 and u.size > 64:
            out = np.empty_like(u)
            _phi_m2(u.ravel(), out.reshape(-1), self.variant == "r2logr")
            return out
        safe = np.where(u > _ONE_TOL, u, 1.0)
        s = self.s
        if self.variant == "log1mt":
            val = (-1.0) ** (s + 1) * safe**s * np.log(safe)
        else:
            val = safe * (np.log(safe) + LN2)
        return np.where(u > _ONE_TOL, val, 0.0)

    def __call__(self, t):
        t = _check_domain(t)
        out = self.of_u(1.0 - t)
        return out if out.ndim else float(out)


KERNELS = {
    "tps-m2": SurfaceSplineKernel(2, "r2logr"),
    "tps-m2-log1mt": SurfaceSplineKernel(2, "log1mt"),
}


def get_kernel(name):
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; choose from {sorted(KERNELS)}") from None


def kernel_eval(K, t):
    return K(t)


def pairwise_u(P, Q=None):
    """Matrix of u = 1 - p.q, clipped to [0, 2]."""
    P = np.asarray(P)
    Q = P if Q is None else np.asarray(Q)
    U = P @ Q.T
    np.subtract(1.0, U, out=U)
    return np.clip(U, 0.0, 2.0, out=U)


@numba.njit(cache=True)
def _tps_dense_sym(X, variant_r2, a0, a1):
    """Dense m = 2 kernel matrix of Phi(t) - a0 - a1 t from the upper triangle."""
    N = X.shape[0]
    A = np.empty((N, N))
    ln2 = math.log(2.0)
    for i in range(N):
        A[i, i] = -a0 - a1
        for j in range(i + 1, N):
            t = X[i, 0] * X[j, 0] + X[i, 1] * X[j, 1] + X[i, 2] * X[j, 2]
            u = min(max(1.0 - t, 0.0), 2.0)
            f = 0.0
            if u > _ONE_TOL:
                f = u * (math.log(u) + ln2) if variant_r2 else u * math.log(u)
            f -= a0 + a1 * t
            A[i, j] = f
            A[j, i] = f
    return A


def kernel_matrix(K, X, Y=None):
    """A_ij = Phi(x_i . y_j); with Y omitted the result is exactly symmetric."""
    P = as_points(X)
    if Y is not None:
        return K.of_u(pairwise_u(P, as_points(Y)))
    if K.m == 2:
        return _tps_dense_sym(np.ascontiguousarray(P), K.variant == "r2logr", 0.0, 0.0)
    U = pairwise_u(P)
    A = K.of_u(U)
    A = np.triu(A, 1)
    A = A + A.T
    return A


def pi_matrix(X, degree=1, check=True):
    """N x dim(Pi) matrix of the basis {1, x, y, z} (plus orthonormal
    harmonics of degree 2..degree when degree > 1)."""
    P = as_points(X)
    cols = [np.ones(len(P)), P[:, 0], P[:, 1], P[:, 2]]
    Psi = np.column_stack(cols)
    if degree > 1:
        Psi = np.hstack([Psi] + [sph_harm_degree(l, P) for l in range(2, degree + 1)])
    if check:
        rank = np.linalg.matrix_rank(Psi)
        if rank < Psi.shape[1]:
            raise UnisolvencyError(f"Pi not unisolvent on X (rank {rank} < {Psi.shape[1]})")
    return Psi


def pi_integrals(degree=1):
    """Integrals over S^2 of the columns of pi_matrix: (4 pi, 0, 0, ...)."""
    J = np.zeros(4 + sum(2 * l + 1 for l in range(2, degree + 1)))
    J[0] = 4.0 * math.pi
    return J


def kernel_integral_constant(K, numeric=False):
    """J0 = 2 pi * integral of Phi over [-1, 1]: the (y-independent) sphere integral of Phi(x . y)."""
    if not numeric and K.m == 2:
        if K.variant == "r2logr":
            return 2.0 * math.pi * (4.0 * LN2 - 1.0)
        return 2.0 * math.pi * (2.0 * LN2 - 1.0)
    return 2.0 * math.pi * integrate_graded(lambda t: K.of_u(1.0 - t))


def tps_legendre_coeff(K, j):
    """Addition-theorem coefficient kappa_j = C_s Gamma(j-s)/Gamma(j+s+2), j > s.

    C_s = 2^(s+2) pi Gamma(s+1)^2 on S^2; for m = 2 this is 8 pi / ((j-1) j (j+1) (j+2)).
    """
    s = K.s
    if j <= s:
        raise ValueError(f"coefficient undefined (arbitrary) for j <= s = {s}")
    logc = (s + 2) * LN2 + math.log(math.pi) + 2.0 * math.lgamma(s + 1)
    return math.exp(logc + math.lgamma(j - s) - math.lgamma(j + s + 2))


@dataclass(frozen=True)
class TargetKernel:
    """Zonal test kernel g(t) with closed-form Legendre coefficients a_l."""

    kind: str
    eps: float = 2.0 / 3.0

    def __post_init__(self):
        if self.kind not in ("potential", "poisson"):
            raise ValueError(f"unknown target kernel {self.kind!r}")
        if self.kind == "poisson" and not 0.0 < self.eps < 1.0:
            raise ValueError(f"Poisson parameter must lie in (0, 1), got {self.eps}")

    @property
    def smoothness(self):
        return "W2^mu, mu < 5/2" if self.kind == "potential" else "analytic"

    def __call__(self, t):
        t = _check_domain(t)
        if self.kind == "potential":
            out = -np.power(np.maximum(2.0 - 2.0 * t, 0.0), 0.25)
        else:
            e = self.eps
            out = (1.0 - e * e) / np.power(1.0 + e * e - 2.0 * e * t, 1.5)
        return out if out.ndim else float(out)

    def coeff(self, l):
        if l < 0:
            raise ValueError("degree must be nonnegative")
        if self.kind == "poisson":
            return (2 * l + 1) * self.eps**l
        # (-1)^(l+1) sqrt2 Gamma(5/4)^2 (2l+1) / (Gamma(5/4 - l) Gamma(9/4 + l)), via log-Gamma
        sign = (-1.0) ** (l + 1) * gammasgn(1.25 - l)
        logmag = 0.5 * LN2 + 2.0 * gammaln(1.25) + math.log(2 * l + 1) - gammaln(1.25 - l) - gammaln(2.25 + l)
        return float(sign * math.exp(logmag))


G1 = TargetKernel("potential")
G2 = TargetKernel("poisson", 2.0 / 3.0)


def target_kernel_eval(g, t):
    return g(t)


def target_kernel_coeff(g, l):
    return g.coeff(l)


def pi_legendre_part(K):
    """(a0, a1): degree-0 and degree-1 Legendre coefficients of Phi.

    Phi(t) - a0 - a1 t differs from Phi by a member of Pi in each
    argument, so it leaves P A P (P projecting out range(Psi)) unchanged
    while removing the dominant near-rank-4 part of A.
    """
    a0 = 0.5 * integrate_graded(lambda t: K.of_u(1.0 - t))
    a1 = 1.5 * integrate_graded(lambda t: K.of_u(1.0 - t) * t)
    return a0, a1


@numba.njit(cache=True)
def _tps_matvec_sym(X, v, variant_r2, a0, a1):
    """y = A v for the m = 2 kernel Phi(t) - a0 - a1 t, without storing A.

    Visits the upper triangle once and mirrors it.
    """
    N = X.shape[0]
    y = np.zeros(N)
    ln2 = math.log(2.0)
    diag = -a0 - a1
    for i in range(N):
        xi0 = X[i, 0]
        xi1 = X[i, 1]
        xi2 = X[i, 2]
        vi = v[i]
        acc = 0.0
        for j in range(i + 1, N):
            d0 = xi0 - X[j, 0]
            d1 = xi1 - X[j, 1]
            d2 = xi2 - X[j, 2]
            u = 0.5 * (d0 * d0 + d1 * d1 + d2 * d2)
            f = 0.0
            if u > 1e-15:
                if variant_r2:
                    f = u * (math.log(u) + ln2)
                else:
                    f = u * math.log(u)
            f -= a0 + a1 * (1.0 - u)
            acc += f * v[j]
            y[j] += f * vi
        y[i] += acc + diag * vi
    return y


class KernelOperator:
    """Matrix-vector products with the N x N kernel matrix.

    The matrix is stored densely when it fits under ``max_bytes``;
    otherwise (m = 2 only) entries are recomputed on every product,
    O(N^2) time and O(N) memory. With ``deflate=True`` the operator is
    that of Phi(t) - a0 - a1 t (see :func:`pi_legendre_part`).
    """

    def __init__(self, K, X, max_bytes=3e8, deflate=False):
        self.K = K
        self.points = np.ascontiguousarray(as_points(X))
        N = len(self.points)
        self.shape = (N, N)
        self.a0, self.a1 = pi_legendre_part(K) if deflate else (0.0, 0.0)
        self.dense = 8.0 * N * N <= max_bytes or K.m != 2
        self.matrix = None
        if self.dense:
            if K.m == 2:
                A = _tps_dense_sym(self.points, K.variant == "r2logr", self.a0, self.a1)
            else:
                A = kernel_matrix(K, self.points)
                if deflate:
                    A -= self.a0
                    A -= self.a1 * (self.points @ self.points.T)
            self.matrix = A
        self.count = 0

    def __matmul__(self, v):
        return self.matvec(v)

    def matvec(self, v):
        self.count += 1
        v = np.asarray(v, dtype=float)
        if self.dense:
            return self.matrix @ v
        return _tps_matvec_sym(self.points, np.ascontiguousarray(v), self.K.variant == "r2logr", self.a0, self.a1)
