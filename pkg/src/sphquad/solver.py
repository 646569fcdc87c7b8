"""Quadrature weights for the restricted surface spline.

The weights c and auxiliary coefficients d solve the saddle-point system

    A c + Psi d = J0 * 1,    Psi^T c = J,

with A the kernel matrix, Psi the Pi-basis matrix and J the integrals of
the Pi basis. Two routes are provided: a dense symmetric-indefinite
factorization of the (N + dim Pi) system, and GMRES on the projected
system P A P c_perp = -P A c_par (P the projector onto the complement of
range(Psi)), preconditioned with local Lagrange functions.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .geometry import as_points, neighbor_table
from .kernels import KernelOperator, kernel_integral_constant, kernel_matrix, pi_integrals, pi_matrix
from .krylov import gmres

log = logging.getLogger(__name__)


class SingularSystemError(np.linalg.LinAlgError):
    pass


def default_neighbors(N):
    """p = 2 * ceil((ln N)^2), capped at N."""
    return min(N, 2 * math.ceil(math.log(N) ** 2))


@dataclass
class SolverConfig:
    method: str = "gmres"
    tol: float = 1e-12
    max_iter: int = 200
    neighbors: int | None = None
    dense_limit: int = 20000

    def __post_init__(self):
        if self.method not in ("direct", "gmres"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def neighbors_for(self, N):
        p = default_neighbors(N) if self.neighbors is None else self.neighbors
        if p > N:
            raise ValueError(f"neighbor count p={p} exceeds N={N}")
        return p


@dataclass
class WeightSolution:
    c: np.ndarray
    d: np.ndarray
    c_par: np.ndarray
    c_perp: np.ndarray
    method: str
    kernel: str
    iterations: int = 0
    residual: float = float("nan")
    constraint_residual: float = float("nan")
    converged: bool = True
    history: list = field(default_factory=list)
    neighbors: int | None = None
    tol: float | None = None

    @property
    def N(self):
        return len(self.c)


class ComplementProjector:
    """P v = v - Q Q^T v with Q an orthonormal basis of range(Psi)."""

    def __init__(self, Psi):
        self.Psi = np.asarray(Psi, dtype=float)
        self.Q, self.R = np.linalg.qr(self.Psi)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        return v - self.Q @ (self.Q.T @ v)

    def parallel_weights(self, J):
        """Psi (Psi^T Psi)^{-1} J = Q R^{-T} J."""
        return self.Q @ sla.solve_triangular(self.R, J, trans="T")

    def least_squares(self, v):
        """argmin_d ||Psi d - v||."""
        return sla.solve_triangular(self.R, self.Q.T @ v)


def project_complement(Psi, v):
    return ComplementProjector(Psi)(v)


def _pi_degree(K):
    return K.pi_degree


def saddle_matrix(K, X):
    P = as_points(X)
    A = kernel_matrix(K, P)
    Psi = pi_matrix(P, _pi_degree(K))
    k = Psi.shape[1]
    M = np.zeros((len(P) + k, len(P) + k))
    M[: len(P), : len(P)] = A
    M[: len(P), len(P) :] = Psi
    M[len(P) :, : len(P)] = Psi.T
    return M, A, Psi


def _finish(K, A_c, c, Psi, proj, J, J0):
    """Recover d from Psi d = J0 1 - A c and the saddle-system residuals."""
    rhs = J0 * np.ones(len(c))
    d = proj.least_squares(rhs - A_c)
    res = np.linalg.norm(A_c + Psi @ d - rhs) / np.linalg.norm(rhs)
    cres = float(np.abs(Psi.T @ c - J).max())
    return d, float(res), cres


def solve_direct(K, X, config=None):
    """Dense LDL^T solve of the full saddle-point system."""
    config = config or SolverConfig(method="direct")
    P = as_points(X)
    N = len(P)
    if N > config.dense_limit:
        raise ValueError(f"N={N} exceeds the dense limit {config.dense_limit}; use the gmres method")
    M, A, Psi = saddle_matrix(K, P)
    J = pi_integrals(_pi_degree(K))
    J0 = kernel_integral_constant(K)
    rhs = np.concatenate((J0 * np.ones(N), J))
    with warnings.catch_warnings():
        warnings.simplefilter("error", sla.LinAlgWarning)
        try:
            sol = sla.solve(M, rhs, assume_a="sym", overwrite_a=True, check_finite=False)
        except (np.linalg.LinAlgError, sla.LinAlgWarning) as exc:
            raise SingularSystemError(
                "system singular (duplicate nodes or non-unisolvent Pi)"
            ) from exc
    c = sol[:N]
    proj = ComplementProjector(Psi)
    c_par = proj.parallel_weights(J)
    c_perp = c - c_par
    d, res, cres = _finish(K, A @ c, c, Psi, proj, J, J0)
    return WeightSolution(
        c=c, d=d, c_par=c_par, c_perp=c_perp, method="direct", kernel=K.name,
        residual=res, constraint_residual=cres,
    )


@dataclass
class LocalLagrangePreconditioner:
    """Column i holds the kernel coefficients of the cardinal interpolant
    centered at node i on its p nearest neighbors."""

    matrix: sp.csc_matrix
    neighbors: np.ndarray

    @property
    def p(self):
        return self.neighbors.shape[1]

    def __matmul__(self, v):
        return self.matrix @ v


def _local_systems(K, P, nb, degree):
    """Batched (B, p + k, p + k) local saddle matrices for neighbor lists nb."""
    B, p = nb.shape
    loc = P[nb]
    U = 1.0 - loc @ np.swapaxes(loc, 1, 2)
    np.clip(U, 0.0, 2.0, out=U)
    Aloc = K.of_u(U)
    idx = np.arange(p)
    Aloc[:, idx, idx] = 0.0
    Psi = np.stack([pi_matrix(loc[b], degree, check=False) for b in range(B)]) if degree > 1 else (
        np.concatenate((np.ones((B, p, 1)), loc), axis=2)
    )
    k = Psi.shape[2]
    M = np.zeros((B, p + k, p + k))
    M[:, :p, :p] = Aloc
    M[:, :p, p:] = Psi
    M[:, p:, :p] = np.swapaxes(Psi, 1, 2)
    return M, Psi


def build_preconditioner(K, X, p, batch=256):
    """Local Lagrange preconditioner from p-point cardinal interpolants."""
    P = as_points(X)
    N = len(P)
    degree = _pi_degree(K)
    k = pi_integrals(degree).shape[0]
    if not k < p <= N:
        raise ValueError(f"need {k} < p <= N, got p={p}, N={N}")
    nb = neighbor_table(P, p, tree=cKDTree(P))
    data = np.empty((N, p))
    for start in range(0, N, batch):
        stop = min(N, start + batch)
        M, Psi = _local_systems(K, P, nb[start:stop], degree)
        rhs = np.zeros((stop - start, p + k, 1))
        # node i is first in its own neighbor list
        rhs[:, 0, 0] = 1.0
        try:
            sol = np.linalg.solve(M, rhs)[:, :, 0]
        except np.linalg.LinAlgError:
            for b in range(stop - start):
                try:
                    np.linalg.solve(M[b], rhs[b])
                except np.linalg.LinAlgError as exc:
                    raise SingularSystemError(f"singular local system at node {start + b}") from exc
            raise
        data[start:stop] = sol[:, :p]
    indptr = np.arange(0, N * p + 1, p)
    C = sp.csc_matrix((data.ravel(), nb.ravel(), indptr), shape=(N, N))
    return LocalLagrangePreconditioner(C, nb)


class _MemoOperator:
    """Wraps a KernelOperator and remembers the last product."""

    def __init__(self, op):
        self.op = op
        self.last_in = None
        self.last_out = None

    def __call__(self, v):
        out = self.op.matvec(v)
        self.last_in = np.array(v, copy=True)
        self.last_out = out
        return out

    def product(self, v):
        if self.last_in is not None and np.array_equal(v, self.last_in):
            return self.last_out
        return self(v)


def solve_iterative(K, X, config=None, preconditioner=None, operator=None):
    """GMRES on the projected system; the J0 term drops out because 1 lies in Pi."""
    config = config or SolverConfig()
    P = as_points(X)
    N = len(P)
    degree = _pi_degree(K)
    Psi = pi_matrix(P, degree)
    J = pi_integrals(degree)
    J0 = kernel_integral_constant(K)
    proj = ComplementProjector(Psi)
    c_par = proj.parallel_weights(J)

    # the deflated kernel gives the same P A P with far less amplification of
    # rounding-level components along range(Psi)
    op = _MemoOperator(operator if operator is not None else KernelOperator(K, P, deflate=True))
    A_cpar = op(c_par)
    b = -proj(A_cpar)

    p = config.neighbors_for(N)
    C = preconditioner if preconditioner is not None else build_preconditioner(K, P, p)

    def apply_op(v):
        return proj(op(proj(v)))

    def apply_precond(v):
        return proj(C @ proj(v))

    result = gmres(apply_op, b, apply_precond, tol=config.tol, max_iter=config.max_iter)
    if not result.converged:
        log.warning("GMRES stopped after %d iterations at relative residual %.3e",
                    result.iterations, result.residuals[-1])
    c_perp = proj(result.x)
    c = c_perp + c_par
    # undo the deflation: A c = A~ c + a0 (1^T c) 1 + a1 X (X^T c)
    kop = op.op
    A_c = A_cpar + op.product(proj(result.x))
    A_c = A_c + kop.a0 * c.sum() + kop.a1 * (P @ (P.T @ c))
    d, res, cres = _finish(K, A_c, c, Psi, proj, J, J0)
    return WeightSolution(
        c=c, d=d, c_par=c_par, c_perp=c_perp, method="gmres", kernel=K.name,
        iterations=result.iterations, residual=res, constraint_residual=cres,
        converged=result.converged, history=result.residuals, neighbors=C.p, tol=config.tol,
    )


def solve_weights(K, X, config=None):
    config = config or SolverConfig()
    if config.method == "direct":
        return solve_direct(K, X, config)
    return solve_iterative(K, X, config)
