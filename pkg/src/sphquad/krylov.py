"""Full (non-restarted) GMRES with right preconditioning."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular


@dataclass
class GMRESResult:
    x: np.ndarray
    iterations: int
    converged: bool
    residuals: list = field(default_factory=list)
    # ||b - A x|| / ||b|| recomputed from the returned iterate
    true_residual: float = float("nan")


def _givens(a, b):
    if b == 0.0:
        return 1.0, 0.0
    r = math.hypot(a, b)
    return a / r, b / r


def gmres(apply_op, b, apply_precond=None, tol=1e-12, max_iter=200, x0=None):
    """Solve A x = b with GMRES on A M y = b - A x0, x = x0 + M y.

    Arnoldi uses modified Gram-Schmidt; the Hessenberg least-squares
    problem is updated with Givens rotations, so the residual norm of each
    iterate is available without forming it. With right preconditioning
    that residual is the residual of the original system. Stops when it
    falls to ``tol * ||b||``; on hitting ``max_iter`` the last iterate is
    returned with ``converged=False``.

    The preconditioned vectors z_j = M v_j are kept and the iterate is
    assembled as x0 + Z y, so rounding in M never reaches the solution
    through a second application of M.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    M = apply_precond if apply_precond is not None else (lambda v: v)
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return GMRESResult(np.zeros(n), 0, True, [0.0], 0.0)
    r0 = b - apply_op(x0) if np.any(x0) else b.copy()
    beta = np.linalg.norm(r0)
    history = [beta / bnorm]
    if beta <= tol * bnorm:
        return GMRESResult(x0, 0, True, history, beta / bnorm)

    m = min(max_iter, n)
    V = np.zeros((m + 1, n))
    Z = np.zeros((m, n))
    H = np.zeros((m + 1, m))
    cs = np.zeros(m)
    sn = np.zeros(m)
    g = np.zeros(m + 1)
    g[0] = beta
    V[0] = r0 / beta
    k = 0
    converged = False
    for j in range(m):
        Z[j] = M(V[j])
        # copy: apply_op may hand back its argument
        w = np.array(apply_op(Z[j]), dtype=float)
        for i in range(j + 1):
            H[i, j] = np.dot(w, V[i])
            w -= H[i, j] * V[i]
        H[j + 1, j] = np.linalg.norm(w)
        breakdown = H[j + 1, j] <= 1e-14 * max(abs(H[j, j]), 1e-300)
        if not breakdown:
            V[j + 1] = w / H[j + 1, j]
        for i in range(j):
            hi = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = hi
        cs[j], sn[j] = _givens(H[j, j], H[j + 1, j])
        H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
        H[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        k = j + 1
        history.append(abs(g[j + 1]) / bnorm)
        if history[-1] <= tol:
            converged = True
            break
        if breakdown:
            break

    y = solve_triangular(H[:k, :k], g[:k]) if k else np.zeros(0)
    x = x0 + Z[:k].T @ y
    true_res = np.linalg.norm(b - apply_op(x)) / bnorm
    return GMRESResult(x, k, converged, history, float(true_res))
