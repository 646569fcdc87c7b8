"""Legendre polynomials, real spherical harmonics and Gauss-Legendre rules."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


class ConvergenceError(RuntimeError):
    pass


def _check_domain(t):
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0 + 1e-12):
        raise ValueError("argument outside [-1, 1]")
    return np.clip(t, -1.0, 1.0)


def legendre_P(l, t):
    """P_l(t) by the three-term recurrence; vectorized over t."""
    if l < 0:
        raise ValueError("degree must be nonnegative")
    t = _check_domain(t)
    p0 = np.ones_like(t)
    if l == 0:
        return p0 if p0.ndim else float(p0)
    p1 = t.copy()
    for k in range(1, l):
        p0, p1 = p1, ((2 * k + 1) * t * p1 - k * p0) / (k + 1)
    return p1 if p1.ndim else float(p1)


def legendre_all(lmax, t):
    """Array of shape (lmax + 1, *t.shape) with P_0 .. P_lmax."""
    t = _check_domain(t)
    out = np.empty((lmax + 1,) + t.shape)
    out[0] = 1.0
    if lmax >= 1:
        out[1] = t
    for k in range(1, lmax):
        out[k + 1] = ((2 * k + 1) * t * out[k] - k * out[k - 1]) / (k + 1)
    return out


def _reduced_assoc_legendre(l, z):
    """Orthonormal associated Legendre functions divided by sin(theta)^m.

    Returns an array (l + 1, npts) whose row m holds
    sqrt((2l+1)/(4pi) (l-m)!/(l+m)!) P_l^m(z) / (1-z^2)^(m/2), without
    the Condon-Shortley phase. Recurrence is upward in degree at fixed
    order, seeded from the diagonal m = l' terms.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty((l + 1,) + z.shape)
    pmm = np.full(z.shape, 1.0 / np.sqrt(4.0 * np.pi))
    for m in range(l + 1):
        if m > 0:
            pmm = pmm * np.sqrt((2 * m + 1) / (2.0 * m))
        if m == l:
            out[m] = pmm
            break
        p_prev = pmm
        p_cur = np.sqrt(2 * m + 3.0) * z * pmm
        for k in range(m + 2, l + 1):
            a = np.sqrt((4.0 * k * k - 1) / (k * k - m * m))
            b = np.sqrt(((k - 1.0) ** 2 - m * m) / (4.0 * (k - 1) ** 2 - 1))
            p_prev, p_cur = p_cur, a * (z * p_cur - b * p_prev)
        out[m] = p_cur
    return out


def sph_harm_degree(l, points):
    """All 2l+1 real orthonormal harmonics of degree l at the given points.

    Column k - 1 holds Y_{l,k} with signed order m = k - l - 1:
    m < 0 uses sin(|m| phi), m > 0 uses cos(m phi), scaled by sqrt(2).
    For l = 1 the columns are sqrt(3/(4pi)) * (y, z, x).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    red = _reduced_assoc_legendre(l, z)
    out = np.empty((len(pts), 2 * l + 1))
    out[:, l] = red[0]
    w = np.ones(len(pts), dtype=complex)
    xy = x + 1j * y
    for m in range(1, l + 1):
        # (x + iy)^m = sin(theta)^m e^{i m phi}
        w = w * xy
        out[:, l + m] = np.sqrt(2.0) * red[m] * w.real
        out[:, l - m] = np.sqrt(2.0) * red[m] * w.imag
    return out


def real_sph_harm(l, k, x):
    """Y_{l,k}(x) for 1 <= k <= 2l+1; x is a unit vector or an (n, 3) array."""
    if not 1 <= k <= 2 * l + 1:
        raise ValueError(f"order index k must lie in 1..{2 * l + 1}, got {k}")
    x = np.asarray(x, dtype=float)
    vals = sph_harm_degree(l, x)[:, k - 1]
    return float(vals[0]) if x.ndim == 1 else vals


@lru_cache(maxsize=64)
def _gl_cached(n):
    t, w = np.polynomial.legendre.leggauss(n)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def gauss_legendre_rule(n):
    """n-point Gauss-Legendre nodes and weights on [-1, 1]."""
    if n < 1:
        raise ValueError("need at least one point")
    t, w = _gl_cached(n)
    return t.copy(), w.copy()


def graded_panels(levels, ratio=0.5):
    """Breakpoints on [-1, 1] refined geometrically toward both endpoints."""
    inner = 1.0 - ratio ** np.arange(1, levels + 1)
    return np.concatenate((-1.0, -inner[::-1], [0.0], inner, 1.0), axis=None)


def graded_rule(levels, order, ratio=0.5):
    """Composite Gauss-Legendre rule on graded panels of [-1, 1]."""
    t0, w0 = gauss_legendre_rule(order)
    br = graded_panels(levels, ratio)
    a, b = br[:-1, None], br[1:, None]
    t = 0.5 * (b - a) * t0 + 0.5 * (a + b)
    w = 0.5 * (b - a) * w0
    return t.ravel(), w.ravel()


def integrate_graded(f, tol=1e-11, max_rounds=6):
    """Integrate f over [-1, 1] on graded panels, refining until two rounds agree."""
    prev = None
    for r in range(max_rounds):
        levels, order = 20 + 12 * r, 16 * (r + 2)
        t, w = graded_rule(levels, order)
        est = float(np.dot(w, f(t)))
        if prev is not None and abs(est - prev) <= tol:
            return est
        prev = est
    raise ConvergenceError(f"graded quadrature did not converge: last estimates {prev!r}, {est!r}")


def legendre_coefficient(f, j, tol=1e-11):
    """a_j = (2j+1)/2 * integral of f(t) P_j(t) over [-1, 1].

    Endpoint singularities in the derivatives (log or fractional powers at
    t = +-1) are handled by the geometric grading of the panels.
    """
    return 0.5 * (2 * j + 1) * integrate_graded(lambda t: f(t) * legendre_P(j, t), tol=tol)


def legendre_series_eval(coeffs, t):
    return np.polynomial.legendre.legval(_check_domain(t), np.asarray(coeffs, dtype=float))
