"""Quasi-uniform node families: Fibonacci, icosahedral and minimum Riesz energy."""
from __future__ import annotations

import logging
import math

import numba
import numpy as np

from .geometry import NodeSet, normalize

log = logging.getLogger(__name__)

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0

FAMILY_ALIASES = {
    "icosahedral": "icosahedral",
    "fibonacci": "fibonacci",
    "min-energy": "min_energy",
    "min_energy": "min_energy",
}


def fibonacci_points(N):
    """Symmetric spherical Fibonacci lattice as a raw (N, 3) array.

    For i = -(N-1)/2 .. (N-1)/2: latitude asin(2i/N), longitude
    2*pi*i/golden (mod 2*pi). The i = 0 node is (1, 0, 0).
    """
    if N < 3 or N % 2 == 0:
        raise ValueError(f"Fibonacci lattice needs an odd N >= 3, got {N}")
    i = np.arange(N, dtype=float) - (N - 1) // 2
    lat = np.arcsin(2.0 * i / N)
    lon = np.mod(2.0 * np.pi * i / GOLDEN, 2.0 * np.pi)
    cl = np.cos(lat)
    return np.column_stack((cl * np.cos(lon), cl * np.sin(lon), np.sin(lat)))


def fibonacci_nodes(N):
    return NodeSet(fibonacci_points(N), family="fibonacci", meta={"N": N})


def icosahedron():
    """The 12 vertices (poles at +-e_z) and 20 faces of the base icosahedron."""
    lat = math.atan(0.5)
    verts = [(0.0, 0.0, 1.0)]
    for k in range(5):
        lon = 2.0 * math.pi * k / 5.0
        verts.append((math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)))
    for k in range(5):
        lon = 2.0 * math.pi * (k + 0.5) / 5.0
        verts.append((math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), -math.sin(lat)))
    verts.append((0.0, 0.0, -1.0))
    faces = []
    for k in range(5):
        u0, u1 = 1 + k, 1 + (k + 1) % 5
        l0, l1 = 6 + k, 6 + (k + 1) % 5
        faces.append((0, u0, u1))
        faces.append((u0, l0, u1))
        faces.append((u1, l0, l1))
        faces.append((11, l1, l0))
    return normalize(np.array(verts)), faces


def icosahedral_nodes(n):
    """Geodesic icosahedral grid with 10 n^2 + 2 nodes.

    Every face is split into n^2 planar triangles through barycentric
    coordinates, then all points are projected radially onto the sphere.
    Vertices come first, then edge points, then face-interior points, so
    shared points are generated exactly once.
    """
    if n < 1:
        raise ValueError(f"subdivision level must be >= 1, got {n}")
    V, faces = icosahedron()
    pts = [V]
    edges = sorted({tuple(sorted((f[a], f[b]))) for f in faces for a, b in ((0, 1), (1, 2), (2, 0))})
    t = np.arange(1, n, dtype=float)[:, None] / n
    for a, b in edges:
        pts.append((1.0 - t) * V[a] + t * V[b])
    if n >= 3:
        ij = [(i, j) for i in range(1, n) for j in range(1, n - i)]
        ij = np.array(ij, dtype=float)
        wa = ij[:, 0:1] / n
        wb = ij[:, 1:2] / n
        wc = 1.0 - wa - wb
        for a, b, c in faces:
            pts.append(wa * V[a] + wb * V[b] + wc * V[c])
    P = normalize(np.vstack(pts))
    assert len(P) == 10 * n * n + 2
    return NodeSet(P, family="icosahedral", meta={"level": n})


@numba.njit(cache=True, inline="always")
def _inv_pow(r2, s):
    # r^-s from r^2; the s = 3 case avoids pow()
    if s == 3.0:
        inv = 1.0 / math.sqrt(r2)
        return inv * inv * inv
    return r2 ** (-0.5 * s)


@numba.njit(cache=True)
def _riesz_energy_grad(X, s):
    N = X.shape[0]
    G = np.zeros((N, 3))
    E = 0.0
    for i in range(N):
        for j in range(i + 1, N):
            d0 = X[i, 0] - X[j, 0]
            d1 = X[i, 1] - X[j, 1]
            d2 = X[i, 2] - X[j, 2]
            r2 = d0 * d0 + d1 * d1 + d2 * d2
            e = _inv_pow(r2, s)
            E += e
            w = s * e / r2
            G[i, 0] -= w * d0
            G[i, 1] -= w * d1
            G[i, 2] -= w * d2
            G[j, 0] += w * d0
            G[j, 1] += w * d1
            G[j, 2] += w * d2
    # sum over ordered pairs i != j
    return 2.0 * E, 2.0 * G


@numba.njit(cache=True)
def _riesz_energy(X, s):
    N = X.shape[0]
    E = 0.0
    for i in range(N):
        for j in range(i + 1, N):
            d0 = X[i, 0] - X[j, 0]
            d1 = X[i, 1] - X[j, 1]
            d2 = X[i, 2] - X[j, 2]
            E += _inv_pow(d0 * d0 + d1 * d1 + d2 * d2, s)
    return 2.0 * E


def riesz_energy(points, s=3.0):
    """sum over i != j of |x_i - x_j|^(-s)."""
    return float(_riesz_energy(np.ascontiguousarray(points, dtype=float), float(s)))


def _tangential(G, X):
    return G - np.sum(G * X, axis=1, keepdims=True) * X


def min_energy_nodes(N, seed=0, s=3.0, max_iter=1000, gtol=None, perturb=1e-3, history=False):
    """Locally minimize the Riesz s-energy by projected gradient descent.

    Starts from the Fibonacci lattice of the nearest odd size (N+1 with
    the last node dropped when N is even), jittered by ``perturb`` times a
    seeded Gaussian so that ``seed`` selects the local minimum reached.
    Steps follow the negative tangential gradient, starting from a
    Barzilai-Borwein step length and halving until the energy decreases;
    each iterate is re-projected onto the sphere. Stops once the max-norm of
    the tangential gradient is below ``gtol`` (default 1e-8 * N) or after
    ``max_iter`` accepted steps, flagging ``meta['converged']``.
    """
    if N < 2:
        raise ValueError(f"need N >= 2, got {N}")
    if N <= 3:
        start = fibonacci_points(3)[:N]
    elif N % 2:
        start = fibonacci_points(N)
    else:
        start = fibonacci_points(N + 1)[:N]
    rng = np.random.default_rng(seed)
    X = normalize(start + perturb * rng.standard_normal(start.shape))
    gtol = 1e-8 * N if gtol is None else gtol

    E, G = _riesz_energy_grad(X, s)
    Gt = _tangential(G, X)
    # initial step moves the worst node by about a tenth of the mean spacing
    step = 0.1 * math.sqrt(4.0 * math.pi / N) / max(np.abs(Gt).max(), 1e-300)
    energies = [E]
    converged = False
    reason = "cap"
    it = 0
    while it < max_iter:
        gmax = np.abs(Gt).max()
        if gmax < gtol:
            converged = True
            reason = "gtol"
            break
        for _ in range(60):
            Y = normalize(X - step * Gt)
            E_new = _riesz_energy(Y, s)
            if E_new < E:
                break
            step *= 0.5
        else:
            # energy differences have reached rounding level
            reason = "stalled"
            break
        E, G = _riesz_energy_grad(Y, s)
        Gt_new = _tangential(G, Y)
        # Barzilai-Borwein trial step for the next iteration
        ds = (Y - X).ravel()
        dg = (Gt_new - Gt).ravel()
        sy = ds @ dg
        step = (ds @ ds) / sy if sy > 0 else 1.5 * step
        X, Gt = Y, Gt_new
        energies.append(E)
        it += 1
    if not converged:
        log.warning("min-energy descent stopped (%s) after %d steps, max |grad_t| = %.3e",
                    reason, it, np.abs(Gt).max())
    meta = {
        "N": N,
        "seed": seed,
        "s": s,
        "iterations": it,
        "converged": converged,
        "stop_reason": reason,
        "energy": E,
        "grad_max": float(np.abs(Gt).max()),
    }
    if history:
        meta["energies"] = energies
    return NodeSet(X, family="min_energy", meta=meta)


def make_nodes(family, size, seed=0, **kwargs):
    """Dispatch on a family name; ``size`` is the level for icosahedral nodes."""
    fam = FAMILY_ALIASES.get(family)
    if fam is None:
        raise ValueError(f"unknown node family {family!r}")
    if fam == "icosahedral":
        return icosahedral_nodes(size)
    if fam == "fibonacci":
        return fibonacci_nodes(size)
    return min_energy_nodes(size, seed=seed, **kwargs)
