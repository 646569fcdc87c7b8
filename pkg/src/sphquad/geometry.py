"""Points on the unit sphere, geodesic distances and node-set statistics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

FAMILIES = ("icosahedral", "fibonacci", "min_energy", "custom")

# pairs closer than this (radians) are treated as duplicates
DUPLICATE_TOL = 1e-10


class DegenerateNodesError(ValueError):
    pass


def normalize(points):
    """Project an (N, 3) array (or a single 3-vector) radially onto S^2."""
    pts = np.asarray(points, dtype=float)
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite coordinates")
    norms = np.linalg.norm(pts, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot normalize the zero vector")
    # leave rows that are already unit to rounding alone, so that
    # normalizing twice (or after a file round trip) is bit-stable
    norms[np.abs(norms - 1.0) <= 1e-15] = 1.0
    return pts / norms


def unit_vector(x, y, z):
    return normalize(np.array([x, y, z], dtype=float))


def geodesic_distance(p, q):
    """Great-circle distance atan2(|p x q|, p . q); broadcasts over leading axes."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    cross = np.linalg.norm(np.cross(p, q), axis=-1)
    dot = np.sum(p * q, axis=-1)
    return np.arctan2(cross, dot)


def chord_to_geodesic(chord):
    return 2.0 * np.arcsin(np.clip(np.asarray(chord) / 2.0, 0.0, 1.0))


@dataclass(frozen=True)
class GeodesicStats:
    h: float
    q: float
    rho: float
    resolution: int

    @property
    def underestimated(self):
        # a probe-based h below q means the probe set was too coarse
        return self.rho < 1.0


@dataclass(frozen=True, eq=False)
class NodeSet:
    """An ordered, immutable set of distinct unit vectors.

    ``points`` is re-normalized on construction. ``meta`` carries
    free-form provenance (generator settings, convergence flags).
    """

    points: np.ndarray
    family: str = "custom"
    meta: dict = field(default_factory=dict)
    check_distinct: bool = True

    def __post_init__(self):
        pts = normalize(np.atleast_2d(self.points))
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"expected an (N, 3) array, got shape {pts.shape}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown node family {self.family!r}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.check_distinct and len(pts) > 1:
            if min_geodesic_spacing(pts) <= DUPLICATE_TOL:
                raise DegenerateNodesError("degenerate node set: duplicate nodes")

    def __len__(self):
        return self.points.shape[0]

    @property
    def N(self):
        return self.points.shape[0]

    def rotated(self, R):
        """Return the node set rotated by the 3x3 orthogonal matrix R."""
        return NodeSet(self.points @ np.asarray(R).T, self.family, dict(self.meta))

    def tree(self):
        return cKDTree(self.points)


def as_points(X):
    if isinstance(X, NodeSet):
        return X.points
    return normalize(np.atleast_2d(X))


def min_geodesic_spacing(points):
    """Smallest pairwise geodesic distance, exact (via nearest chord neighbor)."""
    pts = np.asarray(points)
    dist, _ = cKDTree(pts).query(pts, k=2)
    return float(chord_to_geodesic(dist[:, 1].min()))


def separation_radius(X):
    """Half the minimum pairwise geodesic distance of the node set."""
    pts = as_points(X)
    if len(pts) < 2:
        raise ValueError("separation radius needs at least two nodes")
    q = 0.5 * min_geodesic_spacing(pts)
    if 2.0 * q <= DUPLICATE_TOL:
        raise DegenerateNodesError("degenerate node set: duplicate nodes")
    return q


def mesh_norm_from_probes(X, probes):
    """max over the probe points of the geodesic distance to the nearest node.

    This is a lower bound on the true mesh norm and is monotone in the
    probe set (a superset can only raise it).
    """
    pts = as_points(X)
    dist, _ = cKDTree(pts).query(np.asarray(probes), k=1)
    return float(chord_to_geodesic(dist.max()))


def mesh_norm_estimate(X, resolution=None):
    """Probe-based estimate of the mesh norm h (fill distance).

    Probes are a Fibonacci lattice of ``resolution`` points (default
    ``100 * N``, bumped to the next odd number). The estimate converges to
    h from below as the resolution grows.
    """
    from .nodes import fibonacci_points

    pts = as_points(X)
    if resolution is None:
        resolution = 100 * len(pts)
    if resolution < 10 * len(pts):
        raise ValueError("resolution must be at least 10*N")
    resolution = int(resolution) | 1
    return mesh_norm_from_probes(pts, fibonacci_points(resolution))


def geodesic_stats(X, resolution=None):
    pts = as_points(X)
    if resolution is None:
        resolution = 100 * len(pts)
    h = mesh_norm_estimate(pts, resolution)
    q = separation_radius(pts)
    return GeodesicStats(h=h, q=q, rho=h / q, resolution=int(resolution) | 1)


def _ordered_by_distance(points, center, candidates):
    d = geodesic_distance(points[candidates], points[center])
    order = np.lexsort((candidates, d))
    return candidates[order]


def nearest_neighbors(X, i, p):
    """Indices of the p nodes nearest to node i (node i first), ties by index."""
    pts = as_points(X)
    N = len(pts)
    if not 1 <= p <= N:
        raise ValueError(f"need 1 <= p <= N, got p={p}, N={N}")
    return neighbor_table(pts, p, rows=[i])[0]


def neighbor_table(X, p, rows=None, tree=None):
    """(len(rows), p) array of nearest-neighbor index lists.

    The KD-tree query on chord distance is exact because chord length is
    monotone in geodesic distance; ties at the stencil boundary are
    resolved by re-querying the closed ball and sorting by (distance, index).
    """
    pts = as_points(X)
    N = len(pts)
    if not 1 <= p <= N:
        raise ValueError(f"need 1 <= p <= N, got p={p}, N={N}")
    rows = np.arange(N) if rows is None else np.asarray(rows, dtype=int)
    tree = cKDTree(pts) if tree is None else tree
    k = min(p + 1, N)
    dist, idx = tree.query(pts[rows], k=k)
    dist = np.atleast_2d(dist).reshape(len(rows), k)
    idx = np.atleast_2d(idx).reshape(len(rows), k)
    out = np.empty((len(rows), p), dtype=np.int64)
    for r, i in enumerate(rows):
        cand = idx[r]
        boundary = dist[r, p - 1]
        tied = k > p and dist[r, p] <= boundary * (1 + 1e-12) + 1e-15
        if tied or np.any(np.diff(dist[r, :p]) <= 1e-15):
            ball = np.asarray(tree.query_ball_point(pts[i], boundary * (1 + 1e-12) + 1e-15))
            cand = np.union1d(ball, cand[:p])
        ordered = _ordered_by_distance(pts, i, np.asarray(cand, dtype=np.int64))
        # node i is at distance 0 and must come first even if a duplicate index ties
        ordered = np.concatenate(([i], ordered[ordered != i]))
        out[r] = ordered[:p]
    return out


def brute_force_neighbors(X, i, p):
    pts = as_points(X)
    d = geodesic_distance(pts, pts[i])
    order = np.lexsort((np.arange(len(pts)), d))
    return order[:p]
