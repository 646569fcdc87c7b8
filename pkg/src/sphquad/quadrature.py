"""Quadrature rules: application, weight diagnostics, noise stability and
transport to surfaces diffeomorphic to the sphere."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import NodeSet, as_points
from .kernels import kernel_integral_constant, kernel_matrix, pi_integrals, pi_matrix
from .solver import saddle_matrix, solve_weights

SPHERE_AREA = 4.0 * math.pi


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes, weights and the surface they integrate over.

    ``points`` are the nodes on the target surface; ``sphere_points`` are
    the preimages on S^2 (identical for sphere rules).
    """

    points: np.ndarray
    weights: np.ndarray
    surface: str = "sphere"
    sphere_points: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float)
        c = np.asarray(self.weights, dtype=float)
        if P.ndim != 2 or P.shape[1] != 3:
            raise ValueError(f"expected (N, 3) nodes, got {P.shape}")
        if len(c) != len(P):
            raise ValueError(f"{len(c)} weights for {len(P)} nodes")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite weights")
        S = P if self.sphere_points is None else np.asarray(self.sphere_points, dtype=float)
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "weights", c)
        object.__setattr__(self, "sphere_points", S)

    @property
    def N(self):
        return len(self.weights)

    @classmethod
    def from_solution(cls, X, sol):
        meta = {"kernel": sol.kernel, "method": sol.method, "residual": sol.residual,
                "iterations": sol.iterations}
        if isinstance(X, NodeSet):
            meta["family"] = X.family
        return cls(as_points(X), sol.c, meta=meta)


def compute_rule(K, X, config=None):
    """Solve for the weights of kernel K on nodes X and wrap them as a rule."""
    sol = solve_weights(K, X, config)
    return QuadratureRule.from_solution(X, sol), sol


def apply(rule, f):
    """Sum of c_i f(x_i) with exactly rounded (fsum) accumulation.

    ``f`` is either a callable on an (N, 3) array or an array of N values.
    """
    vals = np.asarray(f(rule.points) if callable(f) else f, dtype=float)
    if vals.shape != (rule.N,):
        raise ValueError(f"expected {rule.N} values, got shape {vals.shape}")
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise ValueError(f"non-finite integrand value at node {bad[0]}")
    return math.fsum(rule.weights * vals)


@dataclass(frozen=True)
class WeightDiagnostics:
    N: int
    total: float
    mean: float
    expected_mean: float
    min: float
    max: float
    l1: float
    l2: float
    negative: int

    @property
    def mean_rel_error(self):
        return abs(self.mean - self.expected_mean) / abs(self.expected_mean)


def diagnostics(rule, volume=None):
    c = rule.weights
    if volume is None:
        volume = SPHERE_AREA if rule.surface == "sphere" else math.fsum(c)
    total = math.fsum(c)
    return WeightDiagnostics(
        N=rule.N, total=total, mean=total / rule.N, expected_mean=volume / rule.N,
        min=float(c.min()), max=float(c.max()), l1=math.fsum(np.abs(c)),
        l2=math.sqrt(math.fsum(c * c)), negative=int(np.count_nonzero(c < 0)),
    )


@dataclass(frozen=True)
class NoiseEstimate:
    sampled: float
    exact: float
    samples: int
    sigma: float
    seed: int

    @property
    def ratio(self):
        return self.sampled / self.exact


def noise_stddev(rule, sigma=1.0, samples=500, seed=0):
    """Monte-Carlo and exact standard deviation of Q applied to pure noise.

    Sample k uses i.i.d. N(0, sigma^2) values from a PCG64 stream seeded by
    the k-th child of ``SeedSequence(seed)``, so the result does not depend
    on the order in which samples are evaluated. The exact value is
    sigma * ||c||_2.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    c = rule.weights
    children = np.random.SeedSequence(seed).spawn(samples)
    q = np.array([c @ np.random.default_rng(ch).standard_normal(rule.N) for ch in children])
    sampled = sigma * float(np.std(q, ddof=1))
    exact = sigma * math.sqrt(math.fsum(c * c))
    return NoiseEstimate(sampled, exact, samples, sigma, seed)


def diffeo_rule(rule, scale, mapping, surface="custom"):
    """Transport a sphere rule through x -> mapping(x), weights times scale(x).

    ``scale`` is the area density ratio W, evaluated at the sphere nodes.
    """
    S = rule.sphere_points
    w = np.asarray(scale(S), dtype=float) * np.ones(rule.N)
    if not np.all(w > 0):
        raise ValueError("scale factor must be positive at every node")
    P = np.asarray(mapping(S), dtype=float)
    meta = dict(rule.meta, scale_min=float(w.min()), scale_max=float(w.max()))
    return QuadratureRule(P, rule.weights * w, surface=surface, sphere_points=S, meta=meta)


def _check_flattening(a):
    if not 0.0 < a <= 1.0:
        raise ValueError(f"axis ratio a must lie in (0, 1], got {a}")


def spheroid_scale_sphere(a, z):
    """Area density ratio at the preimage with sphere coordinate z."""
    return np.sqrt(a * a + (1.0 - a * a) * np.asarray(z) ** 2)


def spheroid_scale_surface(a, z):
    """The same ratio written in the surface coordinate z = a * z_sphere."""
    return np.sqrt(a * a + (a ** -2 - 1.0) * np.asarray(z) ** 2)


def spheroid_map(a, S):
    return np.asarray(S) * np.array([1.0, 1.0, a])


def spheroid_rule(rule, a):
    """Rule for the oblate spheroid x^2 + y^2 + z^2/a^2 = 1."""
    _check_flattening(a)
    if rule.surface != "sphere":
        raise ValueError("spheroid_rule needs a sphere rule")
    out = diffeo_rule(rule, lambda S: spheroid_scale_sphere(a, S[:, 2]),
                      lambda S: spheroid_map(a, S), surface=f"spheroid(a={a!r})")
    return replace(out, meta=dict(out.meta, a=a))


def spheroid_area(a):
    """Closed-form area of the oblate spheroid with axis ratio a."""
    _check_flattening(a)
    if a == 1.0:
        return SPHERE_AREA
    e = math.sqrt(1.0 - a * a)
    return 2.0 * math.pi * (1.0 + a * a / e * math.atanh(e))


@dataclass
class LagrangeReport:
    probed: np.ndarray
    weights: np.ndarray
    integrals: np.ndarray
    l1_norms: np.ndarray
    lebesgue_sum: float
    cardinality_error: float

    @property
    def max_weight_gap(self):
        return float(np.abs(self.weights - self.integrals).max())


def lagrange_diagnostic(K, X, probe_nodes, probe_rule, dense_limit=5000):
    """Lagrange functions chi_i for the probed node indices.

    Each chi_i is the interpolant of the cardinal data e_i. Its integral,
    L1 norm and the Lebesgue-type sum max_x sum_i |chi_i(x)| are estimated
    with ``probe_rule`` (a fine QuadratureRule on the sphere); the weights
    c_i of X are returned for comparison with the integrals.
    """
    P = as_points(X)
    N = len(P)
    if N > dense_limit:
        raise ValueError(f"N={N} above the dense limit {dense_limit} for this diagnostic")
    idx = np.asarray(probe_nodes, dtype=int)
    M, _, Psi = saddle_matrix(K, P)
    k = Psi.shape[1]
    rhs = np.zeros((N + k, len(idx)))
    rhs[idx, np.arange(len(idx))] = 1.0
    rhs_w = np.zeros(N + k)
    rhs_w[:N] = kernel_integral_constant(K)
    rhs_w[N:] = pi_integrals(K.pi_degree)
    sol = np.linalg.solve(M, np.column_stack((rhs, rhs_w)))
    coef, weights = sol[:, :-1], sol[:N, -1]

    def evaluate(Y):
        Y = as_points(Y)
        return kernel_matrix(K, Y, P) @ coef[:N] + pi_matrix(Y, K.pi_degree, check=False) @ coef[N:]

    at_nodes = evaluate(P)
    target = np.zeros_like(at_nodes)
    target[idx, np.arange(len(idx))] = 1.0
    card = float(np.abs(at_nodes - target).max())
    vals = evaluate(probe_rule.points)
    integrals = probe_rule.weights @ vals
    l1 = probe_rule.weights @ np.abs(vals)
    leb = float(np.abs(vals).sum(axis=1).max())
    return LagrangeReport(idx, weights[idx], integrals, l1, leb, card)
