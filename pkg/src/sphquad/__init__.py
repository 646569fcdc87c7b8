"""Kernel-based quadrature on the unit sphere with restricted surface splines."""
from .geometry import GeodesicStats, NodeSet, geodesic_distance, geodesic_stats, mesh_norm_estimate, separation_radius
from .kernels import G1, G2, KERNELS, SurfaceSplineKernel, TargetKernel, get_kernel
from .nodes import fibonacci_nodes, icosahedral_nodes, make_nodes, min_energy_nodes
from .quadrature import QuadratureRule, apply, compute_rule, diagnostics, noise_stddev, spheroid_rule
from .solver import SolverConfig, WeightSolution, solve_direct, solve_iterative, solve_weights

__version__ = "0.1.0"
