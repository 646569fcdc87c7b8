"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 numerical failure (solver
non-convergence, singular system) or a failed check in an experiment.
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import math
import sys

import numpy as np
from threadpoolctl import threadpool_limits

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


def _int_list(s):
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _family(s):
    from .nodes import FAMILY_ALIASES

    if s not in FAMILY_ALIASES:
        raise argparse.ArgumentTypeError(f"unknown family {s!r}; use icosahedral, fibonacci or min-energy")
    return FAMILY_ALIASES[s]


def _say(args, msg):
    if not args.quiet:
        print(msg)


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _solver_config(args):
    from .solver import SolverConfig

    return SolverConfig(method=args.solver, tol=args.tol, max_iter=args.max_iter, neighbors=args.neighbors)


def _size_args(args):
    if args.family == "icosahedral":
        if args.level is None:
            raise UsageError("icosahedral nodes need --level")
        return args.level
    if args.n is None:
        raise UsageError(f"{args.family} nodes need --n")
    return args.n


def cmd_nodes(args):
    from .geometry import geodesic_stats
    from .io import write_nodes
    from .nodes import make_nodes

    try:
        X = make_nodes(args.family, _size_args(args), seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    header = {"seed": args.seed} if args.family == "min_energy" else {}
    out = args.out or f"nodes_{args.family}_{X.N}.txt"
    write_nodes(out, X, header)
    st = geodesic_stats(X)
    _say(args, f"N={X.N} h={st.h:.4g} q={st.q:.4g} rho={st.rho:.4g} file={out}")
    if args.family == "min_energy" and not X.meta.get("converged", True):
        _say(args, f"warning: energy descent did not reach the gradient target ({X.meta.get('stop_reason', 'cap')})")
    return EXIT_OK


def _solve(args, X):
    from .kernels import UnisolvencyError, get_kernel
    from .solver import SingularSystemError, solve_weights

    K = get_kernel(args.kernel)
    try:
        sol = solve_weights(K, X, _solver_config(args))
    except (SingularSystemError, UnisolvencyError) as exc:
        raise NumericalFailure(str(exc)) from None
    if not sol.converged:
        raise NumericalFailure(f"GMRES did not converge in {sol.iterations} iterations")
    return sol


def cmd_weights(args):
    from .io import read_nodes, write_weights
    from .quadrature import QuadratureRule, diagnostics

    X = read_nodes(args.nodes)
    sol = _solve(args, X)
    rule = QuadratureRule.from_solution(X, sol)
    header = {"family": X.family, "kernel": sol.kernel, "solver": sol.method, "tol": args.tol,
              "iterations": sol.iterations, "residual": sol.residual}
    write_weights(args.out or "weights.txt", X, sol.c, header)
    d = diagnostics(rule)
    _say(args, f"N={rule.N} solver={sol.method} iterations={sol.iterations} residual={sol.residual:.4g}")
    _say(args, f"mean={d.mean:.4g} 4pi/N={d.expected_mean:.4g} min={d.min:.4g} max={d.max:.4g} "
               f"negative={d.negative}")
    return EXIT_OK


def cmd_integrate(args):
    from .experiments import constant_target, make_targets
    from .io import read_weights
    from .quadrature import QuadratureRule, apply

    X, c, _ = read_weights(args.weights)
    rule = QuadratureRule(X.points, c)
    exact = None
    if args.values:
        vals = np.loadtxt(args.values, comments="#", ndmin=1)
        if vals.shape != (rule.N,):
            raise UsageError(f"values file has {vals.size} entries, expected {rule.N}")
        q = apply(rule, vals)
    elif args.target == "one":
        q, exact = apply(rule, constant_target()), 4.0 * math.pi
    else:
        f = dict((t.name, t) for t in make_targets(args.convention))[args.target]
        q, exact = apply(rule, f), f.exact
    line = f"Q={q!r}"
    if exact is not None:
        line += f" exact={exact!r} rel_error={abs(q - exact) / abs(exact):.4g}"
    print(line)
    return EXIT_OK


def _sizes(args):
    if args.family == "icosahedral":
        if not args.levels:
            raise UsageError("icosahedral runs need --levels")
        return args.levels
    if not args.sizes:
        raise UsageError(f"{args.family} runs need --sizes")
    return args.sizes


def cmd_converge(args):
    from .experiments import convergence_study, make_targets

    target = dict((t.name, t) for t in make_targets(args.convention))[args.target]
    sizes = _sizes(args)
    if len(sizes) < 3:
        raise UsageError("need at least three sizes")
    rep = convergence_study(args.family, sizes, target, _solver_config(args), args.kernel)
    _write(args.out, rep.to_text())
    s = rep.summary
    _say(args, f"slope_N={s['slope_N']:.4g} slope_h={s['slope_h']:.4g} dropped_first={s['dropped_first']}")
    if args.expect_slope is not None and abs(s["slope_N"] - args.expect_slope) > args.slope_tol:
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_stability(args):
    from .experiments import stability_study

    rep = stability_study(args.family, _sizes(args), args.samples, args.seed, config=_solver_config(args),
                          kernel=args.kernel)
    _write(args.out, rep.to_text())
    _say(args, f"slope_N={rep.summary['slope_N']:.4g} max_ratio_dev={rep.summary['max_ratio_dev']:.4g}")
    ok = abs(rep.summary["slope_N"] + 0.5) <= 0.05 and rep.summary["max_ratio_dev"] <= 0.15
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_iterations(args):
    from .experiments import iteration_study

    rep = iteration_study(args.family, _sizes(args), _solver_config(args), args.kernel)
    _write(args.out, rep.to_text())
    s = rep.summary
    _say(args, f"iterations min={s['min_iterations']} max={s['max_iterations']} ratio={s['ratio']:.4g}")
    ok = s["all_converged"] and s["max_iterations"] <= 30 and s["ratio"] <= 3
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_spheroid(args):
    from .io import read_nodes, read_weights
    from .quadrature import QuadratureRule, apply, spheroid_area, spheroid_rule

    if not 0.0 < args.a <= 1.0:
        raise UsageError(f"--a must lie in (0, 1], got {args.a}")
    if args.weights:
        X, c, _ = read_weights(args.weights)
    elif args.nodes:
        X = read_nodes(args.nodes)
        c = _solve(args, X).c
    else:
        raise UsageError("give --weights or --nodes")
    sr = spheroid_rule(QuadratureRule(X.points, c), args.a)
    area = apply(sr, np.ones(sr.N))
    exact = spheroid_area(args.a)
    header = {"surface": sr.surface, "a": args.a, "area": area, "area_exact": exact}
    np.savetxt(args.out or "spheroid_weights.txt", np.column_stack((sr.points, sr.weights)), fmt="%.17g",
               header="\n".join(f"{k} = {v}" for k, v in header.items()), comments="# ")
    _say(args, f"area={area:.10g} exact={exact:.10g} rel_error={abs(area - exact) / exact:.4g} "
               f"scale=[{sr.meta['scale_min']:.5g}, {sr.meta['scale_max']:.5g}]")
    return EXIT_OK


def cmd_lagrange(args):
    from .experiments import product_rule
    from .io import read_nodes
    from .kernels import get_kernel
    from .quadrature import lagrange_diagnostic

    X = read_nodes(args.nodes)
    rng = np.random.default_rng(args.seed)
    idx = np.sort(rng.choice(X.N, size=min(args.probes, X.N), replace=False))
    try:
        rep = lagrange_diagnostic(get_kernel(args.kernel), X, idx, product_rule(args.probe_lat))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for i, w, integ, l1 in zip(rep.probed, rep.weights, rep.integrals, rep.l1_norms):
        print(f"node={i} weight={float(w)!r} integral={float(integ)!r} l1={float(l1)!r}")
    _say(args, f"lebesgue_sum={rep.lebesgue_sum:.4g} cardinality_error={rep.cardinality_error:.3g} "
               f"max_weight_gap={rep.max_weight_gap:.3g}")
    return EXIT_OK


def _add_solver(p):
    from .kernels import KERNELS

    p.add_argument("--kernel", default="tps-m2", choices=sorted(KERNELS))
    p.add_argument("--solver", default="gmres", choices=("gmres", "direct"))
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--neighbors", type=int, default=None, help="local stencil size p")


def _add_sizes(p):
    p.add_argument("--family", type=_family, required=True)
    p.add_argument("--sizes", type=_int_list, help="node counts (fibonacci, min-energy)")
    p.add_argument("--levels", type=_int_list, help="subdivision levels (icosahedral)")


def build_parser():
    ap = argparse.ArgumentParser(prog="sphquad", description="Kernel quadrature on the unit sphere.")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--quiet", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("nodes", help="generate a node set")
    p.add_argument("--family", type=_family, required=True)
    p.add_argument("--n", type=int, help="node count (fibonacci, min-energy)")
    p.add_argument("--level", type=int, help="subdivision level (icosahedral)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_nodes)

    p = sub.add_parser("weights", help="solve for quadrature weights")
    p.add_argument("--nodes", required=True)
    p.add_argument("--out")
    _add_solver(p)
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("integrate", help="apply a weight file to a target")
    p.add_argument("--weights", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--target", choices=("one", "f1", "f2"))
    g.add_argument("--values", help="file with one sampled value per node")
    p.add_argument("--convention", default="standard", choices=("standard", "literal"))
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("converge", help="convergence study")
    _add_sizes(p)
    p.add_argument("--target", required=True, choices=("f1", "f2"))
    p.add_argument("--convention", default="standard", choices=("standard", "literal"))
    p.add_argument("--expect-slope", type=float, default=None)
    p.add_argument("--slope-tol", type=float, default=0.15)
    p.add_argument("--out")
    _add_solver(p)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("stability", help="noise stability study")
    _add_sizes(p)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--out")
    _add_solver(p)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("iterations", help="GMRES iteration counts")
    _add_sizes(p)
    p.add_argument("--out")
    _add_solver(p)
    p.set_defaults(func=cmd_iterations)

    p = sub.add_parser("spheroid", help="transport a rule to an oblate spheroid")
    p.add_argument("--a", type=float, required=True, help="polar-to-equatorial axis ratio")
    p.add_argument("--weights")
    p.add_argument("--nodes")
    p.add_argument("--out")
    _add_solver(p)
    p.set_defaults(func=cmd_spheroid)

    p = sub.add_parser("lagrange-diag", help="Lagrange-function diagnostics (small N)")
    p.add_argument("--nodes", required=True)
    p.add_argument("--probes", type=int, default=10)
    p.add_argument("--probe-lat", type=int, default=200)
    p.add_argument("--kernel", default="tps-m2")
    p.set_defaults(func=cmd_lagrange)
    return ap


def _thread_limit(n):
    if n is None:
        return contextlib.nullcontext()
    if n < 1:
        raise UsageError("--threads must be >= 1")
    return threadpool_limits(limits=n)


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        with _thread_limit(args.threads):
            return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
