"""Command line entry point: ``rehss {bench,sweep,spectrum,theory,gen}``."""
from __future__ import annotations

import argparse
import logging
import sys as _sys
from pathlib import Path

from .bench import (
    DEFAULT_ALPHAS, EXTENDED_ALPHAS, FIGURE_ALPHAS, ExperimentConfig, FileProblem,
    check_alphas, export_spectrum, load_problem, log_grid, run_benchmark, run_sweep,
    run_theory_report,
)
from .errors import RehssError
from .krylov import GmresConfig
from .precond import InnerStrategy, PrecondKind
from .problems import SCALINGS, Flow, StokesSpec, generate_stokes, mm_write

log = logging.getLogger("rehss")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated list of numbers: {text!r}") from None


def _kind_list(text):
    try:
        return [PrecondKind.parse(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_problem_args(p, allow_files=True):
    g = p.add_argument_group("problem")
    g.add_argument("--problem", choices=[f.value for f in Flow], default="lid",
                   help="generated MAC Stokes flow (default: lid)")
    g.add_argument("--n", type=int, default=16, help="cells per side of the generated grid")
    g.add_argument("--scaling", choices=SCALINGS, default="fv",
                   help="fv multiplies the stencils by h^2, fd keeps 1/h^2 and 1/h")
    g.add_argument("--drop-rows", type=int, default=None,
                   help="leading rows of B to drop (default 1 for generated, 0 for files)")
    if allow_files:
        g.add_argument("--matA", help="Matrix Market file with A")
        g.add_argument("--matB", help="Matrix Market file with B")


def _problem(args):
    if getattr(args, "matA", None) or getattr(args, "matB", None):
        if not (args.matA and args.matB):
            raise ValueError("--matA and --matB must be given together")
        return FileProblem(args.matA, args.matB, 0 if args.drop_rows is None else args.drop_rows)
    drop = 1 if args.drop_rows is None else args.drop_rows
    return StokesSpec(args.n, Flow.parse(args.problem), drop, args.scaling)


def _add_solver_args(p):
    g = p.add_argument_group("solver")
    g.add_argument("--precond", type=_kind_list, default=list((PrecondKind.HSS, PrecondKind.RHSS, PrecondKind.REHSS)),
                   help="comma separated subset of hss,rhss,rehss,none")
    g.add_argument("--restart", type=int, default=30)
    g.add_argument("--tol", type=float, default=1e-12)
    g.add_argument("--max-restarts", type=int, default=500)
    g.add_argument("--max-seconds", type=float, default=3600.0)
    g.add_argument("--inner", choices=("direct", "cg"), default="direct")
    g.add_argument("--literal-stop-rule", action="store_true",
                   help="stop on ||P r|| <= tol ||P b|| instead of the preconditioned residual")
    g.add_argument("--out", help="output file (bench) or directory (sweep)")
    g.add_argument("--format", choices=("csv", "json"), default="csv")


def _gmres_cfg(args):
    return GmresConfig(restart=args.restart, rel_tol=args.tol, max_restarts=args.max_restarts,
                       max_seconds=args.max_seconds, literal_stop_rule=args.literal_stop_rule,
                       record_history=False)


def _print_rows(rows):
    print(f"{'precond':8s} {'alpha':>8s} {'IT':>5s} {'inner':>6s} {'relres':>10s} {'seconds':>9s} termination")
    for r in rows:
        print(f"{r.precond:8s} {r.alpha:8.0e} {r.IT:5d} {r.inner_iters:6d} {r.relres:10.2e} "
              f"{r.seconds:9.3f} {r.termination}")


def cmd_bench(args):
    alphas = args.alpha or list(EXTENDED_ALPHAS if args.extended_alphas else DEFAULT_ALPHAS)
    cfg = ExperimentConfig(_problem(args), args.precond, check_alphas(alphas), _gmres_cfg(args),
                           InnerStrategy(args.inner), args.out, args.format)
    rows = run_benchmark(cfg)
    _print_rows(rows)
    return 0


def cmd_sweep(args):
    lo, hi, steps = args.alpha_log_range
    steps = int(steps)
    if steps < 1:
        raise ValueError("sweep needs at least one step")
    grid = log_grid(lo, hi, steps)
    cfg = ExperimentConfig(_problem(args), args.precond, grid, _gmres_cfg(args), InnerStrategy(args.inner),
                           None, args.format)
    curves = run_sweep(cfg, grid, args.out)
    for kind, pts in curves.items():
        print(kind, " ".join(str(it) for _, it, _ in pts))
    return 0


def cmd_spectrum(args):
    kind = PrecondKind.parse(args.precond)
    alphas = check_alphas(args.alpha or list(FIGURE_ALPHAS))
    sys = load_problem(_problem(args))
    out = Path(args.out)
    for a in alphas:
        path = out if len(alphas) == 1 else out.with_name(f"{out.stem}_alpha{a:g}{out.suffix}")
        pre, _ = export_spectrum(sys, kind, a, path)
        print(f"{path}: {len(pre)} eigenvalues, {pre.n_at_one} at 1, "
              f"90% radius {pre.cluster_radius_90:.3g}")
        if kind is PrecondKind.NONE:
            break
    return 0


def cmd_theory(args):
    sys = load_problem(_problem(args))
    report = run_theory_report(sys, rho_tol=args.rho_tol)
    print(report.summary())
    return 0 if report.ok else 1


def cmd_gen(args):
    drop = 1 if args.drop_rows is None else args.drop_rows
    spec = StokesSpec(args.n, Flow.parse(args.problem), drop, args.scaling)
    sys = generate_stokes(spec)
    mm_write(sys.A, args.out_A, comment=f"{sys.label} A")
    mm_write(sys.B, args.out_B, comment=f"{sys.label} B")
    print(f"{sys.label}: n={sys.n} m={sys.m} -> {args.out_A}, {args.out_B}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="rehss", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log every solver run")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="preconditioner x alpha table")
    _add_problem_args(p)
    _add_solver_args(p)
    p.add_argument("--alpha", type=_float_list, help="comma separated alpha values")
    p.add_argument("--extended-alphas", action="store_true", help="also run alpha=1e-6")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="IT and time over a log-spaced alpha grid")
    _add_problem_args(p)
    _add_solver_args(p)
    p.add_argument("--alpha-log-range", type=float, nargs=3, metavar=("LO", "HI", "STEPS"),
                   default=(-4.0, 2.0, 13))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("spectrum", help="eigenvalue scatter files")
    _add_problem_args(p)
    p.add_argument("--precond", default="rehss")
    p.add_argument("--alpha", type=_float_list, help="comma separated, default 0.01,0.1,1")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("theory", help="bounds and convergence checks")
    _add_problem_args(p)
    p.add_argument("--rho-tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("gen", help="export a generated problem as Matrix Market")
    _add_problem_args(p, allow_files=False)
    p.add_argument("--out-A", required=True)
    p.add_argument("--out-B", required=True)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (RehssError, ValueError, OSError) as exc:
        print(f"rehss: error: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    _sys.exit(main())
