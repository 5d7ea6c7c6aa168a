"""
Benchmark harness: preconditioner comparison tables, alpha sweeps, spectrum
scatter files and theory reports on generated or ingested problems.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DenseLimitExceeded, InvalidAlpha
from .krylov import GmresConfig, gmres
from .precond import InnerStrategy, PrecondKind, build_precond
from .problems import StokesSpec, generate_stokes, load_system
from .saddle import Check, SaddlePointSystem, rhs_all_ones
from .spectral import alpha_limit_study, minpoly_check, preconditioned_spectrum, write_scatter
from .theory import compute_bounds, rhss_radius, spectral_radius_gamma

log = logging.getLogger(__name__)

DEFAULT_ALPHAS = (1e-4, 1e-2, 1.0, 1e2)
EXTENDED_ALPHAS = (1e-6,) + DEFAULT_ALPHAS
FIGURE_ALPHAS = (0.01, 0.1, 1.0)
DEFAULT_PRECONDS = (PrecondKind.HSS, PrecondKind.RHSS, PrecondKind.REHSS)
CSV_COLUMNS = ("problem", "label", "grid", "precond", "alpha", "IT", "inner_iters",
               "relres", "seconds", "termination")


@dataclass(frozen=True)
class FileProblem:
    path_A: str
    path_B: str
    drop_rows: int = 0


def load_problem(problem) -> SaddlePointSystem:
    """Build the system for a StokesSpec, FileProblem or ready system; rhs = calA * ones."""
    if isinstance(problem, SaddlePointSystem):
        sys = problem
    elif isinstance(problem, StokesSpec):
        sys = generate_stokes(problem)
    elif isinstance(problem, FileProblem):
        return load_system(problem.path_A, problem.path_B, problem.drop_rows)
    else:
        raise TypeError(f"unsupported problem {problem!r}")
    rhs_all_ones(sys)
    return sys


def problem_tags(problem, sys):
    if isinstance(problem, StokesSpec):
        N = problem.cells_per_side
        return problem.flow.value, f"{N}x{N}"
    if isinstance(problem, FileProblem):
        return "file", f"n={sys.n},m={sys.m}"
    return "system", f"n={sys.n},m={sys.m}"


def check_alphas(alphas):
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise InvalidAlpha("alpha grid is empty")
    bad = [a for a in alphas if not (a > 0 and math.isfinite(a))]
    if bad:
        raise InvalidAlpha(f"alpha values must be positive and finite, got {bad}")
    return alphas


@dataclass
class ExperimentConfig:
    problem: object
    preconditioners: list = field(default_factory=lambda: list(DEFAULT_PRECONDS))
    alphas: list = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    gmres: GmresConfig = field(default_factory=GmresConfig)
    inner: InnerStrategy = field(default_factory=InnerStrategy)
    output: str | None = None
    format: str = "csv"

    def __post_init__(self):
        self.alphas = check_alphas(self.alphas)
        self.preconditioners = [PrecondKind.parse(k) for k in self.preconditioners]
        if not self.preconditioners:
            raise ValueError("at least one preconditioner is required")
        if self.format not in ("csv", "json"):
            raise ValueError(f"format must be csv or json, got {self.format!r}")


@dataclass
class BenchRow:
    problem: str
    label: str
    grid: str
    precond: str
    alpha: float
    IT: int
    inner_iters: int
    relres: float
    seconds: float
    termination: str
    # max-norm distance of the computed solution from all-ones; not exported
    max_error: float = math.nan

    def record(self):
        return {k: getattr(self, k) for k in CSV_COLUMNS}


def run_cell(sys, kind, alpha, gcfg, inner, tags=("system", "")):
    ctx = build_precond(sys, kind, alpha, inner)
    u, rep = gmres(sys, ctx, sys.rhs, None, gcfg)
    err = float(np.max(np.abs(u.concat() - 1.0)))
    log.info("%s %s alpha=%g IT=%d relres=%.2e %s", sys.label, kind.label, alpha,
             rep.restarts, rep.final_relres, rep.termination.value)
    return BenchRow(tags[0], sys.label, tags[1], kind.label, alpha, rep.restarts,
                    rep.total_inner_iterations, rep.final_relres, rep.wall_seconds,
                    rep.termination.value, err)


def run_benchmark(cfg: ExperimentConfig, sys: SaddlePointSystem | None = None) -> list:
    """One GMRES run per (preconditioner, alpha), preconditioner-major, from x0 = 0."""
    sys = sys or load_problem(cfg.problem)
    tags = problem_tags(cfg.problem, sys)
    rows = []
    for kind in cfg.preconditioners:
        # "none" ignores alpha but still gets one cell per alpha
        for a in cfg.alphas:
            rows.append(run_cell(sys, kind, a, cfg.gmres, cfg.inner, tags))
    if cfg.output:
        write_rows(rows, cfg.output, cfg.format)
    return rows


def write_rows(rows, path, fmt="csv"):
    records = [r.record() for r in rows]
    with open(path, "w", newline="") as fh:
        if fmt == "json":
            json.dump(records, fh, indent=2)
            fh.write("\n")
        else:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            w.writeheader()
            for rec in records:
                rec = dict(rec)
                rec["relres"] = f"{rec['relres']:.6e}"
                rec["seconds"] = f"{rec['seconds']:.6f}"
                w.writerow(rec)


def log_grid(lo, hi, steps):
    """``steps`` values of alpha = 10^t, t evenly spaced in [lo, hi]."""
    if steps < 1:
        raise ValueError("sweep needs at least one step")
    return list(10.0 ** np.linspace(lo, hi, steps))


def run_sweep(cfg: ExperimentConfig, alpha_grid, out_dir=None, sys=None) -> dict:
    """IT and seconds per alpha for each preconditioner.

    With ``out_dir`` two files per preconditioner are written,
    ``sweep_<kind>_it.txt`` and ``sweep_<kind>_seconds.txt``, each holding
    ``log10(alpha) value`` lines.
    """
    alpha_grid = check_alphas(alpha_grid)
    sub = ExperimentConfig(cfg.problem, cfg.preconditioners, alpha_grid, cfg.gmres, cfg.inner)
    rows = run_benchmark(sub, sys)
    curves = {}
    for r in rows:
        curves.setdefault(r.precond, []).append((r.alpha, r.IT, r.seconds))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for kind, pts in curves.items():
            stem = kind.lower()
            with open(out / f"sweep_{stem}_it.txt", "w") as fh:
                fh.write(f"# {stem} log10(alpha) IT\n")
                fh.writelines(f"{math.log10(a):.6g} {it}\n" for a, it, _ in pts)
            with open(out / f"sweep_{stem}_seconds.txt", "w") as fh:
                fh.write(f"# {stem} log10(alpha) seconds\n")
                fh.writelines(f"{math.log10(a):.6g} {s:.6f}\n" for a, _, s in pts)
    if cfg.output:
        write_rows(rows, cfg.output, cfg.format)
    return curves


def it_ratio(rows, kind="REHSS"):
    its = [r.IT for r in rows if r.precond == kind]
    return max(its) / max(min(its), 1)


# --- theory report -------------------------------------------------------

@dataclass
class TheoryReport:
    label: str
    bounds: object = None
    checks: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    note: str = ""

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def summary(self):
        lines = [f"theory report: {self.label}"]
        if self.bounds is not None:
            b = self.bounds
            lines.append(
                f"  delta={b.delta:.6g} theta={b.theta:.6g} lambda(A)=[{b.lambda_min_A:.6g}, "
                f"{b.lambda_max_A:.6g}] sigma(B)=[{b.sigma_min_B:.6g}, {b.sigma_max_B:.6g}]"
            )
            lines.append(
                f"  mu=[{b.mu_m:.6g}, {b.mu1:.6g}] alpha_opt(RHSS)={b.alpha_opt_rhss:.6g} "
                f"RHSS upper={b.rhss_upper:.6g} corollary={b.corollary_holds}"
            )
        if self.note:
            lines.append(f"  {self.note}")
        for c in self.checks:
            lines.append(f"  {'PASS' if c.passed else 'FAIL'} {c.name}" + (f": {c.detail}" if c.detail else ""))
        for r in self.rows:
            lines.append(f"  {r.precond} alpha={r.alpha:g} IT={r.IT} {r.termination}")
        return "\n".join(lines)


def run_theory_report(sys: SaddlePointSystem, rho_tol: float = 1e-6, gcfg: GmresConfig | None = None,
                      samples: int = 8) -> TheoryReport:
    """Evaluate the bounds and check every convergence statement on ``sys``.

    Oversize systems skip the dense checks and only run REHSS GMRES on the
    default alpha grid.
    """
    report = TheoryReport(sys.label or repr(sys))
    try:
        b = compute_bounds(sys)
    except DenseLimitExceeded as exc:
        report.note = f"dense checks skipped ({exc}); GMRES only"
        if sys.rhs.norm() == 0.0:
            rhs_all_ones(sys)
        gcfg = gcfg or GmresConfig()
        report.rows = [run_cell(sys, PrecondKind.REHSS, a, gcfg, InnerStrategy()) for a in DEFAULT_ALPHAS]
        report.checks.append(Check("gmres_rehss", all(r.termination == "converged" for r in report.rows)))
        return report
    report.bounds = b
    add = report.checks.append

    add(Check("delta_le_theta", b.delta <= b.theta + 1e-12 * max(1.0, abs(b.theta)),
              f"delta={b.delta:.6g}, theta={b.theta:.6g}"))

    base = max(b.delta, 0.0)
    alphas = [base + 1e-3, base + 1e-1, base + 1.0, 2 * base + 10.0, 10 * base + 1e3]
    rhos = [spectral_radius_gamma(sys, a, rho_tol) for a in alphas]
    add(Check("alpha_above_delta_rho_lt_1", all(r < 1 for r in rhos),
              ", ".join(f"rho({a:.3g})={r:.10g}" for a, r in zip(alphas, rhos))))

    if b.corollary_holds:
        cor = [spectral_radius_gamma(sys, a, rho_tol) for a in (1e-4, 1.0, 1e4)]
        add(Check("corollary_rho_lt_1", all(r < 1 for r in cor), ", ".join(f"{r:.10g}" for r in cor)))
    else:
        add(Check("corollary_rho_lt_1", True, "condition lambda_min(A) > kappa(B)^2/2 not met; nothing to check"))

    upper = b.rhss_upper
    r_in = rhss_radius(sys, 0.9 * upper)
    add(Check("rhss_interval", r_in < 1, f"rho(0.9*2/mu1)={r_in:.6f}"))
    r_opt = rhss_radius(sys, b.alpha_opt_rhss)
    sampled = [upper * f for f in np.linspace(0.05, 0.95, samples)]
    worse = [a for a in sampled if r_opt > rhss_radius(sys, a) + 1e-8]
    add(Check("rhss_alpha_opt", not worse, f"rho(alpha_opt)={r_opt:.6f}"
              + (f"; beaten at {worse}" if worse else "")))

    mp = minpoly_check(sys, 1.0)
    add(Check("minpoly", mp.passed, f"{mp.iterations} iterations, bound {mp.bound}"))

    row = alpha_limit_study(sys, [1e-10])[0]
    add(Check("alpha_limit_interval", row.inside(),
              f"[{row.min_nonunit:.6g}, {row.max_nonunit:.6g}] vs [{row.lower:.6g}, {row.upper:.6g}]"))
    return report


# --- spectrum export -----------------------------------------------------

def sibling_path(path, suffix="_A"):
    p = Path(path)
    return p.with_name(p.stem + suffix + p.suffix)


def export_spectrum(sys: SaddlePointSystem, kind, alpha, path):
    """Write the scatter of P^{-1} calA to ``path`` and that of calA to its ``_A`` sibling."""
    kind = PrecondKind.parse(kind)
    ctx = None
    if kind is not PrecondKind.NONE:
        check_alphas([alpha])
        ctx = build_precond(sys, kind, alpha)
    pre = preconditioned_spectrum(sys, ctx)
    plain = pre if ctx is None else preconditioned_spectrum(sys, None)
    label = sys.label or "system"
    write_scatter(path, f"{label} {kind.label}", None if ctx is None else alpha, pre)
    write_scatter(sibling_path(path), f"{label} A", None, plain)
    return pre, plain


def rows_as_dicts(rows):
    return [asdict(r) for r in rows]
