"""Relaxed HSS-type preconditioners and restarted GMRES for saddle point systems."""
from .errors import (
    Asymmetric, BreakdownNonSPD, DenseLimitExceeded, DimensionMismatch, Diverged, InvalidAlpha,
    MaxIterations, NotSPD, ParseError, RankRepairFailed, RehssError, UnsupportedField,
    ValidationFailed,
)
from .linalg import (
    CholeskyFactor, SparseMatrix, cg_solve, cholesky, congruence_eigs, gram, power_radius,
    shift_diag, solve_chol, spmv, spmv_t, sym_eigs,
)
from .saddle import (
    BlockVector, SaddlePointSystem, ValidationReport, apply_saddle, assemble_dense, rhs_all_ones,
    validate,
)
from .precond import (
    InnerStrategy, PrecondContext, PrecondKind, apply_hss, apply_precond, apply_rehss, apply_rhss,
    build_precond, precond_matvec,
)
from .krylov import GmresConfig, SolveReport, Termination, gmres, gmres_full
from .theory import (
    ConvergenceBounds, IterationReport, compute_bounds, gamma_action, rehss_iterate, rhss_radius,
    spectral_radius_gamma,
)
from .spectral import (
    SpectrumReport, ahat_eigs, alpha_limit_study, general_eigs, minpoly_check,
    preconditioned_spectrum, write_scatter,
)
from .problems import Flow, StokesSpec, generate_stokes, load_system, mm_read, mm_write
from .bench import ExperimentConfig, FileProblem, export_spectrum, run_benchmark, run_sweep, run_theory_report

__version__ = "0.1.0"
