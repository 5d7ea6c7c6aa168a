"""
The REHSS stationary iteration and the convergence bounds around it.

The iteration matrix is never assembled on the iterative paths: it is only
applied, as ``u - P^{-1} (calA u)``.  Functions that need spectra of dense
matrices (bounds, radii checks) are limited to desk-scale systems.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import Diverged, InvalidAlpha
from .linalg import cholesky, congruence_eigs, gram, power_radius, sym_eigs
from .precond import InnerStrategy, PrecondKind, apply_precond, build_precond
from .saddle import BlockVector, SaddlePointSystem, apply_saddle, check_dense_size, dense_schur

DIVERGENCE_FACTOR = 1e6


@dataclass
class ConvergenceBounds:
    delta: float           # largest eigenvalue of Q = B (A^{-1}/2 - I) B^T
    theta: float           # sigma_max(B)^2 / (2 lambda_min(A)) - sigma_min(B)^2
    lambda_min_A: float
    lambda_max_A: float
    sigma_min_B: float
    sigma_max_B: float
    mu1: float             # extreme eigenvalues of (B B^T)^{-1} B A^{-1} B^T
    mu_m: float
    alpha_opt_rhss: float
    rhss_upper: float      # RHSS converges for 0 < alpha < 2 / mu1
    corollary_holds: bool  # lambda_min(A) > kappa(B)^2 / 2

    @property
    def kappa_B(self):
        return self.sigma_max_B / self.sigma_min_B

    @property
    def rehss_threshold(self):
        """Any alpha above this makes the REHSS iteration convergent."""
        return max(self.delta, 0.0)


@dataclass
class IterationReport:
    converged: bool
    iterations: int
    error_history: list = field(default_factory=list)
    rho_estimate: float = math.nan


def _check_alpha(alpha):
    if not alpha > 0:
        raise InvalidAlpha(f"alpha must be positive, got {alpha!r}")


def gamma_action(sys: SaddlePointSystem, ctx, u: BlockVector) -> BlockVector:
    """Apply the REHSS iteration matrix: u - P^{-1} (calA u)."""
    if ctx.kind is not PrecondKind.REHSS:
        raise ValueError(f"gamma_action needs a REHSS context, got {ctx.kind.label}")
    return u - apply_precond(ctx, apply_saddle(sys, u))


def _iteration_operator(sys, ctx):
    n = sys.n

    def apply(v):
        u = BlockVector(v[:n], v[n:])
        return (u - apply_precond(ctx, apply_saddle(sys, u))).concat()

    return apply


def rehss_iterate(sys: SaddlePointSystem, alpha: float, u0: BlockVector | None = None,
                  tol: float = 1e-10, maxit: int = 10_000, b: BlockVector | None = None,
                  inner: InnerStrategy | None = None,
                  divergence_factor: float = DIVERGENCE_FACTOR):
    """Run u <- u + P^{-1}(b - calA u) until ``||b - calA u|| <= tol ||b||``.

    ``b`` defaults to the system right-hand side.  The history holds the
    relative residual norms, starting with that of ``u0``.  Raises
    :class:`Diverged` once the residual exceeds ``divergence_factor`` times
    the initial one.
    """
    _check_alpha(alpha)
    ctx = build_precond(sys, PrecondKind.REHSS, alpha, inner)
    b = sys.rhs if b is None else b
    u = BlockVector.zeros(sys.n, sys.m) if u0 is None else BlockVector(u0.x.copy(), u0.y.copy())
    bnorm = b.norm() or 1.0
    r = b - apply_saddle(sys, u)
    res0 = r.norm()
    history = [res0 / bnorm]
    it = 0
    while history[-1] > tol and it < maxit:
        u = u + apply_precond(ctx, r)
        r = b - apply_saddle(sys, u)
        it += 1
        history.append(r.norm() / bnorm)
        if r.norm() > divergence_factor * max(res0, np.finfo(float).tiny):
            raise Diverged(f"residual grew by more than {divergence_factor:g} after {it} steps")
    return u, IterationReport(history[-1] <= tol, it, history, _rate(history))


def _rate(history, window=10):
    h = [v for v in history if v > 0]
    if len(h) < 2:
        return 0.0
    tail = h[-(window + 1):]
    return float((tail[-1] / tail[0]) ** (1.0 / (len(tail) - 1)))


def spectral_radius_gamma(sys: SaddlePointSystem, alpha: float, tol: float = 1e-10,
                          maxit: int = 200_000, inner: InnerStrategy | None = None) -> float:
    """Power-method estimate of the spectral radius of the REHSS iteration matrix."""
    _check_alpha(alpha)
    ctx = build_precond(sys, PrecondKind.REHSS, alpha, inner)
    return power_radius(_iteration_operator(sys, ctx), sys.dim, tol, maxit)


def rhss_radius(sys: SaddlePointSystem, alpha: float, tol: float = 1e-12,
                maxit: int = 200_000) -> float:
    """Power-method estimate of the spectral radius of I - P_RHSS^{-1} calA."""
    _check_alpha(alpha)
    ctx = build_precond(sys, PrecondKind.RHSS, alpha)
    n = sys.n

    def apply(v):
        u = BlockVector(v[:n], v[n:])
        return (u - apply_precond(ctx, apply_saddle(sys, u))).concat()

    return power_radius(apply, sys.dim, tol, maxit)


def compute_bounds(sys: SaddlePointSystem) -> ConvergenceBounds:
    """Dense evaluation of every bound quantity (desk scale only)."""
    check_dense_size(sys.dim)
    chol_A = cholesky(sys.A, "A")
    _, K = dense_schur(sys, chol_A)
    G = gram(sys.B)
    Gd = G.to_dense()

    delta = float(sym_eigs(0.5 * K - Gd)[-1])
    lam_A = sym_eigs(sys.A.to_dense())
    sig2 = sym_eigs(Gd)
    sigma_min, sigma_max = math.sqrt(max(sig2[0], 0.0)), math.sqrt(max(sig2[-1], 0.0))
    theta = 0.5 * sig2[-1] / lam_A[0] - sig2[0]
    mu = congruence_eigs(K, cholesky(G, "BBt"))
    mu1, mu_m = float(mu[-1]), float(mu[0])
    return ConvergenceBounds(
        delta=delta,
        theta=float(theta),
        lambda_min_A=float(lam_A[0]),
        lambda_max_A=float(lam_A[-1]),
        sigma_min_B=sigma_min,
        sigma_max_B=sigma_max,
        mu1=mu1,
        mu_m=mu_m,
        alpha_opt_rhss=2.0 / (mu1 + mu_m),
        rhss_upper=2.0 / mu1,
        corollary_holds=bool(lam_A[0] > 0.5 * (sigma_max / sigma_min) ** 2),
    )
