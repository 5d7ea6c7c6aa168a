"""Restarted GMRES with left preconditioning."""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .precond import PrecondContext, PrecondKind, apply_precond, precond_matvec
from .saddle import BlockVector, SaddlePointSystem, apply_saddle

LUCKY_BREAKDOWN = 1e-14
STAGNATION = 1e-16


class Termination(enum.Enum):
    CONVERGED = "converged"
    MAX_RESTARTS = "max_restarts"
    TIMEOUT = "timeout"
    BREAKDOWN = "breakdown"


@dataclass
class GmresConfig:
    restart: int = 30
    rel_tol: float = 1e-12
    max_restarts: int = 500
    max_seconds: float = 3600.0
    record_history: bool = True
    # stop on ||P r_k|| <= tol ||P b|| (forward product) instead of P^{-1}
    literal_stop_rule: bool = False

    def __post_init__(self):
        if self.restart < 1:
            raise ValueError("restart must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if self.max_restarts < 1:
            raise ValueError("max_restarts must be >= 1")


@dataclass
class SolveReport:
    converged: bool
    restarts: int
    total_inner_iterations: int
    final_relres: float
    wall_seconds: float
    termination: Termination
    residual_history: list = field(default_factory=list)
    # index into residual_history where each cycle starts
    cycle_starts: list = field(default_factory=list)

    @property
    def IT(self):
        return self.restarts

    def cycles(self):
        """residual_history split per cycle (the final true residual forms its own segment)."""
        bounds = list(self.cycle_starts) + [len(self.residual_history)]
        return [self.residual_history[a:b] for a, b in zip(bounds[:-1], bounds[1:])]


def _flat_operator(op, n):
    if isinstance(op, SaddlePointSystem):
        sys = op
        op = lambda u: apply_saddle(sys, u)  # noqa: E731

    def apply(v):
        return op(BlockVector(v[:n], v[n:])).concat()

    return apply


def gmres(op, ctx: PrecondContext | None, b: BlockVector, x0: BlockVector | None = None,
          cfg: GmresConfig | None = None):
    """Solve ``op(u) = b`` by GMRES(restart) on ``P^{-1} op(u) = P^{-1} b``.

    ``op`` is a callable on :class:`BlockVector` or a :class:`SaddlePointSystem`;
    ``ctx`` is a :class:`PrecondContext`, ``None`` (no preconditioning) or any
    callable applying a fixed linear preconditioner to a :class:`BlockVector`.
    Arnoldi uses one pass of modified Gram-Schmidt and the least squares
    problem is updated with Givens rotations.  A run stops when
    ``||P^{-1}(b - op(u))|| <= rel_tol ||P^{-1} b||``; convergence is always
    confirmed on a recomputed residual, not the recurrence.

    Returns ``(u, SolveReport)``.  ``restarts`` counts started cycles.
    """
    cfg = cfg or GmresConfig()
    n = b.x.size
    apply_A = _flat_operator(op, n)
    if ctx is None or (isinstance(ctx, PrecondContext) and ctx.kind is PrecondKind.NONE):
        apply_M = np.copy
    elif isinstance(ctx, PrecondContext):
        apply_M = lambda v: apply_precond(ctx, BlockVector(v[:n], v[n:])).concat()  # noqa: E731
    else:
        apply_M = lambda v: ctx(BlockVector(v[:n], v[n:])).concat()  # noqa: E731
    literal = cfg.literal_stop_rule
    if literal and not (ctx is None or isinstance(ctx, PrecondContext)):
        raise ValueError("the literal stop rule needs a PrecondContext (forward product P v)")
    apply_P = lambda v: precond_matvec(ctx, BlockVector(v[:n], v[n:])).concat()  # noqa: E731

    t0 = time.perf_counter()
    bvec = b.concat()
    N = bvec.size
    u = np.zeros(N) if x0 is None else x0.concat().copy()
    ref = np.linalg.norm(apply_P(bvec) if literal else apply_M(bvec))

    history, starts = [], []
    restarts = inner = 0
    prev_start = None
    tol = cfg.rel_tol

    def record(value, start=False):
        if cfg.record_history or start:
            if start:
                starts.append(len(history))
            history.append(value)

    if ref == 0.0:
        u = np.zeros(N)
        record(0.0, start=True)
        return BlockVector.split(u, n), SolveReport(
            True, 0, 0, 0.0, time.perf_counter() - t0, Termination.CONVERGED, history, starts)

    termination = None
    while True:
        r_true = bvec - apply_A(u)
        z = apply_M(r_true)
        beta = np.linalg.norm(z)
        crit = (np.linalg.norm(apply_P(r_true)) if literal else beta) / ref
        record(crit, start=True)
        if crit <= tol:
            termination = Termination.CONVERGED
            break
        if prev_start is not None and (prev_start - crit) <= STAGNATION * prev_start:
            termination = Termination.BREAKDOWN
            break
        if restarts >= cfg.max_restarts:
            termination = Termination.MAX_RESTARTS
            break
        if time.perf_counter() - t0 > cfg.max_seconds:
            termination = Termination.TIMEOUT
            break
        if beta == 0.0:
            # only reachable in literal mode: P^{-1} r = 0 but ||P r|| is not small
            termination = Termination.BREAKDOWN
            break
        prev_start = crit
        restarts += 1

        k_max = cfg.restart
        V = [z / beta]
        AV = []
        H = np.zeros((k_max + 1, k_max))
        cs = np.zeros(k_max)
        sn = np.zeros(k_max)
        g = np.zeros(k_max + 1)
        g[0] = beta
        k = 0
        timed_out = False
        for j in range(k_max):
            av = apply_A(V[j])
            w = apply_M(av)
            inner += 1
            if literal:
                AV.append(av)
            w_norm0 = np.linalg.norm(w)
            for i in range(j + 1):
                h = V[i] @ w
                H[i, j] = h
                w -= h * V[i]
            h_next = np.linalg.norm(w)
            H[j + 1, j] = h_next
            for i in range(j):
                a, c = H[i, j], H[i + 1, j]
                H[i, j] = cs[i] * a + sn[i] * c
                H[i + 1, j] = -sn[i] * a + cs[i] * c
            denom = math.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            k = j + 1
            lucky = h_next <= LUCKY_BREAKDOWN * w_norm0

            if literal:
                y = _triangular(H, g, k)
                r_k = r_true - np.asarray(AV).T @ y
                est = np.linalg.norm(apply_P(r_k)) / ref
            else:
                est = abs(g[k]) / ref
            record(est)
            if est <= tol or lucky:
                break
            if time.perf_counter() - t0 > cfg.max_seconds:
                timed_out = True
                break
            V.append(w / h_next)

        y = _triangular(H, g, k)
        u = u + np.asarray(V[:k]).T @ y
        if timed_out:
            r_true = bvec - apply_A(u)
            z = apply_M(r_true)
            crit = np.linalg.norm(apply_P(r_true) if literal else z) / ref
            record(crit, start=True)
            termination = Termination.CONVERGED if crit <= tol else Termination.TIMEOUT
            break

    report = SolveReport(
        converged=termination is Termination.CONVERGED,
        restarts=restarts,
        total_inner_iterations=inner,
        final_relres=history[-1],
        wall_seconds=time.perf_counter() - t0,
        termination=termination,
        residual_history=history,
        cycle_starts=starts,
    )
    return BlockVector.split(u, n), report


def _triangular(H, g, k):
    R = H[:k, :k]
    diag = np.abs(np.diag(R))
    if k and diag.min() == 0.0:
        # singular least squares: fall back to a minimum-norm solve
        return np.linalg.lstsq(R, g[:k], rcond=None)[0]
    return sla.solve_triangular(R, g[:k], check_finite=False)


def gmres_full(op, ctx, b: BlockVector, x0: BlockVector | None = None, rel_tol: float = 1e-10):
    """Unrestarted GMRES: one cycle may use the whole space dimension."""
    dim = b.x.size + b.y.size
    return gmres(op, ctx, b, x0, GmresConfig(restart=max(dim, 1), rel_tol=rel_tol))
