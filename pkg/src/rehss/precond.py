"""
HSS, RHSS and REHSS preconditioners for the saddle point system.

Every preconditioner is set up once by :func:`build_precond`, which factors
the symmetric positive definite sub-systems it needs, and then applied any
number of times through :func:`apply_precond`.  The forward products
``P v`` are available through :func:`precond_matvec`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import partial

import numpy as np

from .errors import InvalidAlpha
from .linalg import CholeskyFactor, cg_solve, cholesky, gram, shift_diag, spmv, spmv_t
from .saddle import BlockVector, SaddlePointSystem, _check_block


class PrecondKind(enum.Enum):
    NONE = "none"
    HSS = "hss"
    RHSS = "rhss"
    REHSS = "rehss"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown preconditioner {value!r}; choose from {[k.value for k in cls]}"
            ) from None

    @property
    def label(self):
        return "none" if self is PrecondKind.NONE else self.name


@dataclass(frozen=True)
class InnerStrategy:
    """How the SPD sub-systems are solved: Cholesky (``direct``) or CG."""

    mode: str = "direct"
    cg_tol: float = 1e-13
    cg_maxit: int | None = None  # None means 2 * dimension

    def __post_init__(self):
        if self.mode not in ("direct", "cg"):
            raise ValueError(f"inner mode must be 'direct' or 'cg', got {self.mode!r}")
        if not 0 < self.cg_tol <= 1e-6:
            raise ValueError("cg_tol must lie in (0, 1e-6]")


class _SPDSolver:
    """Solve with one SPD block, either by a stored factor or by CG."""

    def __init__(self, factor=None, matvec=None, dim=0, inner=None):
        self.factor = factor
        self.matvec = matvec
        self.dim = dim
        self.inner = inner

    def __call__(self, r):
        if self.factor is not None:
            return self.factor.solve(r)
        x, _ = cg_solve(self.matvec, r, self.inner.cg_tol, self.inner.cg_maxit or 2 * self.dim)
        return x


@dataclass(frozen=True, eq=False)
class PrecondContext:
    kind: PrecondKind
    alpha: float
    sys: SaddlePointSystem
    inner: InnerStrategy
    chol_A: CholeskyFactor | None = None
    chol_A_shift: CholeskyFactor | None = None
    chol_S: CholeskyFactor | None = None
    chol_BBt: CholeskyFactor | None = None
    chol_HSS_schur: CholeskyFactor | None = None
    _solvers: dict = None

    def solver(self, name):
        return self._solvers[name]


def _normal_matvec(B, shift, v):
    return shift * v + spmv(B, spmv_t(B, v))


def _shifted_matvec(A, shift, v):
    return spmv(A, v) + shift * v


def build_precond(sys: SaddlePointSystem, kind, alpha: float = 1.0, inner: InnerStrategy | None = None) -> PrecondContext:
    """Prepare a preconditioner of the requested kind.

    Direct mode factors exactly the blocks the kind needs:

    * HSS:   A + alpha I and alpha^2 I + B B^T
    * RHSS:  A and B B^T
    * REHSS: A and alpha I + B B^T

    CG mode factors nothing and solves the same blocks matrix-free.
    """
    kind = PrecondKind.parse(kind)
    alpha = float(alpha)
    if not alpha > 0 or not np.isfinite(alpha):
        raise InvalidAlpha(f"alpha must be a positive finite number, got {alpha!r}")
    inner = inner or InnerStrategy()
    A, B = sys.A, sys.B
    n, m = sys.n, sys.m

    # name -> (tag, sparse matrix builder, matrix-free matvec, dimension)
    blocks = {
        PrecondKind.NONE: {},
        PrecondKind.HSS: {
            "A_shift": (lambda: shift_diag(A, alpha), partial(_shifted_matvec, A, alpha), n),
            "HSS_schur": (lambda: shift_diag(gram(B), alpha * alpha), partial(_normal_matvec, B, alpha * alpha), m),
        },
        PrecondKind.RHSS: {
            "A": (lambda: A, partial(_shifted_matvec, A, 0.0), n),
            "BBt": (lambda: gram(B), partial(_normal_matvec, B, 0.0), m),
        },
        PrecondKind.REHSS: {
            "A": (lambda: A, partial(_shifted_matvec, A, 0.0), n),
            "S": (lambda: shift_diag(gram(B), alpha), partial(_normal_matvec, B, alpha), m),
        },
    }[kind]

    factors = {}
    solvers = {}
    for name, (make, matvec, dim) in blocks.items():
        if inner.mode == "direct":
            factors[name] = cholesky(make(), name)
            solvers[name] = _SPDSolver(factor=factors[name])
        else:
            solvers[name] = _SPDSolver(matvec=matvec, dim=dim, inner=inner)

    return PrecondContext(
        kind=kind, alpha=alpha, sys=sys, inner=inner,
        chol_A=factors.get("A"),
        chol_A_shift=factors.get("A_shift"),
        chol_S=factors.get("S"),
        chol_BBt=factors.get("BBt"),
        chol_HSS_schur=factors.get("HSS_schur"),
        _solvers=solvers,
    )


def _expect(ctx, kind):
    if ctx.kind is not kind:
        raise ValueError(f"context was built for {ctx.kind.label}, not {kind.label}")


def apply_rehss(ctx: PrecondContext, r: BlockVector) -> BlockVector:
    """z = P_REHSS^{-1} r, P_REHSS = [[A, A B^T], [-B, alpha I]].

    1. solve A w1 = r1
    2. solve (alpha I + B B^T) w2 = B w1 + r2
    3. z2 = w2
    4. z1 = w1 - B^T w2
    """
    _expect(ctx, PrecondKind.REHSS)
    B = ctx.sys.B
    w1 = ctx.solver("A")(r.x)
    w2 = ctx.solver("S")(spmv(B, w1) + r.y)
    return BlockVector(w1 - spmv_t(B, w2), w2)


def apply_rhss(ctx: PrecondContext, r: BlockVector) -> BlockVector:
    """z = P_RHSS^{-1} r, P_RHSS = [[A, (1/alpha) A B^T], [-B, 0]]."""
    _expect(ctx, PrecondKind.RHSS)
    B, alpha = ctx.sys.B, ctx.alpha
    w1 = ctx.solver("A")(r.x)
    z2 = alpha * ctx.solver("BBt")(spmv(B, w1) + r.y)
    return BlockVector(w1 - spmv_t(B, z2) / alpha, z2)


def apply_hss(ctx: PrecondContext, r: BlockVector) -> BlockVector:
    """z = P_HSS^{-1} r, P_HSS = (1/alpha)(alpha I + H)(alpha I + S)."""
    _expect(ctx, PrecondKind.HSS)
    B, alpha = ctx.sys.B, ctx.alpha
    u1 = ctx.solver("A_shift")(r.x)
    u2 = r.y / alpha
    z2 = ctx.solver("HSS_schur")(alpha * alpha * u2 + alpha * spmv(B, u1))
    return BlockVector(u1 - spmv_t(B, z2) / alpha, z2)


_APPLY = {
    PrecondKind.HSS: apply_hss,
    PrecondKind.RHSS: apply_rhss,
    PrecondKind.REHSS: apply_rehss,
}


def apply_precond(ctx: PrecondContext | None, r: BlockVector) -> BlockVector:
    """Dispatch on ``ctx.kind``; ``None`` (or kind NONE) is the identity."""
    if ctx is None or ctx.kind is PrecondKind.NONE:
        return BlockVector(r.x.copy(), r.y.copy())
    _check_block(ctx.sys, r)
    return _APPLY[ctx.kind](ctx, r)


def precond_matvec(ctx: PrecondContext | None, v: BlockVector) -> BlockVector:
    """The forward product P v."""
    if ctx is None or ctx.kind is PrecondKind.NONE:
        return BlockVector(v.x.copy(), v.y.copy())
    A, B, alpha = ctx.sys.A, ctx.sys.B, ctx.alpha
    bty = spmv_t(B, v.y)
    bx = spmv(B, v.x)
    if ctx.kind is PrecondKind.REHSS:
        return BlockVector(spmv(A, v.x + bty), -bx + alpha * v.y)
    if ctx.kind is PrecondKind.RHSS:
        return BlockVector(spmv(A, v.x + bty / alpha), -bx)
    return BlockVector(spmv(A, v.x + bty / alpha) + alpha * v.x + bty, -bx + alpha * v.y)
