"""The block saddle point system [[A, B^T], [-B, 0]] (x, y) = (f, g)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DenseLimitExceeded, DimensionMismatch, NotSPD
from .linalg import SYMMETRY_RTOL, SparseMatrix, cholesky, gram, solve_chol, spmv, spmv_t

DENSE_LIMIT = 2000


@dataclass
class BlockVector:
    """A vector split into its velocity-like part ``x`` and multiplier part ``y``.

    Whenever the two parts are flattened, ``x`` comes first.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64).reshape(-1)
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)

    @classmethod
    def zeros(cls, n, m):
        return cls(np.zeros(n), np.zeros(m))

    @classmethod
    def ones(cls, n, m):
        return cls(np.ones(n), np.ones(m))

    @classmethod
    def split(cls, vec, n):
        vec = np.asarray(vec, dtype=np.float64)
        return cls(vec[:n].copy(), vec[n:].copy())

    def concat(self):
        return np.concatenate([self.x, self.y])

    def norm(self):
        return float(np.sqrt(self.x @ self.x + self.y @ self.y))

    def __add__(self, other):
        return BlockVector(self.x + other.x, self.y + other.y)

    def __sub__(self, other):
        return BlockVector(self.x - other.x, self.y - other.y)

    def __mul__(self, c):
        return BlockVector(c * self.x, c * self.y)

    __rmul__ = __mul__

    def __neg__(self):
        return BlockVector(-self.x, -self.y)


@dataclass
class SaddlePointSystem:
    A: SparseMatrix
    B: SparseMatrix
    f: np.ndarray = None
    g: np.ndarray = None
    label: str = ""

    def __post_init__(self):
        if self.f is None:
            self.f = np.zeros(self.A.nrows)
        if self.g is None:
            self.g = np.zeros(self.B.nrows)
        self.f = np.asarray(self.f, dtype=np.float64).reshape(-1)
        self.g = np.asarray(self.g, dtype=np.float64).reshape(-1)

    @property
    def n(self):
        return self.A.nrows

    @property
    def m(self):
        return self.B.nrows

    @property
    def dim(self):
        return self.n + self.m

    @property
    def rhs(self):
        return BlockVector(self.f, self.g)

    def __repr__(self):
        return f"SaddlePointSystem({self.label!r}, n={self.n}, m={self.m})"


def _check_block(sys, u):
    if u.x.size != sys.n or u.y.size != sys.m:
        raise DimensionMismatch(
            f"block vector ({u.x.size}, {u.y.size}) does not match system ({sys.n}, {sys.m})"
        )


def apply_saddle(sys: SaddlePointSystem, u: BlockVector) -> BlockVector:
    """(A x + B^T y, -B x)."""
    _check_block(sys, u)
    return BlockVector(spmv(sys.A, u.x) + spmv_t(sys.B, u.y), -spmv(sys.B, u.x))


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        return "\n".join(
            f"{'PASS' if c.passed else 'FAIL'} {c.name}" + (f": {c.detail}" if c.detail else "")
            for c in self.checks
        )


def validate(sys: SaddlePointSystem) -> ValidationReport:
    """Check the shape, SPD-ness of A and full row rank of B (via Cholesky of B B^T).

    Full row rank already forces m <= n; the square case m = n is accepted.
    """
    report = ValidationReport()
    n, m = sys.n, sys.m
    shape_ok = (
        sys.A.nrows == sys.A.ncols
        and sys.B.ncols == n
        and 0 < m <= n
        and sys.f.size == n
        and sys.g.size == m
    )
    report.checks.append(Check(
        "shape", shape_ok,
        "" if shape_ok else f"A {sys.A.shape}, B {sys.B.shape}, f {sys.f.size}, g {sys.g.size}; need 0 < m <= n",
    ))
    if not shape_ok:
        report.checks.append(Check("spd_A", False, "skipped: bad shape"))
        report.checks.append(Check("rank_B", False, "skipped: bad shape"))
        return report

    asym = sys.A.asymmetry()
    if asym > SYMMETRY_RTOL:
        report.checks.append(Check("spd_A", False, f"A asymmetric (relative {asym:.2e})"))
    else:
        try:
            cholesky(sys.A, "A")
            report.checks.append(Check("spd_A", True))
        except NotSPD as exc:
            report.checks.append(Check("spd_A", False, f"A is not SPD: {exc}"))

    try:
        cholesky(gram(sys.B), "BBt")
        report.checks.append(Check("rank_B", True))
    except NotSPD as exc:
        report.checks.append(Check("rank_B", False, f"B B^T is not SPD, B is rank deficient: {exc}"))
    return report


def rhs_all_ones(sys: SaddlePointSystem) -> BlockVector:
    """Right-hand side whose exact solution is the all-ones vector; stored into sys."""
    b = apply_saddle(sys, BlockVector.ones(sys.n, sys.m))
    sys.f, sys.g = b.x.copy(), b.y.copy()
    return b


def check_dense_size(dim, limit=DENSE_LIMIT):
    if dim > limit:
        raise DenseLimitExceeded(f"dense path limited to dimension {limit}, got {dim}")


def assemble_dense(sys: SaddlePointSystem) -> np.ndarray:
    """The full (n+m) x (n+m) coefficient matrix."""
    check_dense_size(sys.dim)
    A = sys.A.to_dense()
    B = sys.B.to_dense()
    return np.block([[A, B.T], [-B, np.zeros((sys.m, sys.m))]])


def dense_schur(sys: SaddlePointSystem, chol_A=None):
    """(A^{-1} B^T, B A^{-1} B^T) as dense arrays, via m Cholesky solves."""
    check_dense_size(sys.dim)
    chol_A = chol_A or cholesky(sys.A, "A")
    X = solve_chol(chol_A, sys.B.T.to_dense())
    K = sys.B.matmat(X)
    return X, 0.5 * (K + K.T)
