"""
Linear algebra kernels the rest of the package is built on.

Sparse matrices are held in compressed sparse row (CSR) form.  Direct solves
go through a banded Cholesky factorization in natural ordering: no
fill-reducing permutation is applied, so fill is confined to the envelope of
the matrix but the cost grows like ``n * bandwidth**2`` and degrades to the
dense O(n^3) when the bandwidth is O(n).  That is acceptable for the desk-scale
problems this package targets.

Dense matrices are plain 2-D ``numpy`` arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps

from .errors import (
    Asymmetric,
    BreakdownNonSPD,
    DimensionMismatch,
    MaxIterations,
    NotSPD,
)

SYMMETRY_RTOL = 1e-12
PIVOT_FLOOR = 1e-14
JACOBI_RTOL = 1e-12
JACOBI_MAX_SWEEPS = 60
# ||T v|| below this (for a unit v) is treated as an exactly vanishing iterate.
ZERO_ITERATE = 1e-13

LinearOperator = Callable[[np.ndarray], np.ndarray]


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype, copy=True).reshape(-1)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Immutable CSR matrix.

    Within a row the column indices are strictly increasing; duplicates are
    rejected.  Use :meth:`from_triplets` to build one from unordered
    (row, col, value) data, which sums duplicates.
    """

    nrows: int
    ncols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "nrows", int(self.nrows))
        set_(self, "ncols", int(self.ncols))
        set_(self, "row_offsets", _readonly(self.row_offsets, np.int64))
        set_(self, "col_indices", _readonly(self.col_indices, np.int64))
        set_(self, "values", _readonly(self.values, np.float64))
        self._check()
        counts = np.diff(self.row_offsets)
        set_(self, "_row_ids", np.repeat(np.arange(self.nrows, dtype=np.int64), counts))
        set_(self, "_scipy", None)

    def _check(self):
        ro, ci = self.row_offsets, self.col_indices
        if self.nrows < 0 or self.ncols < 0:
            raise ValueError("negative matrix dimension")
        if ro.size != self.nrows + 1 or ro[0] != 0:
            raise ValueError("row_offsets must have length nrows+1 and start at 0")
        if np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        if ro[-1] != ci.size or ci.size != self.values.size:
            raise ValueError("row_offsets[-1], len(col_indices) and len(values) disagree")
        if ci.size:
            if ci.min() < 0 or ci.max() >= self.ncols:
                raise ValueError("column index out of range")
            # consecutive entries of the same row must have increasing columns
            same_row = np.ones(ci.size - 1, dtype=bool)
            starts = ro[1:-1]
            starts = starts[(starts > 0) & (starts < ci.size)]
            same_row[starts - 1] = False
            if np.any(np.diff(ci)[same_row] <= 0):
                raise ValueError("column indices must be strictly increasing within a row")

    # construction -----------------------------------------------------

    @classmethod
    def from_triplets(cls, nrows, ncols, rows, cols, vals):
        rows = np.asarray(rows, dtype=np.int64).reshape(-1)
        cols = np.asarray(cols, dtype=np.int64).reshape(-1)
        vals = np.asarray(vals, dtype=np.float64).reshape(-1)
        if not (rows.size == cols.size == vals.size):
            raise DimensionMismatch("triplet arrays differ in length")
        if rows.size and (rows.min() < 0 or rows.max() >= nrows or cols.min() < 0 or cols.max() >= ncols):
            raise ValueError("triplet index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            new = np.ones(rows.size, dtype=bool)
            new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            group = np.cumsum(new) - 1
            vals = np.bincount(group, weights=vals)
            rows, cols = rows[new], cols[new]
        offsets = np.zeros(nrows + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=nrows), out=offsets[1:])
        return cls(nrows, ncols, offsets, cols, vals)

    @classmethod
    def from_dense(cls, a):
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        rows, cols = np.nonzero(a)
        return cls.from_triplets(a.shape[0], a.shape[1], rows, cols, a[rows, cols])

    @classmethod
    def from_scipy(cls, m):
        m = sps.csr_matrix(m)
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @classmethod
    def identity(cls, n):
        idx = np.arange(n)
        return cls(n, n, np.arange(n + 1), idx, np.ones(n))

    @classmethod
    def zeros(cls, nrows, ncols):
        return cls(nrows, ncols, np.zeros(nrows + 1, dtype=np.int64), [], [])

    # views --------------------------------------------------------------

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self):
        return int(self.values.size)

    def triplets(self):
        return self._row_ids.copy(), self.col_indices.copy(), self.values.copy()

    def to_dense(self):
        out = np.zeros((self.nrows, self.ncols))
        np.add.at(out, (self._row_ids, self.col_indices), self.values)
        return out

    def to_scipy(self):
        if self._scipy is None:
            m = sps.csr_matrix(
                (self.values, self.col_indices, self.row_offsets), shape=self.shape
            )
            object.__setattr__(self, "_scipy", m)
        return self._scipy

    def transpose(self):
        return SparseMatrix.from_triplets(
            self.ncols, self.nrows, self.col_indices, self._row_ids, self.values
        )

    @property
    def T(self):
        return self.transpose()

    def diagonal(self):
        d = np.zeros(min(self.shape))
        mask = self._row_ids == self.col_indices
        d[self._row_ids[mask]] = self.values[mask]
        return d

    def take_rows(self, rows):
        """Return the submatrix made of the given rows, in the given order."""
        rows = np.asarray(rows, dtype=np.int64)
        counts = np.diff(self.row_offsets)[rows]
        offsets = np.zeros(rows.size + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        take = np.concatenate(
            [np.arange(self.row_offsets[r], self.row_offsets[r + 1]) for r in rows]
        ) if rows.size else np.zeros(0, dtype=np.int64)
        return SparseMatrix(rows.size, self.ncols, offsets, self.col_indices[take], self.values[take])

    def scaled(self, c):
        return SparseMatrix(self.nrows, self.ncols, self.row_offsets, self.col_indices, c * self.values)

    def matmat(self, x):
        """Product with a dense matrix (used by the dense verification paths)."""
        return np.asarray(self.to_scipy() @ np.asarray(x, dtype=np.float64))

    def __matmul__(self, x):
        x = np.asarray(x)
        if x.ndim == 1:
            return spmv(self, x)
        return self.matmat(x)

    def frobenius(self):
        return float(np.linalg.norm(self.values))

    def asymmetry(self):
        """Relative Frobenius asymmetry ||M - M^T|| / ||M||."""
        if self.nrows != self.ncols:
            return math.inf
        s = self.to_scipy()
        diff = s - s.T
        scale = self.frobenius()
        num = float(np.linalg.norm(diff.data)) if diff.nnz else 0.0
        return num / scale if scale > 0 else num

    def bandwidth(self):
        """Largest |i - j| over stored entries."""
        if self.nnz == 0:
            return 0
        return int(np.max(np.abs(self._row_ids - self.col_indices)))

    def __repr__(self):
        return f"SparseMatrix({self.nrows}x{self.ncols}, nnz={self.nnz})"


def spmv(M: SparseMatrix, x) -> np.ndarray:
    """y = M x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (M.ncols,):
        raise DimensionMismatch(f"spmv: matrix has {M.ncols} columns, vector has shape {x.shape}")
    return np.bincount(M._row_ids, weights=M.values * x[M.col_indices], minlength=M.nrows)


def spmv_t(M: SparseMatrix, x) -> np.ndarray:
    """y = M^T x, without forming the transpose."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (M.nrows,):
        raise DimensionMismatch(f"spmv_t: matrix has {M.nrows} rows, vector has shape {x.shape}")
    return np.bincount(M.col_indices, weights=M.values * x[M._row_ids], minlength=M.ncols)


def gram(B: SparseMatrix) -> SparseMatrix:
    """B B^T, with the lower triangle mirrored from the upper so it is exactly symmetric."""
    s = B.to_scipy()
    upper = sps.triu(s @ s.T, format="coo")
    strict = upper.row != upper.col
    rows = np.concatenate([upper.row, upper.col[strict]])
    cols = np.concatenate([upper.col, upper.row[strict]])
    vals = np.concatenate([upper.data, upper.data[strict]])
    return SparseMatrix.from_triplets(B.nrows, B.nrows, rows, cols, vals)


def shift_diag(M: SparseMatrix, alpha: float) -> SparseMatrix:
    """alpha I + M."""
    if M.nrows != M.ncols:
        raise DimensionMismatch(f"shift_diag needs a square matrix, got {M.shape}")
    rows, cols, vals = M.triplets()
    d = np.arange(M.nrows)
    return SparseMatrix.from_triplets(
        M.nrows, M.ncols,
        np.concatenate([rows, d]), np.concatenate([cols, d]),
        np.concatenate([vals, np.full(M.nrows, float(alpha))]),
    )


# --------------------------------------------------------------------------
# Cholesky


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """Lower Cholesky factor stored in LAPACK lower-band layout.

    ``lower[k, j]`` holds ``L[j + k, j]`` for ``k = 0..bandwidth``.
    """

    dim: int
    lower: np.ndarray
    source_tag: str = ""

    @property
    def bandwidth(self):
        return self.lower.shape[0] - 1

    def to_dense(self):
        L = np.zeros((self.dim, self.dim))
        for k in range(self.bandwidth + 1):
            idx = np.arange(self.dim - k)
            L[idx + k, idx] = self.lower[k, : self.dim - k]
        return L

    def solve(self, r):
        return solve_chol(self, r)

    def solve_lower(self, r):
        """L^{-1} r (r may be a vector or a matrix of columns)."""
        r = np.asarray(r, dtype=np.float64)
        if r.shape[0] != self.dim:
            raise DimensionMismatch(f"factor has dim {self.dim}, rhs has {r.shape[0]} rows")
        return sla.solve_banded((self.bandwidth, 0), self.lower, r, check_finite=False)


def cholesky(M: SparseMatrix, tag: str = "") -> CholeskyFactor:
    """Banded Cholesky factorization M = L L^T in natural ordering.

    Raises :class:`Asymmetric` when ``||M - M^T||_F > 1e-12 ||M||_F`` and
    :class:`NotSPD` as soon as a pivot is ``<= 1e-14 * max(diag(M))``.
    """
    if M.nrows != M.ncols:
        raise DimensionMismatch(f"cholesky needs a square matrix, got {M.shape}")
    if M.asymmetry() > SYMMETRY_RTOL:
        raise Asymmetric(f"matrix asymmetry {M.asymmetry():.3e} exceeds {SYMMETRY_RTOL}")
    n = M.nrows
    b = M.bandwidth()
    diag = M.diagonal()
    floor = PIVOT_FLOOR * (float(diag.max()) if n else 0.0)

    ab = np.zeros((b + 1, n + b))
    rows, cols, vals = M.triplets()
    low = rows >= cols
    ab[rows[low] - cols[low], cols[low]] = vals[low]

    rr, cc = np.tril_indices(b)
    band_row = rr - cc
    band_col = cc + 1
    for j in range(n):
        d = ab[0, j]
        if not d > floor:
            raise NotSPD(
                f"pivot {d:.3e} at row {j} is not above the floor {floor:.3e}",
                pivot_index=j, pivot=d,
            )
        ljj = math.sqrt(d)
        ab[0, j] = ljj
        if b:
            col = ab[1:, j] / ljj
            ab[1:, j] = col
            ab[band_row, j + band_col] -= col[rr] * col[cc]
    return CholeskyFactor(n, ab[:, :n].copy(), tag)


def solve_chol(F: CholeskyFactor, r) -> np.ndarray:
    """Solve L L^T x = r with the banded triangular solvers."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape[0] != F.dim:
        raise DimensionMismatch(f"factor has dim {F.dim}, rhs has {r.shape[0]} rows")
    if F.dim == 0:
        return r.copy()
    return sla.cho_solve_banded((F.lower, True), r, check_finite=False)


def cg_solve(apply_M: LinearOperator, r, tol: float = 1e-12, maxit: int | None = None):
    """Plain conjugate gradients for M x = r starting from zero.

    Returns ``(x, iterations)``.  Stops once ``||r - M x|| <= tol ||r||``
    (recurrence residual).
    """
    r = np.asarray(r, dtype=np.float64)
    if tol <= 0:
        raise ValueError("tol must be positive")
    maxit = 2 * r.size if maxit is None else maxit
    x = np.zeros_like(r)
    rnorm0 = np.linalg.norm(r)
    if rnorm0 == 0.0:
        return x, 0
    res = r.copy()
    p = res.copy()
    rr = res @ res
    for it in range(1, maxit + 1):
        q = apply_M(p)
        curv = p @ q
        if not curv > 0.0:
            raise BreakdownNonSPD(f"p^T M p = {curv:.3e} at iteration {it}")
        step = rr / curv
        x += step * p
        res -= step * q
        rr_new = res @ res
        if math.sqrt(rr_new) <= tol * rnorm0:
            return x, it
        p = res + (rr_new / rr) * p
        rr = rr_new
    raise MaxIterations(f"CG did not reach {tol:g} in {maxit} iterations", maxit, x)


# --------------------------------------------------------------------------
# eigenvalues


def _round_robin(n):
    """Rounds of disjoint index pairs covering every pair (i, j), i < j, once."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        if pairs:
            p, q = np.array(pairs).T
            rounds.append((p, q))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _check_symmetric(M):
    scale = np.linalg.norm(M)
    asym = np.linalg.norm(M - M.T)
    if asym > SYMMETRY_RTOL * scale:
        raise Asymmetric(f"relative asymmetry {asym / scale:.3e} exceeds {SYMMETRY_RTOL}")


def sym_eigs(M, vectors: bool = False):
    """Eigenvalues (ascending) of a symmetric dense matrix by cyclic Jacobi.

    The rotations of one sweep are grouped in round-robin order so that every
    round applies disjoint, hence commuting, rotations at once.  Sweeps stop
    when the off-diagonal Frobenius norm is below ``1e-12 ||M||_F``.

    With ``vectors=True`` returns ``(w, V)`` with eigenvectors in the columns
    of ``V``.
    """
    M = np.array(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"sym_eigs needs a square matrix, got shape {M.shape}")
    _check_symmetric(M)
    n = M.shape[0]
    a = 0.5 * (M + M.T)
    V = np.eye(n) if vectors else None
    scale = np.linalg.norm(a)
    target = JACOBI_RTOL * scale

    def off_norm():
        off = a.copy()
        np.fill_diagonal(off, 0.0)
        return float(np.linalg.norm(off))

    # entries this small cannot matter for the stopping test; skipping them avoids overflow in tau
    negligible = 1e-3 * target / max(n, 1)

    rounds = _round_robin(n)
    sweeps = 0
    while n > 1 and scale > 0 and off_norm() > target:
        if sweeps == JACOBI_MAX_SWEEPS:
            raise MaxIterations(f"Jacobi did not converge in {sweeps} sweeps", sweeps)
        sweeps += 1
        for p, q in rounds:
            apq = a[p, q]
            active = np.abs(apq) > negligible
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            tau = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            ap, aq = a[p, :], a[q, :]
            a[p, :], a[q, :] = c[:, None] * ap - s[:, None] * aq, s[:, None] * ap + c[:, None] * aq
            ap, aq = a[:, p], a[:, q]
            a[:, p], a[:, q] = ap * c - aq * s, ap * s + aq * c
            a[p, q] = 0.0
            a[q, p] = 0.0
            if V is not None:
                vp, vq = V[:, p], V[:, q]
                V[:, p], V[:, q] = vp * c - vq * s, vp * s + vq * c
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    if vectors:
        return w[order], V[:, order]
    return w[order]


def congruence_eigs(K, F: CholeskyFactor):
    """Eigenvalues of M^{-1} K for symmetric K and SPD M = L L^T.

    Computed as the eigenvalues of the symmetric L^{-1} K L^{-T}, so they
    are real by construction.
    """
    Y = F.solve_lower(np.asarray(K, dtype=np.float64))
    C = F.solve_lower(Y.T)
    return sym_eigs(0.5 * (C + C.T))


def power_start(dim):
    """Deterministic start vector: all ones plus index-dependent 1e-3 offsets."""
    v = 1.0 + 1e-3 * np.cos(np.arange(1, dim + 1, dtype=np.float64))
    return v / np.linalg.norm(v)


def power_radius(apply_T: LinearOperator, dim: int, tol: float = 1e-10, maxit: int = 100_000) -> float:
    """Estimate the spectral radius of T by power iteration.

    Each step applies T twice and uses ``sqrt(||T^2 v|| / ||v||)`` as the
    modulus estimate, which also converges when the dominant eigenvalues form
    a +/- pair of equal modulus.  Returns 0 when an iterate vanishes (the
    operator annihilates the start vector, e.g. a nilpotent T).
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")
    v = power_start(dim)
    prev = None
    for it in range(1, maxit + 1):
        w = apply_T(v)
        nw = np.linalg.norm(w)
        if nw <= ZERO_ITERATE:
            return 0.0
        z = apply_T(w / nw)
        nz = np.linalg.norm(z)
        if nz <= ZERO_ITERATE:
            return 0.0
        est = math.sqrt(nw * nz)
        if prev is not None and abs(est - prev) <= tol * est:
            return est
        prev = est
        v = z / nz
    raise MaxIterations(f"power iteration did not settle to {tol:g} in {maxit} steps", maxit, prev)
