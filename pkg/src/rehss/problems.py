"""
Stokes test problems and Matrix Market I/O.

The generator discretizes -Lap(u) + grad(p) = f, div(u) = 0 on [-1, 1]^2 with
the marker-and-cell (staggered) finite difference scheme on an N x N grid of
square cells, h = 2/N:

* u lives on vertical cell faces, v on horizontal faces, p at cell centres;
* A is the 5-point Dirichlet Laplacian (scaled by 1/h^2) on the interior u
  and v faces, with ghost values mirrored through the walls for the
  tangential components;
* B is the cell divergence (scaled by 1/h) restricted to interior faces.

With ``scaling="fv"`` (the default) both equations are additionally
integrated over their control volumes, i.e. multiplied by h^2.  This gives
A entries of order one and B entries of order h, the same scaling as a
finite element assembly.  ``scaling="fd"`` keeps the raw 1/h^2 and 1/h
difference quotients.  The preconditioners here are not scale invariant,
so the choice changes iteration counts.

The pressure gradient B^T annihilates constants, so B has a one-dimensional
left null space; dropping the leading pressure row restores full rank.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    NotSPD,
    ParseError,
    RankRepairFailed,
    UnsupportedField,
    ValidationFailed,
)
from .linalg import SparseMatrix, cholesky, gram
from .saddle import SaddlePointSystem, rhs_all_ones, validate


class Flow(enum.Enum):
    LID_DRIVEN = "lid"
    CHANNEL = "channel"
    COLLIDING = "colliding"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"lid-driven": "lid", "cavity": "lid", "lid_driven": "lid"}
        value = str(value).strip().lower()
        return cls(aliases.get(value, value))


SCALINGS = ("fv", "fd")


@dataclass(frozen=True)
class StokesSpec:
    cells_per_side: int
    flow: Flow = Flow.LID_DRIVEN
    drop_rows: int = 1
    scaling: str = "fv"

    def __post_init__(self):
        object.__setattr__(self, "flow", Flow.parse(self.flow))
        if self.scaling not in SCALINGS:
            raise ValueError(f"scaling must be one of {SCALINGS}, got {self.scaling!r}")
        if self.cells_per_side < 4:
            raise ValueError("cells_per_side must be at least 4")
        if self.drop_rows not in (0, 1, 2):
            raise ValueError("drop_rows must be 0, 1 or 2")

    @property
    def h(self):
        return 2.0 / self.cells_per_side


def _boundary_velocity(flow, x, y):
    """Velocity prescribed on the boundary, evaluated at points (x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if flow is Flow.LID_DRIVEN:
        # leaky lid: u = 1 along the whole top edge, corners included
        return np.where(np.isclose(y, 1.0), 1.0, 0.0), np.zeros_like(x)
    if flow is Flow.CHANNEL:
        on_ends = np.isclose(np.abs(x), 1.0)
        return np.where(on_ends, 1.0 - y * y, 0.0), np.zeros_like(x)
    return 20.0 * x * y**3, 5.0 * x**4 - 5.0 * y**4


def stokes_blocks(spec: StokesSpec):
    """Assemble (A, B, f, g) without any rank repair (all N^2 pressure rows)."""
    N = spec.cells_per_side
    h = spec.h
    inv_h2 = 1.0 / (h * h)
    coords = -1.0 + h * np.arange(N + 1)        # face positions
    centres = -1.0 + h * (np.arange(N) + 0.5)   # cell centres
    bc = lambda x, y: _boundary_velocity(spec.flow, x, y)  # noqa: E731

    nu = (N - 1) * N
    nv = N * (N - 1)

    def uid(i, j):  # vertical face i = 1..N-1, cell row j = 0..N-1
        return j * (N - 1) + (i - 1)

    def vid(i, j):  # cell column i = 0..N-1, horizontal face j = 1..N-1
        return nu + (j - 1) * N + i

    rows, cols, vals = [], [], []
    f = np.zeros(nu + nv)

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    # u equations
    for j in range(N):
        for i in range(1, N):
            r = uid(i, j)
            x, y = coords[i], centres[j]
            diag = 2.0
            for ii in (i - 1, i + 1):
                if 1 <= ii <= N - 1:
                    add(r, uid(ii, j), -inv_h2)
                else:
                    f[r] += bc(coords[ii], y)[0] * inv_h2
            for jj, wall in ((j - 1, -1.0), (j + 1, 1.0)):
                if 0 <= jj <= N - 1:
                    add(r, uid(i, jj), -inv_h2)
                    diag += 1.0
                else:
                    # ghost u = 2 u_wall - u: adds 2 to the diagonal coefficient
                    diag += 2.0
                    f[r] += 2.0 * bc(x, wall)[0] * inv_h2
            add(r, r, diag * inv_h2)

    # v equations
    for j in range(1, N):
        for i in range(N):
            r = vid(i, j)
            x, y = centres[i], coords[j]
            diag = 2.0
            for jj in (j - 1, j + 1):
                if 1 <= jj <= N - 1:
                    add(r, vid(i, jj), -inv_h2)
                else:
                    f[r] += bc(x, coords[jj])[1] * inv_h2
            for ii, wall in ((i - 1, -1.0), (i + 1, 1.0)):
                if 0 <= ii <= N - 1:
                    add(r, vid(ii, j), -inv_h2)
                    diag += 1.0
                else:
                    diag += 2.0
                    f[r] += 2.0 * bc(wall, y)[1] * inv_h2
            add(r, r, diag * inv_h2)

    A = SparseMatrix.from_triplets(nu + nv, nu + nv, rows, cols, vals)

    # divergence; boundary face contributions go to g (-B x = g)
    rows, cols, vals = [], [], []
    g = np.zeros(N * N)
    inv_h = 1.0 / h
    for j in range(N):
        for i in range(N):
            p = j * N + i
            for ii, sign in ((i, -1.0), (i + 1, 1.0)):
                if 1 <= ii <= N - 1:
                    rows.append(p), cols.append(uid(ii, j)), vals.append(sign * inv_h)
                else:
                    g[p] += sign * inv_h * bc(coords[ii], centres[j])[0]
            for jj, sign in ((j, -1.0), (j + 1, 1.0)):
                if 1 <= jj <= N - 1:
                    rows.append(p), cols.append(vid(i, jj)), vals.append(sign * inv_h)
                else:
                    g[p] += sign * inv_h * bc(centres[i], coords[jj])[1]
    B = SparseMatrix.from_triplets(N * N, nu + nv, rows, cols, vals)
    if spec.scaling == "fv":
        # integrate both equations over their control volumes (area h^2)
        A, f = A.scaled(h * h), f * (h * h)
        B, g = B.scaled(h * h), g * (h * h)
    return A, B, f, g


def generate_stokes(spec: StokesSpec) -> SaddlePointSystem:
    """MAC Stokes system with the leading ``drop_rows`` pressure rows removed.

    n = 2N(N-1), m = N^2 - drop_rows.  The right-hand side carries the
    boundary data of the chosen flow; benchmarks overwrite it with the
    all-ones construction.
    """
    A, B, f, g = stokes_blocks(spec)
    keep = np.arange(spec.drop_rows, B.nrows)
    B = B.take_rows(keep)
    g = g[keep]
    try:
        cholesky(gram(B), "BBt")
    except NotSPD as exc:
        raise RankRepairFailed(
            f"B B^T still singular after dropping {spec.drop_rows} row(s); increase drop_rows ({exc})"
        ) from exc
    N = spec.cells_per_side
    return SaddlePointSystem(A, B, f, g, label=f"MAC-{spec.scaling}-{spec.flow.value}-{N}x{N}")


# --------------------------------------------------------------------------
# Matrix Market

_HEADER = re.compile(r"^%%MatrixMarket\s+(\S+)\s+(\S+)\s+(\S+)\s+(\S+)\s*$", re.IGNORECASE)


def mm_write(M: SparseMatrix, path, comment: str | None = None):
    """Write M as a general real coordinate Matrix Market file (1-based, 17 digits)."""
    rows, cols, vals = M.triplets()
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{M.nrows} {M.ncols} {M.nnz}\n")
        for i, j, v in zip(rows + 1, cols + 1, vals):
            fh.write(f"{i} {j} {v:.17g}\n")


def mm_read(path) -> SparseMatrix:
    """Read a real (or integer) coordinate Matrix Market file.

    ``symmetric`` files store one triangle; the mirror entries are added on
    read.  Duplicate entries are summed.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    head = _HEADER.match(lines[0].strip())
    if head is None:
        raise ParseError("missing %%MatrixMarket header", 1)
    obj, fmt, fld, sym = (s.lower() for s in head.groups())
    if obj != "matrix" or fmt != "coordinate":
        raise UnsupportedField(f"only 'matrix coordinate' files are supported, got '{obj} {fmt}'")
    if fld not in ("real", "integer", "double"):
        raise UnsupportedField(f"field '{fld}' is not supported")
    if sym not in ("general", "symmetric"):
        raise UnsupportedField(f"symmetry '{sym}' is not supported")

    lineno = 1
    size = None
    rows, cols, vals = [], [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        text = raw.strip()
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        if size is None:
            if len(parts) != 3:
                raise ParseError(f"size line needs 3 integers, got {text!r}", lineno)
            try:
                size = tuple(int(p) for p in parts)
            except ValueError:
                raise ParseError(f"bad size line {text!r}", lineno) from None
            if min(size) < 0:
                raise ParseError("negative size", lineno)
            continue
        if len(parts) != 3:
            raise ParseError(f"entry needs 'row col value', got {text!r}", lineno)
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(f"bad entry {text!r}", lineno) from None
        if not (1 <= i <= size[0] and 1 <= j <= size[1]):
            raise ParseError(f"entry ({i}, {j}) outside {size[0]}x{size[1]}", lineno)
        if sym == "symmetric" and j > i:
            raise ParseError(f"symmetric file stores upper entry ({i}, {j})", lineno)
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
    if size is None:
        raise ParseError("missing size line", lineno)
    if len(vals) != size[2]:
        raise ParseError(f"header announces {size[2]} entries, found {len(vals)}", lineno)

    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if sym == "symmetric":
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )
    return SparseMatrix.from_triplets(size[0], size[1], rows, cols, vals)


def load_system(path_A, path_B, drop_rows: int = 0, label: str | None = None) -> SaddlePointSystem:
    """Read A and B, drop the leading rows of B, set the all-ones rhs and validate."""
    A = mm_read(path_A)
    B = mm_read(path_B)
    if A.nrows != A.ncols or B.ncols != A.nrows:
        raise DimensionMismatch(f"A is {A.shape} and B is {B.shape}; need B to have n columns")
    if not 0 <= drop_rows < B.nrows:
        raise ValueError(f"drop_rows={drop_rows} invalid for B with {B.nrows} rows")
    B = B.take_rows(np.arange(drop_rows, B.nrows))
    sys = SaddlePointSystem(A, B, label=label or Path(path_A).stem)
    rhs_all_ones(sys)
    report = validate(sys)
    if not report.ok:
        hint = ""
        if any(c.name == "rank_B" for c in report.failures()):
            hint = f"; B looks rank deficient, try a larger drop_rows (currently {drop_rows})"
        raise ValidationFailed(f"system from {path_A}, {path_B} failed validation{hint}\n{report}", report)
    return sys
