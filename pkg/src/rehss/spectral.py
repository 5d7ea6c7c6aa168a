"""
Eigenvalue studies of the preconditioned saddle operator at desk scale.

The REHSS spectrum is built from its block triangular structure and needs
only symmetric machinery.  HSS, RHSS and unpreconditioned spectra are
general nonsymmetric problems; they go through balancing, Hessenberg
reduction and a Francis double-shift QR iteration (``hqr``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .errors import DenseLimitExceeded, InvalidAlpha, MaxIterations
from .krylov import gmres_full
from .linalg import cholesky, gram, shift_diag, sym_eigs, congruence_eigs
from .precond import PrecondKind, apply_precond, build_precond
from .saddle import BlockVector, SaddlePointSystem, apply_saddle, check_dense_size, dense_schur

GENERAL_LIMIT = 800
AT_ONE_TOL = 1e-8
HQR_MAX_ITS = 60


@dataclass
class SpectrumReport:
    eigenvalues_real: list = field(default_factory=list)
    eigenvalues_imag: list = field(default_factory=list)
    n_at_one: int = 0
    cluster_radius_90: float = 0.0
    min_real: float = math.nan
    max_real: float = math.nan

    @classmethod
    def from_values(cls, values, at_one_tol=AT_ONE_TOL):
        z = np.asarray(values, dtype=np.complex128)
        order = np.lexsort((z.imag, z.real))
        z = z[order]
        dist = np.abs(z - 1.0)
        return cls(
            eigenvalues_real=[float(v) for v in z.real],
            eigenvalues_imag=[float(v) for v in z.imag],
            n_at_one=int(np.count_nonzero(dist <= at_one_tol)),
            cluster_radius_90=float(np.percentile(dist, 90)) if z.size else 0.0,
            min_real=float(z.real.min()) if z.size else math.nan,
            max_real=float(z.real.max()) if z.size else math.nan,
        )

    @property
    def values(self):
        return np.asarray(self.eigenvalues_real) + 1j * np.asarray(self.eigenvalues_imag)

    def __len__(self):
        return len(self.eigenvalues_real)


def ahat_eigs(sys: SaddlePointSystem, alpha: float) -> np.ndarray:
    """Eigenvalues of (alpha I + B B^T)^{-1} B A^{-1} B^T, ascending, all real."""
    if not alpha > 0:
        raise InvalidAlpha(f"alpha must be positive, got {alpha!r}")
    _, K = dense_schur(sys)
    S = cholesky(shift_diag(gram(sys.B), alpha), "S")
    return congruence_eigs(K, S)


# --- general eigenvalues -------------------------------------------------

def balance(a, radix=2.0):
    """Diagonal similarity scaling that evens out row and column norms (in place)."""
    n = a.shape[0]
    sqrdx = radix * radix
    done = False
    while not done:
        done = True
        for i in range(n):
            c = np.abs(a[:, i]).sum() - abs(a[i, i])
            r = np.abs(a[i, :]).sum() - abs(a[i, i])
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= sqrdx
            g = r * radix
            while c > g:
                f /= radix
                c /= sqrdx
            if (c + r) / f < 0.95 * s:
                done = False
                a[i, :] /= f
                a[:, i] *= f
    return a


def hqr(h):
    """Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR.

    ``h`` is overwritten.  Small subdiagonal entries are deflated, 1x1 and
    2x2 trailing blocks give the eigenvalues directly, and exceptional
    shifts are taken after 10 and 20 stalled iterations.
    """
    a = h
    n = a.shape[0]
    wr = np.zeros(n)
    wi = np.zeros(n)
    eps = np.finfo(float).eps
    anorm = float(np.abs(np.triu(a, -1)).sum())
    nn = n - 1
    t = 0.0
    while nn >= 0:
        its = 0
        while True:
            l = nn
            while l >= 1:
                s = abs(a[l - 1, l - 1]) + abs(a[l, l])
                if s == 0.0:
                    s = anorm
                if abs(a[l, l - 1]) <= eps * s:
                    a[l, l - 1] = 0.0
                    break
                l -= 1
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                nn -= 1
                break
            y = a[nn - 1, nn - 1]
            w = a[nn, nn - 1] * a[nn - 1, nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1] = -z
                    wi[nn] = z
                nn -= 2
                break
            if its == HQR_MAX_ITS:
                raise MaxIterations(f"hqr: no convergence at index {nn}", its)
            if its in (10, 20):
                t += x
                a[np.arange(nn + 1), np.arange(nn + 1)] -= x
                s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                x = y = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            # look for two consecutive small subdiagonal elements
            m = nn - 2
            while m >= l:
                z = a[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                q = a[m + 1, m + 1] - z - r - s
                r = a[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                if u <= eps * v:
                    break
                m -= 1
            for i in range(m, nn - 1):
                a[i + 2, i] = 0.0
                if i != m:
                    a[i + 2, i - 1] = 0.0
            # double QR step on rows l..nn, columns m..nn
            for k in range(m, nn):
                if k != m:
                    p = a[k, k - 1]
                    q = a[k + 1, k - 1]
                    r = a[k + 2, k - 1] if k + 1 != nn else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        a[k, k - 1] = -a[k, k - 1]
                else:
                    a[k, k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                rows = a[k, k:nn + 1] + q * a[k + 1, k:nn + 1]
                if k + 1 != nn:
                    rows += r * a[k + 2, k:nn + 1]
                    a[k + 2, k:nn + 1] -= rows * z
                a[k + 1, k:nn + 1] -= rows * y
                a[k, k:nn + 1] -= rows * x
                top = min(nn, k + 3) + 1
                cols = x * a[l:top, k] + y * a[l:top, k + 1]
                if k + 1 != nn:
                    cols += z * a[l:top, k + 2]
                    a[l:top, k + 2] -= cols * r
                a[l:top, k + 1] -= cols * q
                a[l:top, k] -= cols
    return wr + 1j * wi


def general_eigs(M) -> np.ndarray:
    """All eigenvalues of a real square dense matrix."""
    a = np.array(M, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"general_eigs needs a square matrix, got shape {a.shape}")
    if a.shape[0] > GENERAL_LIMIT:
        raise DenseLimitExceeded(f"general eigenvalue path limited to {GENERAL_LIMIT}, got {a.shape[0]}")
    if a.shape[0] == 0:
        return np.zeros(0, dtype=np.complex128)
    balance(a)
    return hqr(np.triu(sla.hessenberg(a), -1))


def assemble_preconditioned(sys: SaddlePointSystem, ctx, limit: int = GENERAL_LIMIT) -> np.ndarray:
    """Dense P^{-1} calA, one column per unit vector."""
    if sys.dim > limit:
        raise DenseLimitExceeded(f"dense assembly limited to dimension {limit}, got {sys.dim}")
    n, N = sys.n, sys.dim
    cols = np.empty((N, N))
    e = np.zeros(N)
    for j in range(N):
        e[j] = 1.0
        cols[:, j] = apply_precond(ctx, apply_saddle(sys, BlockVector(e[:n], e[n:]))).concat()
        e[j] = 0.0
    return cols


def preconditioned_spectrum(sys: SaddlePointSystem, ctx) -> SpectrumReport:
    """Spectrum of P^{-1} calA; ``ctx=None`` gives the spectrum of calA itself.

    For REHSS the result is the exact union of n unit eigenvalues and the
    eigenvalues of the Schur block (alpha I + B B^T)^{-1} B A^{-1} B^T.
    """
    if ctx is not None and ctx.kind is PrecondKind.REHSS:
        check_dense_size(sys.dim)
        values = np.concatenate([np.ones(sys.n), ahat_eigs(sys, ctx.alpha)])
        return SpectrumReport.from_values(values)
    return SpectrumReport.from_values(general_eigs(assemble_preconditioned(sys, ctx)))


class MinpolyResult(NamedTuple):
    iterations: int
    bound: int
    passed: bool
    converged: bool


def _perturbation(dim, seed=20240601):
    E = np.random.default_rng(seed).standard_normal((dim, dim))
    return E / np.linalg.norm(E, 2)


def minpoly_check(sys: SaddlePointSystem, alpha: float, tol: float = 1e-10,
                  noise: float = 0.0, b: BlockVector | None = None) -> MinpolyResult:
    """Full GMRES with REHSS must converge in at most m + 1 iterations.

    ``noise > 0`` adds a fixed dense perturbation of that 2-norm to the
    preconditioner; this destroys the eigenvalue structure and serves as a
    negative control for the detector.
    """
    ctx = build_precond(sys, PrecondKind.REHSS, alpha)
    if b is None:
        b = sys.rhs
        if b.norm() == 0.0:
            b = apply_saddle(sys, BlockVector.ones(sys.n, sys.m))
    prec = ctx
    if noise:
        check_dense_size(sys.dim)
        E = noise * _perturbation(sys.dim)
        n = sys.n

        def prec(r):
            v = apply_precond(ctx, r).concat() + E @ r.concat()
            return BlockVector(v[:n], v[n:])

    _, rep = gmres_full(sys, prec, b, rel_tol=tol)
    bound = sys.m + 1
    its = rep.total_inner_iterations
    return MinpolyResult(its, bound, bool(rep.converged and its <= bound), rep.converged)


@dataclass
class AlphaLimitRow:
    alpha: float
    min_nonunit: float
    max_nonunit: float
    lower: float   # 1 / lambda_max(A)
    upper: float   # 1 / lambda_min(A)

    def inside(self, slack=1e-4):
        return self.lower - slack <= self.min_nonunit and self.max_nonunit <= self.upper + slack


def alpha_limit_study(sys: SaddlePointSystem, alphas) -> list:
    """Extremes of the non-unit REHSS eigenvalues next to [1/lambda_max(A), 1/lambda_min(A)]."""
    alphas = list(alphas)
    if not alphas or any(not a > 0 for a in alphas):
        raise InvalidAlpha("alpha list must be nonempty and positive")
    lam = sym_eigs(sys.A.to_dense())
    rows = []
    for a in alphas:
        mu = ahat_eigs(sys, a)
        rows.append(AlphaLimitRow(a, float(mu[0]), float(mu[-1]), 1.0 / lam[-1], 1.0 / lam[0]))
    return rows


def _fmt(v):
    return f"{v + 0.0:.15g}"


def write_scatter(path, label: str, alpha, report: SpectrumReport):
    """Text scatter file: ``# label alpha=<a>`` header, then ``re im`` per eigenvalue."""
    alpha_text = "none" if alpha is None else f"{alpha:g}"
    with open(path, "w") as fh:
        fh.write(f"# {label} alpha={alpha_text}\n")
        for re_, im in zip(report.eigenvalues_real, report.eigenvalues_imag):
            fh.write(f"{_fmt(re_)} {_fmt(im)}\n")


def read_scatter(path):
    """Inverse of :func:`write_scatter`: ``(header, complex array)``."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return header, np.zeros(0, dtype=np.complex128)
    return header, data[:, 0] + 1j * data[:, 1]
