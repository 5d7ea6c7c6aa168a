import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rehss.errors import DenseLimitExceeded, InvalidAlpha
from rehss.precond import build_precond
from rehss.spectral import (
    SpectrumReport, ahat_eigs, alpha_limit_study, assemble_preconditioned, balance, general_eigs,
    minpoly_check, preconditioned_spectrum, read_scatter, write_scatter,
)

from _systems import (
    clustered_system, dense_precond, dense_saddle, dense_system, match_sorted, random_system,
    rounding_amplification, toy,
)


# --- A-hat -------------------------------------------------------------------

def test_ahat_examples():
    assert ahat_eigs(toy(), 1.0) == pytest.approx([0.25])
    assert ahat_eigs(toy(), 1e-10) == pytest.approx([0.5])
    assert ahat_eigs(toy(), 1e6) == pytest.approx([0.5 / (1e6 + 1)])


def test_ahat_identity_A_closed_form():
    B = np.random.default_rng(2).standard_normal((4, 10))
    s2 = np.linalg.svd(B, compute_uv=False) ** 2
    got = ahat_eigs(dense_system(np.eye(10), B), 0.3)
    assert np.allclose(got, np.sort(s2 / (0.3 + s2)))


def test_ahat_rejects_alpha():
    with pytest.raises(InvalidAlpha):
        ahat_eigs(toy(), -1.0)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-3, 1e3))
def test_ahat_real_positive(seed, alpha):
    mu = ahat_eigs(random_system(seed % 100), alpha)
    assert np.all(mu > 0)


# --- general eigenvalues -----------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 7, 25, 80])
def test_general_eigs_against_lapack(n):
    M = np.random.default_rng(n).standard_normal((n, n))
    assert match_sorted(general_eigs(M), np.linalg.eigvals(M)) <= 1e-10 * max(1, np.abs(M).max() * n)


def test_general_eigs_complex_pairs_and_special_cases():
    R = np.array([[0.0, -2.0], [2.0, 0.0]])
    assert match_sorted(general_eigs(R), [2j, -2j]) <= 1e-14
    assert match_sorted(general_eigs(np.diag([3.0, -1.0, 2.0])), [3, -1, 2]) <= 1e-14
    assert np.allclose(general_eigs(np.array([[2.0, 1.0], [-1.0, 0.0]])), [1.0, 1.0])
    J = np.triu(np.ones((5, 5)))
    assert np.allclose(general_eigs(J), 1.0, atol=1e-3)


def test_balance_is_similarity():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((6, 6)) * np.logspace(-4, 4, 6)[:, None]
    Mb = balance(M.copy())
    assert match_sorted(np.linalg.eigvals(Mb), np.linalg.eigvals(M)) <= 1e-8 * np.abs(M).max()


def test_general_limit():
    with pytest.raises(DenseLimitExceeded):
        general_eigs(np.zeros((801, 801)))


# --- preconditioned spectra --------------------------------------------------

def test_spectrum_examples():
    rep = preconditioned_spectrum(toy(), build_precond(toy(), "rehss", 1.0))
    assert np.allclose(rep.eigenvalues_real, [0.25, 1.0]) and rep.n_at_one == 1
    rep = preconditioned_spectrum(toy(), None)
    assert np.allclose(rep.eigenvalues_real, [1.0, 1.0]) and rep.n_at_one == 2
    rep = preconditioned_spectrum(toy(), build_precond(toy(), "rhss", 2.0))
    assert rep.n_at_one == 2


def test_spectrum_report_statistics():
    rep = SpectrumReport.from_values([1.0, 1.0 + 1e-10, 0.5, 2.0 + 1j])
    assert len(rep) == 4 and rep.n_at_one == 2
    assert rep.min_real == 0.5 and rep.max_real == 2.0
    assert rep.cluster_radius_90 == pytest.approx(np.percentile([0, 1e-10, 0.5, abs(1 + 1j)], 90))


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("alpha", [1e-2, 1.0, 1e2])
def test_rehss_structure_matches_dense(seed, alpha):
    sys = random_system(seed, cond=100.0)
    ctx = build_precond(sys, "rehss", alpha)
    exact = preconditioned_spectrum(sys, ctx)
    assert exact.n_at_one >= sys.n
    dense = np.linalg.eigvals(np.linalg.solve(dense_precond("rehss", sys, alpha), dense_saddle(sys)))
    assert match_sorted(exact.values, dense) <= 1e-8


@pytest.mark.parametrize("seed", range(3))
def test_tilde_block_consistency(seed):
    sys = random_system(seed)
    alpha = 0.8
    M = assemble_preconditioned(sys, build_precond(sys, "rehss", alpha))
    A, B = sys.A.to_dense(), sys.B.to_dense()
    S = alpha * np.eye(sys.m) + B @ B.T
    X = np.linalg.solve(A, B.T)
    At = X - B.T @ np.linalg.solve(S, B @ X)
    n = sys.n
    assert np.allclose(M[:n, n:], At, atol=1e-8)
    assert np.allclose(M[:n, :n], np.eye(n), atol=1e-8)
    assert np.allclose(M[n:, :n], 0.0, atol=1e-8)


@pytest.mark.parametrize("kind", ["hss", "rhss"])
def test_nonsymmetric_spectra_match_lapack(kind):
    sys = random_system(1, n=30, m=8, cond=50.0)
    rep = preconditioned_spectrum(sys, build_precond(sys, kind, 0.5))
    ref = np.linalg.eigvals(np.linalg.solve(dense_precond(kind, sys, 0.5), dense_saddle(sys)))
    assert match_sorted(rep.values, ref) <= 1e-7


# --- minimal polynomial --------------------------------------------------------

def test_minpoly_examples():
    r = minpoly_check(toy(), 1.0)
    assert r.passed and r.iterations <= 2 and r.bound == 2
    sys = clustered_system(0, n=50, m=20)
    r = minpoly_check(sys, 1.0)
    assert r.passed and r.iterations <= 21


def test_minpoly_negative_control():
    sys = clustered_system(0, n=50, m=3)
    assert minpoly_check(sys, 1.0).passed
    r = minpoly_check(sys, 1.0, noise=1e-2)
    assert r.converged and not r.passed and r.iterations > r.bound


@pytest.mark.parametrize("seed", range(12))
def test_minpoly_excess_only_from_rounding(seed):
    """On badly scaled systems the bound can be missed, but only when double
    precision cannot resolve the degree m + 1 residual polynomial."""
    sys = random_system(seed, cond=1e3)
    r = minpoly_check(sys, 1.0)
    amp = rounding_amplification(ahat_eigs(sys, 1.0))
    if not r.passed:
        assert amp + np.log10(np.finfo(float).eps) > -10 - 2


# --- alpha limit ---------------------------------------------------------------

def test_alpha_limit_examples():
    row = alpha_limit_study(toy(), [1e-10])[0]
    assert row.min_nonunit == pytest.approx(0.5) and row.inside()
    B = np.hstack([np.eye(3), np.zeros((3, 2))])
    row = alpha_limit_study(dense_system(2 * np.eye(5), B), [1e-10])[0]
    assert row.min_nonunit == pytest.approx(0.5) and row.max_nonunit == pytest.approx(0.5)
    row = alpha_limit_study(toy(), [1e6])[0]
    assert row.max_nonunit == pytest.approx(0.5 / (1e6 + 1)) and not row.inside()


def test_alpha_limit_rejects_bad_grid():
    with pytest.raises(InvalidAlpha):
        alpha_limit_study(toy(), [])
    with pytest.raises(InvalidAlpha):
        alpha_limit_study(toy(), [1.0, 0.0])


@pytest.mark.parametrize("seed", range(5))
def test_alpha_limit_interval(seed):
    sys = random_system(seed)
    lam_bb = np.linalg.eigvalsh(sys.B.to_dense() @ sys.B.to_dense().T)[0]
    row = alpha_limit_study(sys, [1e-8 * lam_bb])[0]
    assert row.inside(1e-4)


# --- scatter files -------------------------------------------------------------

def test_scatter_roundtrip(tmp_path):
    rep = preconditioned_spectrum(toy(), build_precond(toy(), "rehss", 1.0))
    path = tmp_path / "s.txt"
    write_scatter(path, "toy REHSS", 1.0, rep)
    lines = path.read_text().splitlines()
    assert lines == ["# toy REHSS alpha=1", "0.25 0", "1 0"]
    header, vals = read_scatter(path)
    assert header.startswith("# toy") and np.allclose(vals, [0.25, 1.0])
