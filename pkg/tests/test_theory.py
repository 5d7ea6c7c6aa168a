import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rehss.errors import DenseLimitExceeded, Diverged, InvalidAlpha
from rehss.linalg import SparseMatrix
from rehss.precond import build_precond
from rehss.saddle import BlockVector, SaddlePointSystem
from rehss.theory import (
    compute_bounds, gamma_action, rehss_iterate, rhss_radius, spectral_radius_gamma,
)

from _systems import (
    corollary_system, dense_precond, dense_saddle, dense_system, mixed_system, random_system, toy,
)


def dense_gamma(sys, alpha):
    P = dense_precond("rehss", sys, alpha)
    return np.eye(sys.dim) - np.linalg.solve(P, dense_saddle(sys))


# --- gamma_action ------------------------------------------------------------

def test_gamma_action_examples():
    sys = toy()
    ctx = build_precond(sys, "rehss", 1.0)
    assert gamma_action(sys, ctx, BlockVector([0.0], [0.0])).norm() == 0.0
    out = gamma_action(sys, ctx, BlockVector([0.0], [1.0]))
    assert np.allclose(out.concat(), [-0.25, 0.75], atol=1e-15)
    assert gamma_action(sys, ctx, BlockVector([1.0], [0.0])).norm() <= 1e-15


def test_gamma_action_matches_dense():
    sys = random_system(3)
    G = dense_gamma(sys, 0.7)
    ctx = build_precond(sys, "rehss", 0.7)
    for e in np.eye(sys.dim)[:5]:
        got = gamma_action(sys, ctx, BlockVector.split(e, sys.n)).concat()
        assert np.allclose(got, G @ e, atol=1e-10)


def test_gamma_action_needs_rehss():
    with pytest.raises(ValueError):
        gamma_action(toy(), build_precond(toy(), "hss", 1.0), BlockVector([1.0], [1.0]))


# --- stationary iteration ----------------------------------------------------

def test_rehss_iterate_exact_start():
    sys = dense_system([[2.0, 0.0], [0.0, 3.0]], [[1.0, 1.0]])
    u, rep = rehss_iterate(sys, 1.0, BlockVector.ones(2, 1), tol=1e-12)
    assert rep.converged and rep.iterations == 0
    assert len(rep.error_history) == 1 and rep.error_history[0] == 0.0


@pytest.mark.parametrize("alpha, rho", [(1.0, 0.75), (10.0, 21 / 22), (0.25, 0.6)])
def test_rehss_iterate_toy_rate(alpha, rho):
    sys = toy()
    b = BlockVector([3.0], [-1.0])
    u, rep = rehss_iterate(sys, alpha, None, tol=1e-12, maxit=5000, b=b)
    assert rep.converged
    assert np.allclose(u.concat(), 1.0, atol=1e-10)
    assert len(rep.error_history) == rep.iterations + 1
    assert all(h >= 0 for h in rep.error_history)
    assert rep.rho_estimate == pytest.approx(rho, rel=1e-3)


def test_rehss_iterate_diverges():
    # A below 1/2 on a large block: delta > 0, small alpha diverges
    sys = dense_system(np.diag([0.01, 0.01, 1.0]), [[10.0, 0.0, 0.0], [0.0, 10.0, 1.0]])
    b = compute_bounds(sys)
    assert b.delta > 0
    with pytest.raises(Diverged):
        rehss_iterate(sys, 1e-3, maxit=100_000)


def test_rehss_iterate_rejects_alpha():
    with pytest.raises(InvalidAlpha):
        rehss_iterate(toy(), 0.0)


# --- radii -------------------------------------------------------------------

@pytest.mark.parametrize("alpha, rho", [(1.0, 0.75), (10.0, 21 / 22), (0.25, 0.6)])
def test_spectral_radius_toy(alpha, rho):
    assert spectral_radius_gamma(toy(), alpha, 1e-12) == pytest.approx(rho, abs=1e-9)


def test_spectral_radius_grows_with_alpha_for_identity_A():
    sys = dense_system(np.eye(8), np.random.default_rng(0).standard_normal((3, 8)))
    assert spectral_radius_gamma(sys, 1e3) > spectral_radius_gamma(sys, 1.0)


@pytest.mark.parametrize("seed", range(5))
def test_gamma_eigenvalues_structure(seed):
    sys = random_system(seed)
    alpha = 0.5
    from rehss.spectral import ahat_eigs
    lam = np.linalg.eigvals(dense_gamma(sys, alpha))
    expected = np.concatenate([np.zeros(sys.n), 1.0 - ahat_eigs(sys, alpha)])
    assert np.allclose(np.sort(lam.real), np.sort(expected), atol=1e-8)
    assert np.max(np.abs(lam.imag)) <= 1e-8


# --- bounds ------------------------------------------------------------------

def test_bounds_toy():
    b = compute_bounds(toy())
    assert b.delta == pytest.approx(-0.75)
    assert b.theta == pytest.approx(-0.75)
    assert b.mu1 == pytest.approx(0.5) and b.mu_m == pytest.approx(0.5)
    assert b.alpha_opt_rhss == pytest.approx(2.0)
    assert b.rhss_upper == pytest.approx(4.0)
    assert b.corollary_holds
    assert b.kappa_B == pytest.approx(1.0)


def test_bounds_identity_A_negative_delta():
    B = np.random.default_rng(1).standard_normal((4, 9))
    b = compute_bounds(dense_system(np.eye(9), B))
    assert b.delta < 0
    assert b.delta == pytest.approx(-0.5 * np.linalg.eigvalsh(B @ B.T)[0])
    assert b.rehss_threshold == 0.0


def test_bounds_half_identity_zero_delta():
    n, m = 5, 3
    B = np.hstack([np.eye(m), np.zeros((m, n - m))])
    b = compute_bounds(dense_system(0.5 * np.eye(n), B))
    assert abs(b.delta) <= 1e-14


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_bounds_invariants(seed):
    sys = mixed_system(seed)
    b = compute_bounds(sys)
    A, B = sys.A.to_dense(), sys.B.to_dense()
    assert b.delta <= b.theta + 1e-10 * max(1.0, abs(b.theta))
    assert b.mu1 >= b.mu_m > 0
    assert b.alpha_opt_rhss == pytest.approx(2 / (b.mu1 + b.mu_m))
    assert b.corollary_holds == (b.lambda_min_A > 0.5 * (b.sigma_max_B / b.sigma_min_B) ** 2)
    # second route via LAPACK
    Q = B @ (0.5 * np.linalg.inv(A) - np.eye(sys.n)) @ B.T
    assert b.delta == pytest.approx(np.linalg.eigvalsh(0.5 * (Q + Q.T))[-1], abs=1e-9 * max(1, abs(b.delta)))
    s = np.linalg.svd(B, compute_uv=False)
    assert b.sigma_max_B == pytest.approx(s[0]) and b.sigma_min_B == pytest.approx(s[-1])


def test_bounds_dense_limit():
    n = 1990
    A = SparseMatrix.identity(n)
    B = SparseMatrix.from_triplets(20, n, np.arange(20), np.arange(20), np.ones(20))
    with pytest.raises(DenseLimitExceeded):
        compute_bounds(SaddlePointSystem(A, B))


@pytest.mark.parametrize("seed", range(6))
def test_rho_lt_1_above_delta(seed):
    sys = mixed_system(seed)
    b = compute_bounds(sys)
    for a in (max(b.delta, 0) + 1e-3, max(b.delta, 0) + 1.0, 10 * abs(b.delta) + 10):
        assert spectral_radius_gamma(sys, a, 1e-6) < 1


@pytest.mark.parametrize("seed", range(3))
def test_corollary_systems(seed):
    sys = corollary_system(seed)
    assert compute_bounds(sys).corollary_holds
    for a in (1e-4, 1.0, 1e4):
        assert spectral_radius_gamma(sys, a, 1e-6) < 1


# --- RHSS --------------------------------------------------------------------

@pytest.mark.parametrize("alpha, rho", [(2.0, 0.0), (4.0, 1.0), (1.0, 0.5)])
def test_rhss_radius_toy(alpha, rho):
    assert rhss_radius(toy(), alpha) == pytest.approx(rho, abs=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_rhss_interval_and_optimum(seed):
    sys = random_system(seed, n=20, m=6, cond=20.0)
    b = compute_bounds(sys)
    assert rhss_radius(sys, 0.9 * b.rhss_upper) < 1
    assert rhss_radius(sys, 1.1 * b.rhss_upper) >= 1 - 1e-8
    r_opt = rhss_radius(sys, b.alpha_opt_rhss)
    assert r_opt == pytest.approx((b.mu1 - b.mu_m) / (b.mu1 + b.mu_m), abs=1e-8)
    for a in np.linspace(0.02, 0.98, 7) * b.rhss_upper:
        assert r_opt <= rhss_radius(sys, a) + 1e-8
