from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cuspvariance import qforms
from cuspvariance import variance as V
from cuspvariance.kernels import TestWeight, integrate, tau1
from cuspvariance.petersson import l_sym2_at_1, sym2_nmax

BUMP = TestWeight.bump(1.0, 2.0)
ZERO_U = TestWeight.zero(1.0, 2.0)


def form(k, index=0, n=400):
    return qforms.STORE.get(k, max(n, sym2_nmax(k)))[index]


# --- shifted convolution sums --------------------------------------------------------------

def test_shifted_empty_support():
    f = form(12)
    assert V.shifted_conv_direct(f, BUMP, 0.4, 0) == 0.0
    assert V.shifted_conv_hecke(f, BUMP, 0.4, 0) == 0.0


def test_shifted_h0_is_sum_of_squares():
    f = form(12)
    X = 17.0
    n = np.arange(1, 60)
    expect = math.fsum(f.lam[1:60] ** 2 * BUMP(n / X))
    assert V.shifted_conv_direct(f, BUMP, X, 0) == pytest.approx(expect, rel=1e-14)


def test_shifted_k12_example():
    f = form(12)
    d = V.shifted_conv_direct(f, BUMP, 10.0, 1)
    assert d == pytest.approx(V.shifted_conv_hecke(f, BUMP, 10.0, 1), rel=1e-10, abs=1e-14)


@given(st.sampled_from([(12, 0), (24, 0), (24, 1)]), st.floats(3.0, 60.0), st.integers(0, 12))
def test_shifted_dual_formula(kf, X, h):
    f = form(*kf)
    d = V.shifted_conv_direct(f, BUMP, X, h)
    e = V.shifted_conv_hecke(f, BUMP, X, h)
    # near-cancelling sums get an absolute floor proportional to the number of terms
    assert abs(d - e) <= 1e-10 * max(abs(d), 1e-3 * X)


def test_shifted_h_prime_uses_two_divisors():
    assert V._divisors(7) == [1, 7]
    assert V._divisors(12) == [1, 2, 3, 4, 6, 12]


def test_shifted_rejects_negative_h():
    with pytest.raises(ValueError):
        V.shifted_conv_direct(form(12), BUMP, 5.0, -1)


# --- BLF main term ---------------------------------------------------------------------

def test_blf_instantiation():
    expect = integrate(lambda y: BUMP(y) ** 2, (1.0, 2.0))[0]
    assert V.blf_main_term(BUMP, BUMP, 1, 1) == pytest.approx(expect, rel=1e-12)


def test_blf_gcd_prefactor():
    # tau_1(2) = 3 and the substitution y -> 2y gives the extra factor 1/2
    base = V.blf_main_term(BUMP, BUMP, 1, 1)
    assert tau1(2) == 3
    assert V.blf_main_term(BUMP, BUMP, 2, 2) == pytest.approx(1.5 * base, rel=1e-12)


def test_blf_disjoint_supports():
    assert V.blf_main_term(BUMP, TestWeight.bump(3.0, 4.0), 1, 1) == 0.0


# --- squeezing ---------------------------------------------------------------------------

@pytest.mark.parametrize("H", [2.0, 10.0, 100.0])
def test_ball_volume(H):
    assert V.SqueezeSpec.ball_volume(H) * H == pytest.approx(1.0, abs=1e-10)


def test_squeeze_rescales_y():
    sq = V.SqueezeSpec(0.5)
    g = sq.squeeze(lambda z: z.imag, 17)
    assert g(complex(0.1, 8.0)) == pytest.approx(2.0)


def test_negative_theta_rejected():
    with pytest.raises(ValueError):
        V.SqueezeSpec(-0.1)


def test_poincare_support_checked():
    with pytest.raises(ValueError):
        V.PoincareObservable(TestWeight.bump(0.5, 2.0), 1)


def test_nu_of_mean_zero_weight():
    assert abs(V.PoincareObservable(TestWeight.mean_zero_bump(1.0, 2.0), 0).nu()) < 1e-12
    assert V.PoincareObservable(BUMP, 3).nu() == 0.0


# --- unfolded mass -----------------------------------------------------------------------

def test_mu_real_via_grid():
    f = form(12)
    P = V.PoincareObservable(BUMP, 1)
    g = V.mu_poincare_exact(f, P, V.SqueezeSpec(0.3), via="grid")
    u = V.mu_poincare_exact(f, P, V.SqueezeSpec(0.3))
    scale = V.mu_scale(P, V.SqueezeSpec(0.3), 12)
    assert abs(g.imag) < 1e-12 * scale
    assert g.real == pytest.approx(u, abs=1e-10 * scale)


@pytest.mark.parametrize("k", [12, 24])
def test_mu_symmetric_in_h(k):
    sq = V.SqueezeSpec(0.3)
    for f in qforms.STORE.get(k, 400):
        a = V.mu_poincare_exact(f, V.PoincareObservable(BUMP, 2), sq)
        b = V.mu_poincare_exact(f, V.PoincareObservable(BUMP, -2), sq)
        assert a == b
        gb = V.mu_poincare_exact(f, V.PoincareObservable(BUMP, -2), sq, via="grid")
        assert gb.real == pytest.approx(a, abs=1e-10 * V.mu_scale(V.PoincareObservable(BUMP, 2), sq, k))


def test_mu_exact_vs_approx_k12():
    f = form(12)
    P = V.PoincareObservable(BUMP, 1)
    sq = V.SqueezeSpec(0.3)
    gap = abs(V.mu_poincare_exact(f, P, sq) - V.mu_poincare_approx(f, P, sq))
    assert gap <= 5.0 / 12 * V.mu_scale(P, sq, 12)


def test_mu_gap_scaling_over_k():
    P = V.PoincareObservable(BUMP, 1)
    sq = V.SqueezeSpec(0.3)
    for k in (40, 80, 120, 160, 200):
        for f in qforms.STORE.get(k, max(V.mass_nmax(k, P, sq), sym2_nmax(k))):
            gap = abs(V.mu_poincare_exact(f, P, sq) - V.mu_poincare_approx(f, P, sq))
            assert gap <= 5.0 / k * V.mu_scale(P, sq, k)


@pytest.mark.parametrize("theta", [1.0, 1.5, 2.0])
def test_mu_approx_vanishes_above_planck(theta):
    f = form(40)
    P = V.PoincareObservable(BUMP, 0)
    assert V.mu_poincare_approx(f, P, V.SqueezeSpec(theta)) == 0.0


@pytest.mark.parametrize("k", [40, 60])
def test_mu_exact_tiny_above_planck(k):
    P = V.PoincareObservable(BUMP, 0)
    sq = V.SqueezeSpec(1.0)
    for f in qforms.STORE.get(k, max(V.mass_nmax(k, P, sq), sym2_nmax(k))):
        assert abs(V.mu_poincare_exact(f, P, sq)) <= 1e-15 * V.mu_scale(P, sq, k)


def test_mu_h0_ratio_is_one():
    # with h = 0 the approximation is a plain weighted sum of lambda(n)^2
    f = form(24)
    sq = V.SqueezeSpec(0.2)
    P = V.PoincareObservable(BUMP, 0)
    X = 23 ** 0.8
    n = np.arange(1, 40)
    w = BUMP(X / (4 * math.pi * n))
    L = l_sym2_at_1(f).value
    expect = 2 * math.pi ** 2 / (23 * L) * math.fsum(f.lam[1:40] ** 2 * w)
    assert V.mu_poincare_approx(f, P, sq) == pytest.approx(expect, rel=1e-13)


def test_mu_log_matches_value():
    f = form(24)
    P = V.PoincareObservable(BUMP, 1)
    sq = V.SqueezeSpec(0.3)
    s, lg = V.mu_poincare_log(f, P, sq)
    assert s * math.exp(lg) == pytest.approx(V.mu_poincare_exact(f, P, sq), rel=1e-14)


# --- experiments -------------------------------------------------------------------------

def test_zeroth_moment_u_zero():
    r = V.zeroth_moment(32, ZERO_U)
    assert r.empirical == 0.0
    assert r.predicted == 0.0


def test_zeroth_main_term_instantiation():
    r = V.zeroth_moment(32, BUMP)
    expect = (math.pi ** 2 / 6) ** 2 / 12 * 32 ** 2 / 2 * integrate(lambda y: BUMP(y) * y, (1, 2))[0]
    assert r.predicted == pytest.approx(expect, rel=1e-12)
    assert r.empirical > 0


def test_qvthm_u_zero():
    r = V.qvthm_experiment(32, ZERO_U, 0.4, BUMP, 1, BUMP, 1)
    assert r.empirical == 0.0
    assert r.predicted == 0.0


def test_qvthm_disjoint_predicted_zero():
    r = V.qvthm_experiment(32, BUMP, 0.4, BUMP, 1, TestWeight.bump(3.0, 4.0), 1)
    assert r.predicted == 0.0


def test_qvthm_finite():
    r = V.qvthm_experiment(32, BUMP, 0.4, BUMP, 1, BUMP, 1)
    assert math.isfinite(r.empirical) and r.predicted > 0


def test_first_moment_mean_zero_prediction():
    r = V.first_moment(32, BUMP, 0.4, TestWeight.mean_zero_bump(1.0, 2.0))
    assert abs(r.predicted) < 1e-12
    assert V.first_moment(32, ZERO_U, 0.4, BUMP).empirical == 0.0


def test_variance_nonnegative_for_equal_observables():
    P = V.PoincareObservable(BUMP, 1)
    r = V.variance_experiment(32, BUMP, 0.3, P, P)
    assert r.empirical >= 0
    assert all(row[3] >= 0 for row in r.per_k)


def test_variance_cuspidal_above_half():
    P = V.PoincareObservable(BUMP, 1)
    assert V.variance_experiment(32, BUMP, 0.7, P, P).predicted == 0.0


def test_variance_constant_below_half():
    P = V.PoincareObservable(BUMP, 1)
    a = V._predicted_b(0.3, P, P)
    b = V._predicted_b(0.45, P, P)
    assert a == b and a > 0


def test_variance_prediction_nan_outside_unit_interval():
    P = V.PoincareObservable(BUMP, 1)
    assert math.isnan(V.variance_experiment(32, BUMP, 1.2, P, P).predicted)


def test_variance_report_csv(tmp_path):
    P = V.PoincareObservable(BUMP, 1)
    r = V.variance_experiment(32, BUMP, 0.3, P, P)
    r.to_csv(tmp_path / "v.csv")
    r.per_k_csv(tmp_path / "k.csv")
    lines = (tmp_path / "v.csv").read_text().splitlines()
    assert lines[0] == "theta,K,obs1,obs2,empirical,predicted,ratio"
    assert len(lines) == 2
    ks = [int(l.split(",")[0]) for l in (tmp_path / "k.csv").read_text().splitlines()[1:]]
    assert ks == sorted(ks) and ks


def test_variance_threads_bit_identical():
    P = V.PoincareObservable(BUMP, 1)
    a = V.variance_experiment(32, BUMP, 0.3, P, P, threads=1)
    b = V.variance_experiment(32, BUMP, 0.3, P, P, threads=4)
    assert a.empirical == b.empirical and a.per_k == b.per_k


# --- Planck scale and Euler-Maclaurin ------------------------------------------------------

def test_planck_nu_scaling():
    rows = V.planck_failure_probe([40, 60], 1.0, BUMP)
    vals = {r.nu_scaled for r in rows}
    assert max(vals) == pytest.approx(min(vals), rel=1e-14)


def test_planck_rejects_small_theta():
    with pytest.raises(ValueError):
        V.planck_failure_probe([40], 0.5, BUMP)


def test_planck_theta2_numerically_zero():
    rows = V.planck_failure_probe([40], 2.0, BUMP)
    assert all(r.mu_approx == 0.0 for r in rows)
    assert all(r.ratio < 1e-100 for r in rows)


def test_euler_maclaurin_canonical():
    assert V.euler_maclaurin_check(BUMP, 50.0, 1) < 1e-8


@pytest.mark.parametrize("X,r", [(0.5, 1), (3.0, 4)])
def test_euler_maclaurin_empty_sum(X, r):
    assert V.euler_maclaurin_check(BUMP, X, r) < 1e-12


def test_euler_maclaurin_stable_under_tighter_quadrature():
    from cuspvariance.kernels import QuadratureSpec
    a = V.euler_maclaurin_check(BUMP, 50.0, 1)
    b = V.euler_maclaurin_check(BUMP, 50.0, 1, QuadratureSpec(abs_tol=1e-16, rel_tol=1e-14, max_depth=40000))
    assert a < 1e-8 and b < 1e-8


@given(st.floats(5.0, 80.0), st.integers(1, 4))
def test_euler_maclaurin_property(X, r):
    assert V.euler_maclaurin_check(BUMP, X, r) < 1e-8
