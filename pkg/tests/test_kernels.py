from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cuspvariance import _core, _pykernels, kernels
from cuspvariance.kernels import (QuadratureError, QuadratureSpec, TestWeight, b2, bessel_j, bessel_k_imag,
                                  integrate, kloosterman, tau1, weight_tilde)


def j_series(nu: int, x: float) -> float:
    with mpmath.workdps(50):
        x = mpmath.mpf(x)
        term = (x / 2) ** nu / mpmath.factorial(nu)
        total = term
        m = 0
        while abs(term) > mpmath.mpf(10) ** -40 * abs(total) or m < 5:
            m += 1
            term *= -(x / 2) ** 2 / (m * (m + nu))
            total += term
        return float(total)


# --- J-Bessel -------------------------------------------------------------------

def test_j0_at_zero():
    assert bessel_j(0, 0.0) == 1.0


def test_j1_at_one():
    assert bessel_j(1, 1.0) == pytest.approx(j_series(1, 1.0), rel=1e-13)
    assert bessel_j(1, 1.0) == pytest.approx(0.4400505857, abs=1e-10)


def test_j11_bound():
    assert 0 < bessel_j(11, 1.0) <= (math.e / 22) ** 11


@pytest.mark.parametrize("nu,x", [(0, 3.5), (5, 0.1), (11, 9.0), (23, 20.0), (39, 35.0), (47, 60.0),
                                  (3, 30.0), (0, 80.0), (199, 150.0), (11, 0.001)])
def test_j_against_series(nu, x):
    ref = j_series(nu, x)
    assert bessel_j(nu, x) == pytest.approx(ref, rel=1e-12, abs=1e-300)


@given(st.integers(1, 120), st.floats(0.5, 200.0))
def test_j_three_term_recurrence(nu, x):
    lhs = bessel_j(nu - 1, x) + bessel_j(nu + 1, x)
    rhs = 2 * nu / x * bessel_j(nu, x)
    scale = max(abs(bessel_j(nu - 1, x)), abs(bessel_j(nu + 1, x)), abs(rhs), 1e-300)
    assert abs(lhs - rhs) <= 1e-9 * scale


@given(st.integers(0, 150), st.floats(0.0, 300.0))
def test_j_against_mpmath(nu, x):
    ref = float(mpmath.besselj(nu, x))
    scale = max(abs(ref), 1e-12 * (1 if x < nu else 1 / math.sqrt(max(x, 1.0))))
    assert abs(bessel_j(nu, x) - ref) <= 1e-12 * max(scale, 1e-290) + 1e-300


def test_j_rejects_bad_domain():
    with pytest.raises(ValueError):
        bessel_j(-1, 1.0)
    with pytest.raises(ValueError):
        bessel_j(2, -1.0)


# --- K-Bessel of imaginary order -------------------------------------------------

def test_k0_at_one():
    assert bessel_k_imag(0.0, 1.0) == pytest.approx(0.4210244382, abs=1e-10)
    assert bessel_k_imag(0.0, 1.0) == pytest.approx(float(mpmath.besselk(0, 1)), rel=1e-12)


def test_k_is_real():
    assert isinstance(bessel_k_imag(9.534, 3.0), float)


@given(st.floats(0.0, 30.0), st.floats(0.05, 40.0))
def test_k_even_in_t(t, x):
    assert bessel_k_imag(t, x) == bessel_k_imag(-t, x)


@pytest.mark.parametrize("t,x", [(0.0, 0.01), (1.0, 1e-3), (9.534, 3.0), (9.534, 20.0), (13.78, 5.0),
                                 (13.78, 40.0), (30.0, 10.0), (50.0, 45.0), (2.5, 0.3)])
def test_k_against_mpmath(t, x):
    with mpmath.workdps(60):
        ref = float(mpmath.re(mpmath.besselk(mpmath.mpc(0, t), x)))
    scale = math.exp(-math.pi * t / 2) if x < t else abs(ref)
    assert abs(bessel_k_imag(t, x) - ref) <= 1e-10 * max(scale, abs(ref))


@pytest.mark.parametrize("t", [0.0, 3.0, 9.534])
def test_k_large_argument_ratio_bounded(t):
    ratios = [bessel_k_imag(t, x) / (math.sqrt(math.pi / (2 * x)) * math.exp(-x)) for x in (50.0, 100.0, 200.0)]
    assert all(0.0 < r < 2.0 for r in ratios)
    # approaching 1 monotonically
    assert abs(ratios[2] - 1) < abs(ratios[1] - 1) < abs(ratios[0] - 1)


def test_k_underflow_is_exact_zero():
    assert bessel_k_imag(1.0, 800.0) == 0.0


def test_k_rejects_nonpositive_x():
    with pytest.raises(ValueError):
        bessel_k_imag(1.0, 0.0)


# --- Kloosterman sums -----------------------------------------------------------

def kloosterman_oracle(m, n, c):
    return sum(math.cos(2 * math.pi * (a * m + pow(a, -1, c) * n) / c)
               for a in range(c) if math.gcd(a, c) == 1) if c > 1 else 1.0


def test_kloosterman_c1():
    assert kloosterman(3, 7, 1) == 1.0


def test_kloosterman_small():
    assert kloosterman(1, 1, 2) == pytest.approx(1.0, abs=1e-12)
    assert kloosterman(1, 1, 3) == pytest.approx(-1.0, abs=1e-12)


@given(st.integers(-20, 20), st.integers(-20, 20), st.integers(1, 200))
def test_kloosterman_matches_enumeration(m, n, c):
    assert kloosterman(m, n, c) == pytest.approx(kloosterman_oracle(m, n, c), abs=1e-9 * c)


def ndiv(c):
    return sum(1 for d in range(1, c + 1) if c % d == 0)


@given(st.integers(1, 20), st.integers(1, 20), st.integers(1, 500))
def test_weil_bound(m, n, c):
    g = math.gcd(math.gcd(m, n), c)
    assert abs(kloosterman(m, n, c)) <= ndiv(c) * math.sqrt(g) * math.sqrt(c) + 1e-9


def test_weil_bound_sweep():
    for c in range(1, 61):
        bound = ndiv(c) * math.sqrt(c)
        for m in range(1, 21):
            for n in range(1, 21):
                g = math.gcd(math.gcd(m, n), c)
                assert abs(kloosterman(m, n, c)) <= bound * math.sqrt(g) + 1e-9


@given(st.integers(-30, 30), st.integers(-30, 30), st.integers(1, 300))
def test_kloosterman_symmetric(m, n, c):
    assert kloosterman(m, n, c) == kloosterman(n, m, c)


def test_backends_agree_on_kloosterman():
    assert np.array_equal(_pykernels.kloosterman_many(2, 5, 200), _core.kloosterman_many(2, 5, 200))


# --- divisor sums and b2 ----------------------------------------------------------

@pytest.mark.parametrize("n,v", [(1, 1), (6, 12), (4, 7), (12, 28), (97, 98), (10**12, 2499694822171)])
def test_tau1(n, v):
    assert tau1(n) == v


def test_b2_values():
    assert b2(0.0) == pytest.approx(1 / 12, abs=1e-16)
    assert b2(0.5) == pytest.approx(-1 / 24, abs=1e-16)


@given(st.floats(-100, 100))
def test_b2_periodic(y):
    assert b2(y + 1.0) == pytest.approx(b2(y), abs=1e-12)


def test_b2_mean_zero():
    val, _ = integrate(lambda y: b2(y), (0.0, 1.0))
    assert abs(val) < 1e-12


# --- weights -----------------------------------------------------------------------

WEIGHTS = [
    TestWeight.bump(1, 2),
    TestWeight.bump(2, 3, amp=-1.5),
    TestWeight.poly_bump(1, 3, (0.5, -1.0, 0.25)),
    TestWeight.plateau(1, 4, 0.5),
    TestWeight.mean_zero_bump(1, 2),
]


@pytest.mark.parametrize("W", WEIGHTS, ids=lambda W: W.describe())
def test_weight_vanishes_outside_support(W):
    ys = np.array([0.1, W.a - 1e-9, W.a, W.A, W.A + 1e-9, 10.0])
    assert np.all(W(ys) == 0.0)


@pytest.mark.parametrize("W", WEIGHTS, ids=lambda W: W.describe())
def test_weight_derivatives_match_finite_differences(W):
    rng = np.random.default_rng(7)
    ys = rng.uniform(W.a + 0.02 * (W.A - W.a), W.A - 0.02 * (W.A - W.a), 100)
    h = 1e-5
    fd1 = (W(ys + h) - W(ys - h)) / (2 * h)
    fd2 = (W(ys + h) - 2 * W(ys) + W(ys - h)) / h ** 2
    assert np.max(np.abs(fd1 - W.d1(ys))) < 1e-6
    assert np.max(np.abs(fd2 - W.d2(ys))) < 1e-4
    h = 1e-4
    fd2 = (W(ys + h) - 2 * W(ys) + W(ys - h)) / h ** 2
    assert np.max(np.abs(fd2 - W.d2(ys))) < 1e-6 * max(1.0, float(np.max(np.abs(W.d2(ys))))) * 100


def test_mean_zero_bump_has_zero_mean():
    W = TestWeight.mean_zero_bump(1, 2)
    val, _ = integrate(lambda y: W(y) / y ** 2, W.support, QuadratureSpec(abs_tol=1e-16, rel_tol=1e-13))
    assert abs(val) < 1e-13


@pytest.mark.parametrize("W", WEIGHTS[:4], ids=lambda W: W.describe())
def test_logabs_consistent(W):
    ys = np.linspace(W.a + 1e-3, W.A - 1e-3, 57)
    sign, logv = W.logabs(ys)
    v = W(ys)
    nz = v != 0
    assert np.allclose(sign[nz] * np.exp(logv[nz]), v[nz], rtol=1e-12, atol=0)


def test_tilde_of_zero_is_zero():
    assert np.all(weight_tilde(TestWeight.zero(1, 2))(np.linspace(0.5, 3, 20)) == 0)


def test_tilde_support_contained():
    W = TestWeight.bump(2, 3)
    Wt = weight_tilde(W)
    assert Wt.support == (2.0, 3.0)
    assert np.all(Wt(np.array([1.9, 1.999, 3.001, 3.5])) == 0)
    ys = np.linspace(2.05, 2.95, 9)
    assert np.allclose(Wt(ys), W.d2(ys) * ys ** 2 + 2 * ys * W.d1(ys), rtol=1e-13, atol=1e-300)


def test_tilde_rejects_table():
    W = TestWeight.from_table([1, 1.5, 2, 2.5, 3], [0, 1, 2, 1, 0])
    with pytest.raises(ValueError):
        weight_tilde(W)


def test_tilde_correction_scaling():
    V = TestWeight.bump(1, 2)
    Vt = weight_tilde(V)
    spec = QuadratureSpec(abs_tol=1e-15, rel_tol=1e-12, max_depth=20000)
    scaled = []
    for X in (20.0, 40.0, 80.0):
        pts = [X / j for j in range(1, int(X) + 2) if 1 < X / j < 2]
        val, _ = integrate(lambda s: b2(X / s) * Vt(s), (1.0, 2.0), spec, points=pts)
        # int b2(y) V~(X/y) dy/y^2 = (1/X) int b2(X/s) V~(s) ds
        scaled.append(abs(val / X) * X)
    assert max(scaled) <= 2.0 * scaled[0] + 1e-12


# --- quadrature ------------------------------------------------------------------------

def test_integrate_exponential_half_line():
    val, err = integrate(lambda y: np.exp(-y), (0.0, math.inf))
    assert val == pytest.approx(1.0, abs=1e-12)


def test_integrate_polynomial():
    val, err = integrate(lambda y: y ** 2, (0.0, 1.0))
    assert val == pytest.approx(1 / 3, abs=1e-14)
    assert err <= 1e-12


@pytest.mark.parametrize("scheme", ["gk", "tanh-sinh"])
def test_integrate_k0_squared(scheme):
    f = lambda y: np.array([float(mpmath.besselk(0, v)) ** 2 / v for v in np.atleast_1d(y)])
    a, _ = integrate(f, (1.0, math.inf), QuadratureSpec(scheme, 1e-10, 1e-8))
    b, _ = integrate(f, (1.0, math.inf), QuadratureSpec(scheme, 1e-13, 1e-11))
    assert a > 0
    assert abs(a - b) <= 1e-8 * b


def test_integrate_reports_failure():
    with pytest.raises(QuadratureError):
        integrate(lambda y: np.sin(1.0 / np.maximum(y, 1e-300)), (0.0, 1.0), QuadratureSpec(max_depth=20))


def test_spec_validates_tolerances():
    with pytest.raises(ValueError):
        QuadratureSpec(abs_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(scheme="simpson")
