"""Acceptance criteria 1-14, one test each; the run ends with one PASS/FAIL line per criterion."""
from __future__ import annotations

import math
import os
import random
import subprocess
import sys
import time
from importlib import resources

import pytest

from cuspvariance import btheta, qforms, render
from cuspvariance import variance as V
from cuspvariance.kernels import TestWeight
from cuspvariance.petersson import petersson_check, sym2_nmax

from conftest import delta_product

BUMP = TestWeight.bump(1.0, 2.0)
MZ = TestWeight.mean_zero_bump(1.0, 2.0)


def _basis(k, P, sq):
    return qforms.STORE.get(k, max(V.mass_nmax(k, P, sq), sym2_nmax(k)))


@pytest.mark.criterion(1)
def test_exact_hecke_relations_k12(criterion_detail):
    t0 = time.perf_counter()
    (f,) = qforms.hecke_eigenforms(12, 2500)
    bad = [(m, n) for m in range(1, 51) for n in range(1, 51) if qforms.hecke_residual(f, m, n) != 0]
    dt = time.perf_counter() - t0
    criterion_detail.update(nonzero_residuals=len(bad), seconds=f"{dt:.2f}")
    assert isinstance(qforms.hecke_residual(f, 50, 50), int)
    assert bad == []
    assert dt < 60


@pytest.mark.criterion(2)
def test_delta_product_oracle(criterion_detail):
    (g,) = qforms.miller_basis(12, 101)
    miller = [g[n] for n in range(101)]
    oracle = delta_product(100)
    criterion_detail.update(n_max=100, tau100=oracle[100])
    assert miller == oracle


@pytest.mark.criterion(3)
def test_petersson_identity(criterion_detail):
    t0 = time.perf_counter()
    rep = petersson_check(list(range(12, 41, 2)), 5, tol=1e-6)
    dt = time.perf_counter() - t0
    criterion_detail.update(max_abs_diff=f"{rep.max_abs_diff:.2e}", rows=len(rep.rows), seconds=f"{dt:.1f}")
    assert rep.passed
    assert len(rep.rows) == 15 * 15
    assert dt < 300


@pytest.mark.criterion(4)
def test_dual_shifted_convolution(criterion_detail):
    rng = random.Random(20240601)
    worst = 0.0
    for _ in range(20):
        k = rng.choice([12, 24])
        basis = qforms.STORE.get(k, 800)
        f = basis[rng.randrange(basis.dim)]
        X = rng.uniform(5.0, 200.0)
        h = rng.randint(0, 24)
        d = V.shifted_conv_direct(f, BUMP, X, h)
        e = V.shifted_conv_hecke(f, BUMP, X, h)
        worst = max(worst, abs(d - e) / abs(d))
    criterion_detail.update(cases=20, max_rel_gap=f"{worst:.2e}")
    assert worst <= 1e-10


@pytest.mark.criterion(5)
def test_exact_vs_approximate_mass(criterion_detail):
    P = V.PoincareObservable(BUMP, 1)
    sq = V.SqueezeSpec(0.4)

    def rel_gaps(k):
        out = []
        for f in _basis(k, P, sq):
            ex = V.mu_poincare_exact(f, P, sq)
            out.append(abs(ex - V.mu_poincare_approx(f, P, sq)) / abs(ex))
        return out

    g50, g200 = rel_gaps(50), rel_gaps(200)
    criterion_detail.update(rel_gap_k50=f"{min(g50):.3g}", rel_gap_k200=f"{max(g200):.3g}")
    assert max(g200) * 2 <= min(g50)


@pytest.mark.criterion(6)
def test_planck_scale_failure(criterion_detail):
    rows = V.planck_failure_probe([50, 200], 1.0, BUMP)
    lr50 = min(r.log_ratio for r in rows if r.k == 50)
    lr200 = max(r.log_ratio for r in rows if r.k == 200)
    approx2 = [r.mu_approx for r in V.planck_failure_probe([50, 200], 2.0, BUMP)]
    criterion_detail.update(log_ratio_k50=f"{lr50:.1f}", log_ratio_k200=f"{lr200:.1f}",
                            theta2_approx_nonzero=sum(a != 0.0 for a in approx2))
    assert lr200 <= lr50 - math.log(4.0)
    assert all(a == 0.0 for a in approx2)


@pytest.mark.criterion(7)
def test_phase_transition(criterion_detail):
    pairs = [(BUMP, 1, BUMP, 1), (BUMP, 2, TestWeight.bump(1.0, 3.0), 1), (TestWeight.bump(1.0, 4.0), 3, TestWeight.bump(1.0, 3.0), 2)]
    spread = 0.0
    for V1, h1, V2, h2 in pairs:
        low = [btheta.b_theta_poincare(V1, h1, V2, h2, btheta.ThetaRegime.of(t)) for t in (0.1, 0.3, 0.49)]
        high = [btheta.b_theta_poincare(V1, h1, V2, h2, btheta.ThetaRegime.of(t)) for t in (0.51, 0.9)]
        assert low[0] > 0
        spread = max(spread, (max(low) - min(low)) / abs(low[0]))
        assert high == [0.0, 0.0]
    eis = [btheta.b_theta_eisenstein(MZ, MZ, btheta.ThetaRegime.of(t)) for t in (0.3, 0.9)]
    psi = btheta.FourierObservable.single(0, MZ)
    eis += [btheta.b_theta_general(psi, psi, btheta.ThetaRegime.of(t)) for t in (0.1, 0.5)]
    eis_spread = (max(eis) - min(eis)) / abs(eis[0])
    criterion_detail.update(low_spread=f"{spread:.1e}", eisenstein=f"{eis[0]:.6e}",
                            eisenstein_spread=f"{eis_spread:.1e}")
    assert spread <= 1e-10
    assert eis_spread <= 1e-10


@pytest.mark.criterion(8)
def test_zeroth_moment_trend(criterion_detail):
    t0 = time.perf_counter()
    ratios = [V.zeroth_moment(K, BUMP).ratio for K in (32, 64, 128)]
    dt = time.perf_counter() - t0
    criterion_detail.update(ratios="/".join(f"{r:.4f}" for r in ratios), seconds=f"{dt:.0f}")
    dist = [abs(r - 1) for r in ratios]
    assert dist[0] > dist[1] > dist[2]
    assert dt < 1800


@pytest.mark.criterion(9)
def test_variance_sign_and_regime(criterion_detail):
    P = V.PoincareObservable(BUMP, 1)
    emp = {}
    for K in (32, 64, 128):
        for theta in (0.3, 0.7):
            emp[K, theta] = V.variance_experiment(K, BUMP, theta, P, P).empirical
    low = emp[128, 0.3] / 128 ** 0.7
    high = emp[128, 0.7] / 128 ** 0.3
    criterion_detail.update(min_empirical=f"{min(emp.values()):.3g}", scaled_theta03=f"{low:.3g}",
                            scaled_theta07=f"{high:.3g}")
    assert all(v >= 0 for v in emp.values())
    assert high < 0.5 * low


@pytest.mark.criterion(10)
def test_euler_maclaurin(criterion_detail):
    res = [V.euler_maclaurin_check(BUMP, X, r) for X in (20.0, 50.0, 200.0) for r in (1, 2, 5)]
    criterion_detail.update(max_residual=f"{max(res):.2e}")
    assert max(res) < 1e-8


@pytest.mark.criterion(11)
def test_maass_probe(criterion_detail):
    data = resources.files("cuspvariance") / "data"
    even = btheta.parse_maass_file(str(data / "maass_even.txt"))
    odd = btheta.parse_maass_file(str(data / "maass_odd.txt"))
    regime = btheta.ThetaRegime.of(0.3)
    s = btheta.b_theta_maass(even, even, regime, 20)
    z = btheta.b_theta_maass(odd, odd, regime, 20)
    criterion_detail.update(S1=f"{s.values[0]:.4e}", S20=f"{s.final:.4e}", odd_final=z.final)
    assert s.final >= -1e-3 * abs(s.values[0])
    assert all(v == 0.0 for v in z.values)


@pytest.mark.criterion(12)
def test_mass_invariance_and_bands(criterion_detail):
    f12 = render.form_for(12, 0, render.Y_MIN)
    gap = render.invariance_check(f12, 10, seed=0)
    failing = []
    worst = 0.0
    for k in range(40, 201, 2):
        f = qforms.STORE.get(k, max(render.needed_terms(k, 1.0, 20), sym2_nmax(k)))[0]
        band = render.row_variation(f, (k - 1) / (8 * math.pi))
        bulk = render.row_variation(f, 1.1)
        worst = max(worst, band / bulk)
        if not band * 10 <= bulk:
            failing.append(k)
    criterion_detail.update(invariance_gap=f"{gap:.1e}", worst_band_ratio=f"{worst:.3g}",
                            failing_k=",".join(map(str, failing)) or "none")
    assert gap <= 1e-8
    assert failing == []


@pytest.mark.criterion(13)
def test_ghosh_sarnak_decay(criterion_detail):
    r50 = render.ghosh_sarnak_residual(render.form_for(50, 0, 1.0), 2)
    r200 = render.ghosh_sarnak_residual(render.form_for(200, 0, 1.0), 2)
    criterion_detail.update(residual_k50=f"{r50:.3g}", residual_k200=f"{r200:.3g}")
    assert r200 < r50


@pytest.mark.criterion(14)
def test_cli_thread_determinism(tmp_path, criterion_detail):
    outs = []
    for threads in (1, 8):
        d = tmp_path / f"t{threads}"
        env = dict(os.environ, CUSPVARIANCE_CACHE=str(tmp_path / f"cache{threads}.txt"))
        r = subprocess.run([sys.executable, "-m", "cuspvariance", "variance", "--theta", "0.3", "--K", "64",
                            "--threads", str(threads), "--out", str(d)], env=env, capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        outs.append({p.name: p.read_bytes() for p in sorted(d.glob("*.csv"))})
    criterion_detail.update(files=",".join(outs[0]))
    assert len(outs[0]) == 2
    assert outs[0] == outs[1]
