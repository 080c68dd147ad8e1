"""Shifted convolution sums, squeezed Poincare masses and moment sums.

Mass of a squeezed observable
-----------------------------
For a normalized eigenform f of weight k with a(n) = lambda_f(n) n^((k-1)/2)
the probability measure y^k |f|^2 dmu / ||f||^2 has

    1 / ||f||^2 = (4 pi)^k pi / (2 Gamma(k) L(1, sym^2 f)),

and unfolding against V(y/H) e(hx) gives

    mu_f(M_H P_{V,h}) = (4 pi)^k pi / (2 Gamma(k) L(1, sym^2 f))
                        * sum_n a(n) a(n+h) int V(y/H) y^(k-2) e^{-2 pi (2n+h) y} dy.

The y-integrals do not depend on f and are cached per weight.  All sums
are carried in log space, since above the Planck scale the mass is far
below the double-precision range.
"""

from __future__ import annotations

import csv
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from . import btheta, kernels
from ._core import form_grid
from .kernels import QuadratureSpec, TestWeight, integrate
from .petersson import l_sym2_at_1, sym2_nmax
from .qforms import STORE, FormStore, HeckeBasis, HeckeEigenform, _factor, _prime_power

__all__ = [
    "SqueezeSpec",
    "PoincareObservable",
    "VarianceReport",
    "shifted_conv_direct",
    "shifted_conv_hecke",
    "blf_main_term",
    "qvthm_experiment",
    "mu_poincare_exact",
    "mu_poincare_log",
    "mu_poincare_approx",
    "mu_scale",
    "variance_experiment",
    "zeroth_moment",
    "first_moment",
    "planck_failure_probe",
    "euler_maclaurin_check",
    "weights_for",
]

ZETA2 = math.pi ** 2 / 6.0
VOL_M = math.pi / 3.0
_LOG_CUT = 80.0  # terms below exp(-_LOG_CUT) times the largest one are dropped
_SPEC = QuadratureSpec(abs_tol=1e-300, rel_tol=1e-12, max_depth=4000)
_SPEC_LOOSE = QuadratureSpec(abs_tol=1e-300, rel_tol=1e-8, max_depth=4000)


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SqueezeSpec:
    """Squeezing at scale H(k) = (k-1)^theta towards the cusp."""

    theta: float

    def __post_init__(self):
        if not self.theta >= 0:
            raise ValueError("theta must be >= 0")

    def H(self, k: int) -> float:
        return float(k - 1) ** self.theta

    def squeeze(self, psi: Callable, k: int) -> Callable:
        """z -> psi(x + i y / H(k))."""
        H = self.H(k)
        return lambda z: psi(complex(z.real, z.imag / H))

    @staticmethod
    def ball_volume(H: float, spec: QuadratureSpec | None = None) -> float:
        """Hyperbolic area of {y > H, |x| <= 1/2} by quadrature."""
        if H <= 0:
            raise ValueError("H must be positive")
        return integrate(lambda y: 1.0 / y ** 2, (H, math.inf), spec)[0]


@dataclass(frozen=True)
class PoincareObservable:
    """P_{V,h}, equal to V(y) e(hx) on the fundamental domain when supp V lies above 1."""

    V: TestWeight
    h: int

    def __post_init__(self):
        if self.V.a < 1.0:
            raise ValueError("the weight must be supported in [1, inf)")
        object.__setattr__(self, "h", int(self.h))

    def __call__(self, z: complex) -> complex:
        return self.V(z.imag) * complex(math.cos(2 * math.pi * self.h * z.real),
                                        math.sin(2 * math.pi * self.h * z.real))

    def nu(self) -> float:
        """Mean against the normalized hyperbolic measure."""
        if self.h != 0:
            return 0.0
        return integrate(lambda y: self.V(y) / y ** 2, self.V.support)[0] / VOL_M

    def describe(self) -> str:
        return f"P[{self.V.describe()};h={self.h}]"


@dataclass
class VarianceReport:
    """Empirical sum against its predicted main term.

    ``per_k`` rows are ``(k, u, dim, contribution)``.
    """

    kind: str
    theta: float
    K: float
    obs1: str
    obs2: str
    empirical: float
    predicted: float
    per_k: list = field(default_factory=list)

    @property
    def ratio(self) -> float:
        if self.predicted == 0 or not math.isfinite(self.predicted):
            return math.nan
        return self.empirical / self.predicted

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["theta", "K", "obs1", "obs2", "empirical", "predicted", "ratio"])
            w.writerow([repr(float(self.theta)), repr(float(self.K)), self.obs1, self.obs2,
                        repr(self.empirical), repr(self.predicted), repr(self.ratio)])

    def per_k_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "u", "dim", "contribution"])
            for k, u, dim, c in self.per_k:
                w.writerow([k, repr(float(u)), dim, repr(float(c))])


# ---------------------------------------------------------------------------
# eigenvalues at scattered arguments
# ---------------------------------------------------------------------------

def _lambda_points(f: HeckeEigenform, ns) -> np.ndarray:
    """lambda_f(n) as floats for arbitrary n whose prime factors are stored."""
    lam = f.lam
    out = np.empty(len(ns))
    cache: dict[int, float] = {}
    for i, n in enumerate(ns):
        n = int(n)
        if n <= f.n_max:
            out[i] = lam[n]
            continue
        v = cache.get(n)
        if v is None:
            v = 1.0
            for p, e in _factor(n):
                if p > f.n_max:
                    raise ValueError(f"lambda({p}) not available (n_max={f.n_max})")
                v *= _prime_power(float(lam[p]), e)
            cache[n] = v
        out[i] = v
    return out


# ---------------------------------------------------------------------------
# shifted convolution sums
# ---------------------------------------------------------------------------

def shifted_conv_direct(f: HeckeEigenform, W: TestWeight, X: float, h: int) -> float:
    """sum_n lambda(n) lambda(n+h) W((n + h/2)/X)."""
    if h < 0:
        raise ValueError("h must be >= 0")
    a, A = W.support
    lo = max(1, math.ceil(a * X - h / 2))
    hi = math.floor(A * X - h / 2)
    if hi < lo:
        return 0.0
    n = np.arange(lo, hi + 1)
    w = W((n + h / 2) / X)
    l1 = _lambda_points(f, n)
    l2 = _lambda_points(f, n + h)
    return math.fsum(l1 * l2 * w)


def _divisors(n: int) -> list[int]:
    small = [d for d in range(1, math.isqrt(n) + 1) if n % d == 0]
    return sorted(set(small + [n // d for d in small]))


def shifted_conv_hecke(f: HeckeEigenform, W: TestWeight, X: float, h: int) -> float:
    """The same sum after the Hecke relations.

    h >= 1: sum_{d | h} sum_r lambda(r(r+d)) W((h/d)(r + d/2)/X);
    h = 0:  sum_{d >= 1} sum_r lambda(r^2) W(dr/X).
    """
    if h < 0:
        raise ValueError("h must be >= 0")
    a, A = W.support
    terms = []
    if h == 0:
        d_hi = math.floor(A * X)
        for d in range(1, d_hi + 1):
            lo = max(1, math.ceil(a * X / d))
            hi = math.floor(A * X / d)
            if hi < lo:
                continue
            r = np.arange(lo, hi + 1)
            terms.append(math.fsum(_lambda_points(f, r * r) * W(d * r / X)))
        return math.fsum(terms)
    for d in _divisors(h):
        m = h // d
        lo = max(1, math.ceil(a * X / m - d / 2))
        hi = math.floor(A * X / m - d / 2)
        if hi < lo:
            continue
        r = np.arange(lo, hi + 1)
        terms.append(math.fsum(_lambda_points(f, r * (r + d)) * W(m * (r + d / 2) / X)))
    return math.fsum(terms)


def blf_main_term(W1: TestWeight, W2: TestWeight, h1: int, h2: int,
                  spec: QuadratureSpec | None = None) -> float:
    """tau_1((h1, h2)) int W1(h1 y) W2(h2 y) dy."""
    if h1 < 1 or h2 < 1:
        raise ValueError("h1 and h2 must be >= 1")
    lo = max(W1.a / h1, W2.a / h2)
    hi = min(W1.A / h1, W2.A / h2)
    if hi <= lo:
        return 0.0
    val, _ = integrate(lambda y: W1(h1 * y) * W2(h2 * y), (lo, hi), spec)
    return kernels.tau1(math.gcd(h1, h2)) * val


# ---------------------------------------------------------------------------
# weight ranges and bases
# ---------------------------------------------------------------------------

def weights_for(K: float, u: TestWeight) -> list[tuple[int, float]]:
    """Even k >= 12 with u((k-1)/K) != 0, paired with that value."""
    out = []
    k = 12
    while (k - 1) / K < u.A:
        if (k - 1) / K > u.a:
            w = float(u((k - 1) / K))
            if w != 0.0:
                out.append((k, w))
        k += 2
    return out


def _basis(k: int, need: int, store: FormStore) -> HeckeBasis:
    return store.get(k, max(need, sym2_nmax(k)))


def _ordered_map(fn, items, threads: int):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _u_integral(u: TestWeight, power: float) -> float:
    return integrate(lambda y: u(y) * y ** power, u.support)[0]


def qvthm_experiment(K: float, u: TestWeight, theta: float, W1: TestWeight, h1: int,
                     W2: TestWeight, h2: int, store: FormStore | None = None,
                     threads: int = 1) -> VarianceReport:
    """Harmonic average of shifted convolution products against their main term.

    Empirical: sum_k u((k-1)/K) (2 pi^2/(k-1)) sum_f A_f^{W1}(X,h1) A_f^{W2}(X,h2) / L(1, sym^2 f)
    with X = (k-1)^(1-theta).  Predicted: B (K^(2-theta)/2) int u(y) y^(1-theta) dy.
    """
    store = store or STORE
    cells = weights_for(K, u)

    def work(cell):
        k, uk = cell
        X = float(k - 1) ** (1.0 - theta)
        need = int(max(W1.A, W2.A) * X + max(h1, h2)) + 2
        basis = _basis(k, need, store)
        terms = []
        for f in basis:
            L = l_sym2_at_1(f).value
            terms.append(shifted_conv_direct(f, W1, X, h1) * shifted_conv_direct(f, W2, X, h2) / L)
        return k, uk, basis.dim, uk * 2.0 * math.pi ** 2 / (k - 1) * math.fsum(terms)

    rows = _ordered_map(work, cells, threads)
    emp = math.fsum(r[3] for r in rows)
    pred = blf_main_term(W1, W2, h1, h2) * K ** (2.0 - theta) / 2.0 * _u_integral(u, 1.0 - theta)
    return VarianceReport("qvthm", theta, K, f"{W1.describe()};h={h1}", f"{W2.describe()};h={h2}",
                          emp, pred, rows)


# ---------------------------------------------------------------------------
# unfolded mass
# ---------------------------------------------------------------------------

class _IntegralCache:
    """log I_n (without the H^(k-1) factor) keyed by (k, V, |h|, H)."""

    def __init__(self):
        self._lock = threading.Lock()
        self._data: dict = {}

    def get(self, key, build):
        with self._lock:
            hit = self._data.get(key)
        if hit is not None:
            return hit
        val = build()
        with self._lock:
            self._data.setdefault(key, val)
            return self._data[key]

    def clear(self):
        with self._lock:
            self._data.clear()


_ICACHE = _IntegralCache()


def _log_integral(V: TestWeight, k: int, beta: float) -> tuple[float, float]:
    """Sign and log of int_a^A V(s) s^(k-2) e^(-beta s) ds."""
    a, A = V.support

    def expo(s):
        sg, lv = V.logabs(s)
        return sg, lv + (k - 2) * np.log(s) - beta * s

    def rel(s, s0, lv0):
        # exponent minus its value at s0, formed without cancelling large terms
        sg, lv = V.logabs(s)
        return sg, (lv - lv0) + (k - 2) * np.log1p((s - s0) / s0) - beta * (s - s0)

    grid = a + (A - a) * np.linspace(0.0, 1.0, 4001)[1:-1]
    _, g = expo(grid)
    i = int(np.argmax(g))
    if not np.isfinite(g[i]):
        return 0.0, -math.inf
    lo = grid[i - 1] if i > 0 else a + 1e-15 * (A - a)
    hi = grid[i + 1] if i + 1 < grid.size else A - 1e-15 * (A - a)
    s_a = float(grid[i])
    lv_a = float(V.logabs(np.array([s_a]))[1][0])
    opt = minimize_scalar(lambda s: -float(rel(np.array([s]), s_a, lv_a)[1][0]), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-15 * (A - a)})
    s_star = float(opt.x) if -opt.fun > 0 else s_a
    lv_star = float(V.logabs(np.array([s_star]))[1][0])
    gmax = lv_star + (k - 2) * math.log(s_star) - beta * s_star
    # restrict to the window where the integrand is within e^-70 of its peak
    live = np.nonzero(g > g[i] - 70.0)[0]
    j0 = min(int(live[0]), i) - 1
    j1 = max(int(live[-1]), i) + 1
    w_lo = grid[j0] if j0 >= 0 else a
    w_hi = grid[j1] if j1 < grid.size else A

    def integrand(s):
        sg, e = rel(np.asarray(s, dtype=float), s_star, lv_star)
        return sg * np.exp(e)

    try:
        val, _ = integrate(integrand, (w_lo, w_hi), _SPEC, points=(s_star,))
    except kernels.QuadratureError:
        # peaks squeezed against the support end (theta >> 1) lose digits in s - a
        val, _ = integrate(integrand, (w_lo, w_hi), _SPEC_LOOSE, points=(s_star,))
    if val == 0.0:
        return 0.0, -math.inf
    return math.copysign(1.0, val), gmax + math.log(abs(val))


def _mass_envelope(k: int, V: TestWeight, h: int, H: float) -> list[tuple[int, float, float]]:
    """Rows (n, sign I_n, log|I_n| + (k-1)/2 log(n(n+h))) covering all relevant n.

    Here I_n = int V(y/H) y^(k-2) e^{-2 pi (2n+h) y} dy.  Iteration stops
    once the peak y* = (k-2)/(2 pi (2n+h)) has passed below a_V H and the
    log envelope has fallen ``_LOG_CUT`` below its maximum.
    """
    key = (k, V, h, H)

    def build():
        rows = []
        best = -math.inf
        n_past = ((k - 2) / (2 * math.pi * V.a * H) - h) / 2.0
        n = 1
        while True:
            beta = 2 * math.pi * (2 * n + h) * H
            sg, li = _log_integral(V, k, beta)
            env = li + (k - 1) * math.log(H) + 0.5 * (k - 1) * math.log(n * (n + h))
            rows.append((n, sg, env))
            best = max(best, env)
            if n > n_past and env < best - _LOG_CUT:
                break
            n += 1
        return rows

    return _ICACHE.get(key, build)


def _log_norm(f: HeckeEigenform) -> float:
    """log((4 pi)^k pi / (2 Gamma(k) L(1, sym^2 f)))."""
    k = f.weight
    L = l_sym2_at_1(f).value
    return k * math.log(4 * math.pi) + math.log(math.pi / 2) - float(gammaln(k)) - math.log(L)


def _logsumexp_signed(signs, logs) -> tuple[float, float]:
    signs = np.asarray(signs, dtype=float)
    logs = np.asarray(logs, dtype=float)
    keep = (signs != 0) & np.isfinite(logs)
    if not keep.any():
        return 0.0, -math.inf
    m = float(np.max(logs[keep]))
    s = math.fsum(signs[keep] * np.exp(logs[keep] - m))
    if s == 0.0:
        return 0.0, -math.inf
    return math.copysign(1.0, s), m + math.log(abs(s))


def mu_poincare_log(f: HeckeEigenform, P: PoincareObservable, squeeze: SqueezeSpec) -> tuple[float, float]:
    """Sign and natural log of |mu_f(M_H P_{V,h})|, H = (k-1)^theta."""
    k = f.weight
    h = abs(P.h)
    H = squeeze.H(k)
    rows = _mass_envelope(k, P.V, h, H)
    ns = np.array([r[0] for r in rows])
    l1 = _lambda_points(f, ns)
    l2 = _lambda_points(f, ns + h)
    ll = l1 * l2
    with np.errstate(divide="ignore"):
        logs = np.array([r[2] for r in rows]) + np.log(np.abs(ll))
    signs = np.sign(ll) * np.array([r[1] for r in rows])
    sg, lg = _logsumexp_signed(signs, logs)
    return sg, lg + _log_norm(f)


def _mass_grid(f: HeckeEigenform, P: PoincareObservable, squeeze: SqueezeSpec) -> complex:
    """Independent evaluation: integrate e(hx) y^k |f|^2 over a periodic x-grid, then over y."""
    k = f.weight
    H = squeeze.H(k)
    a, A = P.V.support
    y_lo = a * H
    nterms = int(math.ceil(3.0 * (k - 1) / (4 * math.pi * y_lo) + 40))
    lam = _lambda_points(f, np.arange(nterms + 1))
    lam[0] = 0.0
    nx = 2 * nterms + abs(P.h) + 8
    xs = np.arange(nx) / nx
    phase = np.exp(2j * math.pi * P.h * xs)
    lognorm = _log_norm(f)

    def inner(ys):
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        re, im, scale = form_grid(lam, k, xs, ys, nterms)
        sq = re ** 2 + im ** 2
        avg = (sq * phase[None, :]).mean(axis=1)
        wt = P.V(ys / H) * np.exp(lognorm + (k - 2) * np.log(ys) + 2.0 * scale)
        return wt * avg, np.abs(wt) * sq.mean(axis=1)

    # composite Gauss-Legendre in y, doubled until the value settles relative
    # to the mass of |f|^2 itself (rounding in the x-average sits at that level)
    x, w = np.polynomial.legendre.leggauss(20)
    prev = None
    for level in range(3, 12):
        edges = np.linspace(y_lo, A * H, 2 ** level + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        ys = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        ws = (half[:, None] * w[None, :]).ravel()
        vals, mass = inner(ys)
        val = complex(np.sum(ws * vals))
        if prev is not None and abs(val - prev) <= 1e-13 * float(np.sum(ws * mass)):
            return val
        prev = val
    raise kernels.QuadratureError("grid evaluation of the mass did not settle")


def mu_poincare_exact(f: HeckeEigenform, P: PoincareObservable, squeeze: SqueezeSpec,
                      via: str = "unfold"):
    """mu_f(M_H P_{V,h}) for the normalized measure y^k |f|^2 dmu / ||f||^2.

    Parameters
    ----------
    via : {"unfold", "grid"}
        ``unfold`` sums the unfolded series (real by construction).
        ``grid`` integrates e(hx) y^k |f(z)|^2 numerically over x and y and
        returns a complex number, whose imaginary part measures realness.
    """
    if via == "unfold":
        sg, lg = mu_poincare_log(f, P, squeeze)
        return sg * math.exp(lg) if lg > -745.0 else 0.0 * sg
    if via == "grid":
        return _mass_grid(f, P, squeeze)
    raise ValueError(f"unknown method {via!r}")


def mu_poincare_approx(f: HeckeEigenform, P: PoincareObservable, squeeze: SqueezeSpec) -> float:
    """Saddle-point approximation of the mass.

    (2 pi^2 / ((k-1) L)) sum_n lambda(n) lambda(n+h) V(X / (4 pi (n + h/2)))
    (sqrt(n(n+h)) / (n + h/2))^(k-1), X = (k-1)^(1-theta).
    """
    k = f.weight
    h = abs(P.h)
    X = float(k - 1) ** (1.0 - squeeze.theta)
    a, A = P.V.support
    lo = max(1, math.ceil(X / (4 * math.pi * A) - h / 2))
    hi = math.floor(X / (4 * math.pi * a) - h / 2)
    if hi < lo:
        return 0.0
    n = np.arange(lo, hi + 1, dtype=float)
    m = n + h / 2
    w = P.V(X / (4 * math.pi * m))
    ratio = np.exp(0.5 * (k - 1) * (np.log(n) + np.log(n + h)) - (k - 1) * np.log(m))
    ll = _lambda_points(f, n.astype(np.int64)) * _lambda_points(f, (n + h).astype(np.int64))
    L = l_sym2_at_1(f).value
    return 2 * math.pi ** 2 / ((k - 1) * L) * math.fsum(ll * w * ratio)


def mu_scale(P: PoincareObservable, squeeze: SqueezeSpec, k: int) -> float:
    """Natural size of the mass: (3/pi) H^-1 int |V(y)| y^-2 dy."""
    val = integrate(lambda y: np.abs(P.V(y)) / y ** 2, P.V.support)[0]
    return val / VOL_M / squeeze.H(k)


def mass_nmax(k: int, P: PoincareObservable, squeeze: SqueezeSpec) -> int:
    """Largest n + |h| entering the unfolded mass at weight k."""
    rows = _mass_envelope(k, P.V, abs(P.h), squeeze.H(k))
    return rows[-1][0] + abs(P.h)


# ---------------------------------------------------------------------------
# moments and variance
# ---------------------------------------------------------------------------

def _per_form_sum(k: int, need: int, store: FormStore, fn) -> tuple[int, float]:
    basis = _basis(k, need, store)
    return basis.dim, math.fsum(fn(f) for f in basis)


def zeroth_moment(K: float, u: TestWeight, store: FormStore | None = None,
                  threads: int = 1) -> VarianceReport:
    """sum_k u((k-1)/K) sum_f L(1, sym^2 f) against (zeta(2)^2/12)(K^2/2) int u(y) y dy."""
    store = store or STORE
    cells = weights_for(K, u)

    def work(cell):
        k, uk = cell
        dim, s = _per_form_sum(k, 0, store, lambda f: l_sym2_at_1(f).value)
        return k, uk, dim, uk * s

    rows = _ordered_map(work, cells, threads)
    emp = math.fsum(r[3] for r in rows)
    pred = ZETA2 ** 2 / 12.0 * K ** 2 / 2.0 * _u_integral(u, 1.0)
    return VarianceReport("zeroth", math.nan, K, "1", "1", emp, pred, rows)


def first_moment(K: float, u: TestWeight, theta: float, V: TestWeight,
                 store: FormStore | None = None, threads: int = 1) -> VarianceReport:
    """sum_k u sum_f L(1, sym^2 f) mu_f(M_H P_{V,0}) against its main term.

    Main term: nu(P_{V,0}) (zeta(2)^2/12) (K^(2-theta)/2) int u(y) y^(1-theta) dy.
    """
    store = store or STORE
    P = PoincareObservable(V, 0)
    sq = SqueezeSpec(theta)
    cells = weights_for(K, u)

    def work(cell):
        k, uk = cell
        need = mass_nmax(k, P, sq)
        dim, s = _per_form_sum(k, need, store,
                               lambda f: l_sym2_at_1(f).value * mu_poincare_exact(f, P, sq))
        return k, uk, dim, uk * s

    rows = _ordered_map(work, cells, threads)
    emp = math.fsum(r[3] for r in rows)
    pred = P.nu() * ZETA2 ** 2 / 12.0 * K ** (2.0 - theta) / 2.0 * _u_integral(u, 1.0 - theta)
    return VarianceReport("first", theta, K, P.describe(), "1", emp, pred, rows)


def _predicted_b(theta: float, P1: PoincareObservable, P2: PoincareObservable) -> float:
    if not 0.0 < theta < 1.0:
        return math.nan
    regime = btheta.ThetaRegime.of(theta)
    try:
        psi1 = btheta.FourierObservable.single(P1.h, P1.V)
        psi2 = btheta.FourierObservable.single(P2.h, P2.V)
        val = btheta.b_theta_general(psi1, psi2, regime)
    except ValueError:
        return math.nan
    return float(np.real(val))


def variance_experiment(K: float, u: TestWeight, theta: float, P1: PoincareObservable,
                        P2: PoincareObservable, store: FormStore | None = None,
                        threads: int = 1) -> VarianceReport:
    """sum_k u((k-1)/K) sum_f L(1, sym^2 f) (mu_f - nu)(M_H P1) (mu_f - nu)(M_H P2).

    The prediction is B_theta(P1, P2) int u(y) y^-theta dy K^(1-theta);
    it is NaN when theta lies outside (0, 1) or B_theta is undefined for
    the pair (zero mode that is not mean zero).
    """
    store = store or STORE
    sq = SqueezeSpec(theta)
    cells = weights_for(K, u)
    nu1 = P1.nu()
    nu2 = P2.nu()

    def work(cell):
        k, uk = cell
        H = sq.H(k)
        need = max(mass_nmax(k, P1, sq), mass_nmax(k, P2, sq))

        def term(f):
            m1 = mu_poincare_exact(f, P1, sq) - nu1 / H
            m2 = m1 if P2 == P1 else mu_poincare_exact(f, P2, sq) - nu2 / H
            return l_sym2_at_1(f).value * m1 * m2

        dim, s = _per_form_sum(k, need, store, term)
        return k, uk, dim, uk * s

    rows = _ordered_map(work, cells, threads)
    emp = math.fsum(r[3] for r in rows)
    b = _predicted_b(theta, P1, P2)
    pred = b * _u_integral(u, -theta) * K ** (1.0 - theta) if math.isfinite(b) else math.nan
    return VarianceReport("variance", theta, K, P1.describe(), P2.describe(), emp, pred, rows)


# ---------------------------------------------------------------------------
# Planck scale and Euler-Maclaurin
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlanckRow:
    """One (k, form) line of the Planck-scale probe.

    ``log_mu`` is log|mu_f|; ``ratio`` = |mu_f| / nu(M_H psi_V) may
    underflow to 0 while ``log_ratio`` stays finite.
    """

    k: int
    index: int
    log_mu: float
    mu: float
    mu_approx: float
    nu: float
    ratio: float
    log_ratio: float
    nu_scaled: float


def planck_failure_probe(k_list, theta: float, V: TestWeight,
                         store: FormStore | None = None) -> list[PlanckRow]:
    """Exact squeezed mass versus its equidistributed value for theta >= 1."""
    if theta < 1.0:
        raise ValueError("the probe is meant for theta >= 1")
    store = store or STORE
    P = PoincareObservable(V, 0)
    nu0 = P.nu()
    if nu0 == 0.0:
        raise ValueError("V must have nonzero mean int V(y) y^-2 dy")
    sq = SqueezeSpec(theta)
    rows = []
    for k in sorted(int(k) for k in k_list):
        H = sq.H(k)
        nu = nu0 / H
        basis = _basis(k, mass_nmax(k, P, sq), store)
        for f in basis:
            _, lg = mu_poincare_log(f, P, sq)
            mu = mu_poincare_exact(f, P, sq)
            lr = lg - math.log(abs(nu))
            rows.append(PlanckRow(k, f.index, lg, mu, mu_poincare_approx(f, P, sq), nu,
                                  math.exp(lr) if lr > -745 else 0.0, lr, nu * H))
    return rows


def euler_maclaurin_check(V: TestWeight, X: float, r: int,
                          spec: QuadratureSpec | None = None) -> float:
    """|LHS - RHS| in sum_d V(X/(rd)) = (X/r) int V y^-2 dy - int b_2(y) V~(X/(ry)) y^-2 dy.

    The left side is summed directly.  On the right the substitution
    s = X/(ry) turns the correction into (r/X) int b_2(X/(rs)) V~(s) ds,
    integrated with break points where X/(rs) is an integer.
    """
    if not V.closed_form:
        raise ValueError("a closed-form weight is needed")
    spec = spec or QuadratureSpec(abs_tol=1e-14, rel_tol=1e-12, max_depth=20000)
    c = X / r
    a, A = V.support
    d_lo = max(1, math.ceil(c / A))
    d_hi = math.floor(c / a)
    d = np.arange(d_lo, d_hi + 1, dtype=float)
    lhs = math.fsum(V(c / d)) if d.size else 0.0
    mean, _ = integrate(lambda y: V(y) / y ** 2, (a, A), spec)
    Vt = kernels.weight_tilde(V)
    pts = [c / j for j in range(max(1, math.floor(c / A)), math.ceil(c / a) + 1) if a < c / j < A]
    corr, _ = integrate(lambda s: kernels.b2(c / s) * Vt(s), (a, A), spec, points=pts)
    rhs = c * mean - corr / c
    return abs(lhs - rhs)
