"""Pure-Python reference implementation of the hot numerical kernels.

The compiled module ``_ckernels`` mirrors these functions one for one;
``_core`` picks whichever is available at import time.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

_TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Kloosterman sums
# ---------------------------------------------------------------------------

def kloosterman(m: int, n: int, c: int) -> float:
    """S(m, n; c) by enumeration over units mod c."""
    if c < 1:
        raise ValueError("modulus must be >= 1")
    if c == 1:
        return 1.0
    m %= c
    n %= c
    if m > n:
        # S(m, n; c) = S(n, m; c); a fixed order makes the symmetry exact
        m, n = n, m
    s = 0.0
    comp = 0.0
    for a in range(1, c):
        if math.gcd(a, c) != 1:
            continue
        ab = pow(a, -1, c)
        r = (a * m + ab * n) % c
        y = math.cos(_TWO_PI * r / c) - comp
        t = s + y
        comp = (t - s) - y
        s = t
    return s


def kloosterman_many(m: int, n: int, cmax: int) -> np.ndarray:
    """S(m, n; c) for c = 1..cmax (index 0 unused)."""
    out = np.zeros(cmax + 1)
    for c in range(1, cmax + 1):
        out[c] = kloosterman(m, n, c)
    return out


# ---------------------------------------------------------------------------
# J-Bessel of integer order
# ---------------------------------------------------------------------------

def _j_series(nu: int, x: float) -> float:
    y = 0.25 * x * x
    term = 1.0
    s = 1.0
    m = 0
    while True:
        m += 1
        term *= -y / (m * (nu + m))
        s += term
        if abs(term) < 1e-17 * abs(s) or m > 500:
            break
    if nu == 0:
        return s
    lp = nu * (math.log(x) - math.log(2.0)) - math.lgamma(nu + 1.0)
    if lp < -745.0:
        return 0.0
    return math.exp(lp) * s


def _hankel01(mu: int, x: float) -> float:
    four_mu2 = 4.0 * mu * mu
    p = 0.0
    q = 0.0
    a = 1.0
    prev = math.inf
    k = 0
    while True:
        mag = abs(a)
        if mag < 1e-17 or mag > prev:
            break
        prev = mag
        if k % 2 == 0:
            p += a if (k // 2) % 2 == 0 else -a
        else:
            q += a if ((k - 1) // 2) % 2 == 0 else -a
        k += 1
        a *= (four_mu2 - (2.0 * k - 1.0) ** 2) / (8.0 * k * x)
    cx = math.cos(x)
    sx = math.sin(x)
    # chi = x - phi with phi = pi/4 (mu=0) or 3pi/4 (mu=1)
    r = math.sqrt(0.5)
    if mu == 0:
        cphi, sphi = r, r
    else:
        cphi, sphi = -r, r
    cchi = cx * cphi + sx * sphi
    schi = sx * cphi - cx * sphi
    return math.sqrt(2.0 / (math.pi * x)) * (p * cchi - q * schi)


def _j_forward(nu: int, x: float) -> float:
    j0 = _hankel01(0, x)
    if nu == 0:
        return j0
    j1 = _hankel01(1, x)
    for n in range(1, nu):
        j0, j1 = j1, (2.0 * n / x) * j1 - j0
    return j1


def _j_miller(nu: int, x: float) -> float:
    top = max(nu, int(x)) + 1
    start = top + 20 + int(math.sqrt(40.0 * top))
    if start % 2:
        start += 1
    jp1 = 0.0
    j = 1e-300
    norm = 0.0
    want = 0.0
    for n in range(start, 0, -1):
        jm1 = (2.0 * n / x) * j - jp1
        jp1, j = j, jm1
        # j now holds the unnormalized J_{n-1}
        if n - 1 == nu:
            want = j
        if (n - 1) % 2 == 0 and n - 1 > 0:
            norm += 2.0 * j
        if abs(j) > 1e250:
            j *= 1e-250
            jp1 *= 1e-250
            norm *= 1e-250
            want *= 1e-250
    norm += j
    return want / norm


def bessel_j(nu: int, x: float) -> float:
    """J_nu(x) for integer nu >= 0 and real x >= 0."""
    if nu < 0 or x < 0.0:
        raise ValueError("need nu >= 0 and x >= 0")
    if nu > 1_000_000 or x > 1e8:
        raise ValueError("argument outside the supported domain")
    if x == 0.0:
        return 1.0 if nu == 0 else 0.0
    if x <= 2.0 or x * x <= 8.0 * (nu + 1):
        return _j_series(nu, x)
    if x >= 25.0 and nu < x:
        return _j_forward(nu, x)
    return _j_miller(nu, x)


def bessel_j_many(nu: int, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    return np.array([bessel_j(nu, float(x)) for x in xs.ravel()]).reshape(xs.shape)


# ---------------------------------------------------------------------------
# K-Bessel of imaginary order, double precision
# ---------------------------------------------------------------------------

def k_imag_double(t: float, x: float, hscale: float = 1.0) -> tuple[float, float]:
    """Trapezoid rule for K_{it}(x); returns (value, integral of |integrand|).

    The integrand e^{-x cosh u} cos(tu) already decays double
    exponentially, so the plain trapezoid rule on the half line converges
    geometrically in 1/h.
    """
    t = abs(t)
    big = 50.0
    upper = math.acosh(1.0 + big / x)
    h = min(0.25, _TWO_PI / (t + 30.0), 0.6 / math.sqrt(x)) * hscale
    n = int(math.ceil(upper / h))
    u = h * np.arange(n + 1)
    env = np.exp(-x * (np.cosh(u) - 1.0))
    f = env * np.cos(t * u)
    f[0] *= 0.5
    env[0] *= 0.5
    scale = math.exp(-x)
    val = h * math.fsum(f) * scale
    absint = h * math.fsum(np.abs(f)) * scale
    return val, absint


# ---------------------------------------------------------------------------
# holomorphic form on a grid
# ---------------------------------------------------------------------------

def form_grid(lam, k: int, xs, ys, nterms: int):
    """Scaled sums of lambda(n) n^((k-1)/2) e(nz) over a grid.

    Returns (re, im, logscale) with shapes (ny, nx), (ny, nx), (ny,) such
    that f(x_i + i y_j) = exp(logscale[j]) * (re[j, i] + 1j im[j, i]).
    """
    lam = np.asarray(lam, dtype=float)
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    n = np.arange(1, nterms + 1, dtype=float)
    lamn = lam[1:nterms + 1]
    half = 0.5 * (k - 1)
    logn = np.log(n)
    nx = np.outer(n, xs)
    ph = _TWO_PI * (nx - np.floor(nx))
    lt = half * logn[None, :] - _TWO_PI * np.outer(ys, n)
    scale = lt.max(axis=1)
    w = lamn * np.exp(lt - scale[:, None])
    re = w @ np.cos(ph)
    im = w @ np.sin(ph)
    return re, im, scale
