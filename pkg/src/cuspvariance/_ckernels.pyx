# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels (same API as ``_pykernels``)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, exp, log, sqrt, fabs, lgamma, acosh, cosh, ceil, floor, M_PI

cnp.import_array()

BACKEND = "cython"

cdef double TWO_PI = 2.0 * M_PI


cdef long long _inv_gcd(long long a, long long c, long long *g) noexcept nogil:
    cdef long long r0 = c, r1 = a, s0 = 0, s1 = 1, q, tmp
    while r1 != 0:
        q = r0 // r1
        tmp = r0 - q * r1
        r0 = r1
        r1 = tmp
        tmp = s0 - q * s1
        s0 = s1
        s1 = tmp
    g[0] = r0
    s0 %= c
    if s0 < 0:
        s0 += c
    return s0


cdef double _kloosterman(long long m, long long n, long long c) noexcept nogil:
    cdef long long a, ab, r, g
    cdef double s = 0.0, comp = 0.0, y, t
    if c == 1:
        return 1.0
    m %= c
    n %= c
    if m < 0:
        m += c
    if n < 0:
        n += c
    if m > n:
        # S(m, n; c) = S(n, m; c); a fixed order makes the symmetry exact
        a = m
        m = n
        n = a
    for a in range(1, c):
        ab = _inv_gcd(a, c, &g)
        if g != 1:
            continue
        r = ((a * m) % c + (ab * n) % c) % c
        y = cos(TWO_PI * <double>r / <double>c) - comp
        t = s + y
        comp = (t - s) - y
        s = t
    return s


def kloosterman(long long m, long long n, long long c):
    """S(m, n; c) by enumeration over units mod c."""
    if c < 1:
        raise ValueError("modulus must be >= 1")
    return _kloosterman(m, n, c)


def kloosterman_many(long long m, long long n, long long cmax):
    """S(m, n; c) for c = 1..cmax (index 0 unused)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(cmax + 1)
    cdef long long c
    with nogil:
        for c in range(1, cmax + 1):
            out[c] = _kloosterman(m, n, c)
    return out


cdef double LN2 = 0.6931471805599453


cdef double _j_series(long nu, double x) noexcept nogil:
    cdef double y = 0.25 * x * x, term = 1.0, s = 1.0, lp
    cdef long m = 0
    while True:
        m += 1
        term *= -y / (<double>m * <double>(nu + m))
        s += term
        if fabs(term) < 1e-17 * fabs(s) or m > 500:
            break
    if nu == 0:
        return s
    lp = nu * (log(x) - LN2) - lgamma(nu + 1.0)
    if lp < -745.0:
        return 0.0
    return exp(lp) * s


cdef double _hankel01(int mu, double x) noexcept nogil:
    cdef double four_mu2 = 4.0 * mu * mu, p = 0.0, q = 0.0, a = 1.0
    cdef double prev = 1e308, mag, cx, sx, r, cphi, sphi, cchi, schi
    cdef long k = 0
    while True:
        mag = fabs(a)
        if mag < 1e-17 or mag > prev:
            break
        prev = mag
        if k % 2 == 0:
            if (k // 2) % 2 == 0:
                p += a
            else:
                p -= a
        else:
            if ((k - 1) // 2) % 2 == 0:
                q += a
            else:
                q -= a
        k += 1
        a *= (four_mu2 - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k * x)
    cx = cos(x)
    sx = sin(x)
    r = sqrt(0.5)
    if mu == 0:
        cphi = r
        sphi = r
    else:
        cphi = -r
        sphi = r
    cchi = cx * cphi + sx * sphi
    schi = sx * cphi - cx * sphi
    return sqrt(2.0 / (M_PI * x)) * (p * cchi - q * schi)


cdef double _j_forward(long nu, double x) noexcept nogil:
    cdef double j0 = _hankel01(0, x), j1, tmp
    cdef long n
    if nu == 0:
        return j0
    j1 = _hankel01(1, x)
    for n in range(1, nu):
        tmp = (2.0 * n / x) * j1 - j0
        j0 = j1
        j1 = tmp
    return j1


cdef double _j_miller(long nu, double x) noexcept nogil:
    cdef long top = nu if nu > <long>x else <long>x
    top += 1
    cdef long start = top + 20 + <long>sqrt(40.0 * top)
    cdef double jp1 = 0.0, j = 1e-300, jm1, norm = 0.0, want = 0.0
    cdef long n
    if start % 2:
        start += 1
    n = start
    while n > 0:
        jm1 = (2.0 * n / x) * j - jp1
        jp1 = j
        j = jm1
        if n - 1 == nu:
            want = j
        if (n - 1) % 2 == 0 and n - 1 > 0:
            norm += 2.0 * j
        if fabs(j) > 1e250:
            j *= 1e-250
            jp1 *= 1e-250
            norm *= 1e-250
            want *= 1e-250
        n -= 1
    norm += j
    return want / norm


cdef double _bessel_j(long nu, double x) noexcept nogil:
    if x == 0.0:
        return 1.0 if nu == 0 else 0.0
    if x <= 2.0 or x * x <= 8.0 * (nu + 1):
        return _j_series(nu, x)
    if x >= 25.0 and nu < x:
        return _j_forward(nu, x)
    return _j_miller(nu, x)


def bessel_j(long nu, double x):
    """J_nu(x) for integer nu >= 0 and real x >= 0."""
    if nu < 0 or x < 0.0:
        raise ValueError("need nu >= 0 and x >= 0")
    if nu > 1000000 or x > 1e8:
        raise ValueError("argument outside the supported domain")
    return _bessel_j(nu, x)


def bessel_j_many(long nu, xs):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xv = np.ascontiguousarray(np.ravel(xs), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(xv.shape[0])
    cdef Py_ssize_t i
    if nu < 0 or nu > 1000000:
        raise ValueError("order outside the supported domain")
    for i in range(xv.shape[0]):
        if xv[i] < 0.0 or xv[i] > 1e8:
            raise ValueError("argument outside the supported domain")
    with nogil:
        for i in range(xv.shape[0]):
            out[i] = _bessel_j(nu, xv[i])
    return out.reshape(np.shape(xs))


def k_imag_double(double t, double x, double hscale=1.0):
    """Trapezoid rule for K_{it}(x); returns (value, integral of |integrand|)."""
    cdef double big = 50.0, upper, h, u, f, env, s = 0.0, sa = 0.0, comp = 0.0, y, tt, scale
    cdef long n, i
    t = fabs(t)
    upper = acosh(1.0 + big / x)
    h = 0.25
    if TWO_PI / (t + 30.0) < h:
        h = TWO_PI / (t + 30.0)
    if 0.6 / sqrt(x) < h:
        h = 0.6 / sqrt(x)
    h *= hscale
    n = <long>ceil(upper / h)
    with nogil:
        for i in range(n + 1):
            u = h * i
            env = exp(-x * (cosh(u) - 1.0))
            f = env * cos(t * u)
            if i == 0:
                f *= 0.5
            y = f - comp
            tt = s + y
            comp = (tt - s) - y
            s = tt
            sa += fabs(f)
    scale = exp(-x)
    return h * s * scale, h * sa * scale


cdef inline void _axpy(Py_ssize_t size, double a, const double *x, double *y) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(size):
        y[i] += a * x[i]


def form_grid(lam, int k, xs, ys, long nterms):
    """Scaled sums of lambda(n) n^((k-1)/2) e(nz) over a grid."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lv = np.ascontiguousarray(lam, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xv = np.ascontiguousarray(xs, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yv = np.ascontiguousarray(ys, dtype=np.float64)
    cdef Py_ssize_t nxp = xv.shape[0], nyp = yv.shape[0], i, j
    cdef long n
    cdef cnp.ndarray[cnp.float64_t, ndim=2] re = np.zeros((nyp, nxp))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] im = np.zeros((nyp, nxp))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scale = np.zeros(nyp)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.zeros(nterms + 1)
    # phase table, shared by every row
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ct = np.empty((nterms + 1, nxp))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] st = np.empty((nterms + 1, nxp))
    cdef double half = 0.5 * (k - 1), m, lt, ph, nxv, y, wn
    if lv.shape[0] < nterms + 1:
        raise ValueError("not enough coefficients")
    with nogil:
        for n in range(1, nterms + 1):
            for i in range(nxp):
                nxv = n * xv[i]
                ph = TWO_PI * (nxv - floor(nxv))
                ct[n, i] = cos(ph)
                st[n, i] = sin(ph)
        for j in range(nyp):
            y = yv[j]
            m = -1e308
            for n in range(1, nterms + 1):
                lt = half * log(<double>n) - TWO_PI * n * y
                if lt > m:
                    m = lt
            for n in range(1, nterms + 1):
                w[n] = lv[n] * exp(half * log(<double>n) - TWO_PI * n * y - m)
            scale[j] = m
            for n in range(1, nterms + 1):
                _axpy(nxp, w[n], &ct[n, 0], &re[j, 0])
                _axpy(nxp, w[n], &st[n, 0], &im[j, 0])
    return re, im, scale
