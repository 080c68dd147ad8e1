"""Special functions, arithmetic sums, quadrature and smooth test weights."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np
from scipy.special import expit

from . import _core

__all__ = [
    "TestWeight",
    "QuadratureSpec",
    "QuadratureError",
    "integrate",
    "bessel_j",
    "bessel_k_imag",
    "kloosterman",
    "tau1",
    "b2",
    "weight_tilde",
    "BACKEND",
]

BACKEND = _core.BACKEND


# ---------------------------------------------------------------------------
# test weights
# ---------------------------------------------------------------------------

def _bump_parts(y, a, A):
    """exp(-1/g), g'/g^2 and the second-derivative factor on (a, A)."""
    g = (y - a) * (A - y)
    gp = A + a - 2.0 * y
    val = np.exp(-1.0 / g)
    d1f = gp / g ** 2
    d2f = gp ** 2 / g ** 4 - 2.0 / g ** 2 - 2.0 * gp ** 2 / g ** 3
    return val, d1f, d2f


def _step(t):
    """Smooth step 0 -> 1 on [0, 1] with its first two derivatives."""
    t = np.clip(t, 1e-300, 1.0 - 1e-16)
    E = 1.0 / t - 1.0 / (1.0 - t)
    S = expit(-E)
    Ep = -1.0 / t ** 2 - 1.0 / (1.0 - t) ** 2
    Epp = 2.0 / t ** 3 - 2.0 / (1.0 - t) ** 3
    Sp = -S * (1.0 - S) * Ep
    Spp = -Sp * (1.0 - 2.0 * S) * Ep - S * (1.0 - S) * Epp
    return S, Sp, Spp


@dataclass(frozen=True)
class TestWeight:
    """Smooth compactly supported weight on the positive reals.

    Families
    --------
    ``bump``
        amp * exp(-1/((y-a)(A-y))) on (a, A).
    ``poly_bump``
        bump times a polynomial with ascending coefficients ``coeffs``.
    ``plateau``
        amp on [a+ramp, A-ramp] with smooth ramps of width ``ramp``.
    ``table``
        cubic interpolation of user samples; no trusted derivatives.
    ``tilde``
        (V'(y) y^2)' of a base weight, see :func:`weight_tilde`.
    """

    __test__ = False  # keep pytest from collecting this class

    family: str
    a: float
    A: float
    amp: float = 1.0
    coeffs: tuple = ()
    ramp: float = 0.0
    table: tuple = ()
    base: "TestWeight | None" = None
    _spline: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0.0 < self.a < self.A):
            raise ValueError("need 0 < a < A")
        if self.family not in ("bump", "poly_bump", "plateau", "table", "tilde", "zero"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "plateau" and not (0.0 < self.ramp <= 0.5 * (self.A - self.a)):
            raise ValueError("ramp must lie in (0, (A-a)/2]")
        if self.family == "table":
            from scipy.interpolate import CubicSpline

            xs, ys = (np.asarray(v, dtype=float) for v in self.table)
            if xs.size < 4 or np.any(np.diff(xs) <= 0):
                raise ValueError("table needs at least 4 increasing abscissae")
            object.__setattr__(self, "_spline", CubicSpline(xs, ys, bc_type="clamped"))
        if self.family == "tilde" and self.base is None:
            raise ValueError("tilde weights need a base")

    # constructors -----------------------------------------------------------
    @classmethod
    def bump(cls, a: float = 1.0, A: float = 2.0, amp: float = 1.0) -> "TestWeight":
        return cls("bump", float(a), float(A), amp=float(amp))

    @classmethod
    def poly_bump(cls, a: float, A: float, coeffs, amp: float = 1.0) -> "TestWeight":
        return cls("poly_bump", float(a), float(A), amp=float(amp),
                   coeffs=tuple(float(c) for c in coeffs))

    @classmethod
    def plateau(cls, a: float, A: float, ramp: float, amp: float = 1.0) -> "TestWeight":
        return cls("plateau", float(a), float(A), amp=float(amp), ramp=float(ramp))

    @classmethod
    def from_table(cls, xs, ys) -> "TestWeight":
        xs = tuple(float(v) for v in xs)
        ys = tuple(float(v) for v in ys)
        return cls("table", xs[0], xs[-1], table=(xs, ys))

    @classmethod
    def zero(cls, a: float = 1.0, A: float = 2.0) -> "TestWeight":
        return cls("zero", float(a), float(A))

    @classmethod
    def mean_zero_bump(cls, a: float = 1.0, A: float = 2.0, amp: float = 1.0) -> "TestWeight":
        """Bump times (y - c) with c chosen so that int V(y) y^-2 dy = 0."""
        b = cls.bump(a, A)
        spec = QuadratureSpec(abs_tol=1e-15, rel_tol=1e-13)
        m1, _ = integrate(lambda y: b(y) / y, (a, A), spec)
        m2, _ = integrate(lambda y: b(y) / y ** 2, (a, A), spec)
        c = m1 / m2
        return cls.poly_bump(a, A, (-c * amp, amp))

    # evaluation -------------------------------------------------------------
    @property
    def support(self) -> tuple[float, float]:
        return (self.a, self.A)

    @property
    def closed_form(self) -> bool:
        return self.family in ("bump", "poly_bump", "plateau", "zero")

    def _eval(self, y: np.ndarray, order: int) -> np.ndarray:
        out = np.zeros_like(y)
        inside = (y > self.a) & (y < self.A)
        if self.family == "zero" or not inside.any():
            return out
        yi = y[inside]
        fam = self.family
        if fam in ("bump", "poly_bump"):
            v, d1f, d2f = _bump_parts(yi, self.a, self.A)
            if fam == "bump":
                p = np.ones_like(yi)
                pp = np.zeros_like(yi)
                ppp = np.zeros_like(yi)
            else:
                c = np.array(self.coeffs)
                p = np.polynomial.polynomial.polyval(yi, c)
                dc = np.polynomial.polynomial.polyder(c) if c.size > 1 else np.zeros(1)
                ddc = np.polynomial.polynomial.polyder(dc) if dc.size > 1 else np.zeros(1)
                pp = np.polynomial.polynomial.polyval(yi, dc)
                ppp = np.polynomial.polynomial.polyval(yi, ddc)
            if order == 0:
                r = v * p
            elif order == 1:
                r = v * (d1f * p + pp)
            else:
                r = v * (d2f * p + 2.0 * d1f * pp + ppp)
            out[inside] = self.amp * r
        elif fam == "plateau":
            s1, s1p, s1pp = _step((yi - self.a) / self.ramp)
            s2, s2p, s2pp = _step((self.A - yi) / self.ramp)
            r = self.ramp
            if order == 0:
                v = s1 * s2
            elif order == 1:
                v = s1p * s2 / r - s1 * s2p / r
            else:
                v = s1pp * s2 / r ** 2 - 2.0 * s1p * s2p / r ** 2 + s1 * s2pp / r ** 2
            out[inside] = self.amp * v
        elif fam == "table":
            out[inside] = self._spline(yi, order)
        elif fam == "tilde":
            if order != 0:
                raise ValueError("derivatives of a tilde weight are not provided")
            b = self.base
            out[inside] = b.d2(yi) * yi ** 2 + 2.0 * yi * b.d1(yi)
        return out

    def _apply(self, y, order: int):
        arr = np.asarray(y, dtype=float)
        res = self._eval(np.atleast_1d(arr), order)
        if arr.ndim == 0:
            return float(res[0])
        return res.reshape(arr.shape)

    def __call__(self, y):
        return self._apply(y, 0)

    def d1(self, y):
        """First derivative."""
        if self.family == "table":
            raise ValueError("table weights have no trusted derivatives")
        return self._apply(y, 1)

    def d2(self, y):
        """Second derivative."""
        if self.family == "table":
            raise ValueError("table weights have no trusted derivatives")
        return self._apply(y, 2)

    def logabs(self, y) -> tuple[np.ndarray, np.ndarray]:
        """Sign and log|V| on an array, without underflow near the support ends.

        Outside the support the sign is 0 and the log is -inf.
        """
        y = np.atleast_1d(np.asarray(y, dtype=float))
        sign = np.zeros_like(y)
        logv = np.full_like(y, -np.inf)
        inside = (y > self.a) & (y < self.A)
        if self.family == "zero" or not inside.any():
            return sign, logv
        yi = y[inside]
        if self.family in ("bump", "poly_bump"):
            g = (yi - self.a) * (self.A - yi)
            p = (np.polynomial.polynomial.polyval(yi, np.array(self.coeffs))
                 if self.family == "poly_bump" else np.ones_like(yi))
            p = self.amp * p
            with np.errstate(divide="ignore"):
                logv[inside] = -1.0 / g + np.log(np.abs(p))
            sign[inside] = np.sign(p)
        elif self.family == "plateau":
            from scipy.special import log_expit

            t1 = (yi - self.a) / self.ramp
            t2 = (self.A - yi) / self.ramp
            lv = np.zeros_like(yi)
            for t in (t1, t2):
                ramp_zone = t < 1.0
                tz = t[ramp_zone]
                lv[ramp_zone] += log_expit(1.0 / (1.0 - tz) - 1.0 / tz)
            with np.errstate(divide="ignore"):
                logv[inside] = lv + np.log(abs(self.amp))
            sign[inside] = np.sign(self.amp)
        else:
            v = self._eval(yi, 0)
            with np.errstate(divide="ignore"):
                logv[inside] = np.log(np.abs(v))
            sign[inside] = np.sign(v)
        return sign, logv

    def describe(self) -> str:
        if self.family in ("bump", "zero"):
            return f"{self.family}[{self.a:g};{self.A:g}]"
        if self.family == "poly_bump":
            return f"poly_bump[{self.a:g};{self.A:g};" + ";".join(f"{c:.6g}" for c in self.coeffs) + "]"
        if self.family == "plateau":
            return f"plateau[{self.a:g};{self.A:g};{self.ramp:g}]"
        if self.family == "tilde":
            return f"tilde({self.base.describe()})"
        return f"table[{self.a:g};{self.A:g}]"


def weight_tilde(V: TestWeight) -> TestWeight:
    """V~(y) = (V'(y) y^2)' = V''(y) y^2 + 2 y V'(y), same support."""
    if not V.closed_form:
        raise ValueError("weight_tilde needs a closed-form weight")
    if V.family == "zero":
        return V
    return TestWeight("tilde", V.a, V.A, base=V)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

class QuadratureError(ArithmeticError):
    """Raised when a quadrature rule does not reach its tolerance."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature settings.

    ``scheme`` is ``"gk"`` (adaptive Gauss-Kronrod 7/15) or ``"tanh-sinh"``
    (double-exponential; exp-sinh on half lines).
    """

    scheme: str = "gk"
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_depth: int = 2000

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.scheme not in ("gk", "tanh-sinh"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    def tighter(self, factor: float = 100.0) -> "QuadratureSpec":
        return QuadratureSpec(self.scheme, self.abs_tol / factor, self.rel_tol / factor, self.max_depth * 2)


_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss nodes sit at odd positions of _XGK (indices 1, 3, 5, 7)
_GW = np.zeros(15)
_GW[[1, 3, 5]] = _WG[:3]
_GW[[13, 11, 9]] = _WG[:3]
_GW[7] = _WG[3]


def _vec(f: Callable) -> Callable[[np.ndarray], np.ndarray]:
    def g(x):
        try:
            r = np.asarray(f(x), dtype=float)
            if r.shape == x.shape:
                return r
        except (TypeError, ValueError):
            pass
        return np.array([float(f(float(v))) for v in x])
    return g


def _gk15(f, a, b):
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = c + h * _NODES
    fx = f(x)
    if not np.all(np.isfinite(fx)):
        raise QuadratureError("integrand not finite on the domain")
    k = h * float(np.dot(_KW, fx))
    g = h * float(np.dot(_GW, fx))
    return k, abs(k - g)


def _adaptive_gk(f, a, b, spec: QuadratureSpec, points=()):
    edges = sorted({a, b, *[p for p in points if a < p < b]})
    heap = []
    total = 0.0
    err = 0.0
    results = {}
    idx = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = _gk15(f, lo, hi)
        heapq.heappush(heap, (-e, idx, lo, hi))
        results[idx] = (v, e)
        idx += 1
    for _ in range(spec.max_depth):
        vals = [results[i][0] for i in results]
        errs = [results[i][1] for i in results]
        total = math.fsum(vals)
        err = math.fsum(errs)
        if err <= max(spec.abs_tol, spec.rel_tol * abs(total)):
            return total, err
        _, i, lo, hi = heapq.heappop(heap)
        del results[i]
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            raise QuadratureError("interval collapsed before reaching tolerance")
        for l2, h2 in ((lo, mid), (mid, hi)):
            v, e = _gk15(f, l2, h2)
            heapq.heappush(heap, (-e, idx, l2, h2))
            results[idx] = (v, e)
            idx += 1
    raise QuadratureError(f"no convergence after {spec.max_depth} subdivisions "
                          f"(estimate {total:.6g} +- {err:.3g})")


def _tanh_sinh(f, a, b, spec: QuadratureSpec):
    c = 0.5 * (a + b)
    h0 = 0.5 * (b - a)
    prev = None
    for level in range(1, 13):
        h = 2.0 ** -level
        t = np.arange(-int(4.0 / h), int(4.0 / h) + 1) * h
        s = 0.5 * math.pi * np.sinh(t)
        x = np.tanh(s)
        w = 0.5 * math.pi * np.cosh(t) / np.cosh(s) ** 2
        keep = np.abs(x) < 1.0
        xv = c + h0 * x[keep]
        keep2 = (xv > a) & (xv < b)
        fx = f(xv[keep2])
        val = h0 * h * math.fsum(w[keep][keep2] * fx)
        if prev is not None:
            e = abs(val - prev)
            if e <= max(spec.abs_tol, spec.rel_tol * abs(val)):
                return val, e
        prev = val
    raise QuadratureError("tanh-sinh did not converge")


def _exp_sinh(f, a, spec: QuadratureSpec):
    prev = None
    for level in range(1, 13):
        h = 2.0 ** -level
        t = np.arange(-int(4.5 / h), int(4.0 / h) + 1) * h
        e = np.exp(0.5 * math.pi * np.sinh(t))
        x = a + e
        w = 0.5 * math.pi * np.cosh(t) * e
        ok = np.isfinite(x) & (x < 1e300)
        fx = f(x[ok])
        val = h * math.fsum(w[ok] * fx)
        if prev is not None:
            err = abs(val - prev)
            if err <= max(spec.abs_tol, spec.rel_tol * abs(val)):
                return val, err
        prev = val
    raise QuadratureError("exp-sinh did not converge")


def integrate(f: Callable, domain, spec: QuadratureSpec | None = None, points=()) -> tuple[float, float]:
    """Integrate a real function over [a, b] or [a, inf).

    Parameters
    ----------
    f : callable
        Evaluated on numpy arrays when possible, pointwise otherwise.
    domain : tuple
        ``(a, b)``; ``b`` may be ``math.inf``.
    spec : QuadratureSpec, optional
    points : sequence of float
        Interior break points (kinks) for the adaptive rule.

    Returns
    -------
    value, error_estimate

    Raises
    ------
    QuadratureError
        If the requested tolerance is not met.
    """
    spec = spec or QuadratureSpec()
    a, b = float(domain[0]), float(domain[1])
    if a == b:
        return 0.0, 0.0
    if b < a:
        v, e = integrate(f, (b, a), spec, points)
        return -v, e
    fv = _vec(f)
    if math.isinf(b):
        if spec.scheme == "tanh-sinh":
            return _exp_sinh(fv, a, spec)

        def g(t):
            x = a + t / (1.0 - t)
            return fv(x) / (1.0 - t) ** 2

        tp = [p / (1.0 + p) for p in ((q - a) for q in points) if p > 0]
        return _adaptive_gk(g, 0.0, 1.0, spec, tp)
    if spec.scheme == "tanh-sinh":
        return _tanh_sinh(fv, a, b, spec)
    return _adaptive_gk(fv, a, b, spec, points)


# ---------------------------------------------------------------------------
# special functions and arithmetic
# ---------------------------------------------------------------------------

def bessel_j(order: int, x: float) -> float:
    """J-Bessel function of integer order.

    Power series for small x, Miller's backward recurrence in the
    transition region, Hankel asymptotics plus forward recurrence for
    large x.  Agrees with reference values to about 13 digits.
    """
    if int(order) != order:
        raise ValueError("order must be an integer")
    return _core.bessel_j(int(order), float(x))


def bessel_k_imag(t: float, x: float, digits: int = 12) -> float:
    """K_{it}(x) for real t and x > 0.

    A double-precision trapezoid rule is used when it keeps ``digits``
    significant digits; otherwise (large |t| with x below the turning
    point) the value is recomputed with ``mpmath`` at raised precision.
    Returns 0.0 once the value underflows (x beyond about 700).
    """
    if x <= 0:
        raise ValueError("x must be positive")
    t = abs(float(t))
    x = float(x)
    if x > 700.0:
        return 0.0
    coarse, _ = _core.k_imag_double(t, x, 1.0)
    val, absint = _core.k_imag_double(t, x, 0.5)
    if val != 0.0:
        lost = math.log10(max(absint / abs(val), 1.0))
    else:
        lost = math.inf
    if 15.5 - lost >= digits and abs(coarse - val) <= 10.0 ** (-digits - 1) * abs(val):
        return val
    dps = int(0.7 * t + digits + 15)
    with mpmath.workdps(dps):
        return float(mpmath.re(mpmath.besselk(mpmath.mpc(0, t), x)))


def kloosterman(m: int, n: int, c: int) -> float:
    """Kloosterman sum S(m, n; c) by direct enumeration."""
    return _core.kloosterman(int(m), int(n), int(c))


def tau1(n: int) -> int:
    """Sum of the divisors of n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    total = 1
    m = n
    p = 2
    while p * p <= m:
        if m % p == 0:
            pe = 1
            s = 1
            while m % p == 0:
                m //= p
                pe *= p
                s += pe
            total *= s
        p += 1 if p == 2 else 2
    if m > 1:
        total *= 1 + m
    return total


def b2(y):
    """Half the periodized second Bernoulli polynomial."""
    y = np.asarray(y, dtype=float)
    r = y - np.floor(y)
    out = 0.5 * (r * r - r + 1.0 / 6.0)
    return float(out) if out.ndim == 0 else out
