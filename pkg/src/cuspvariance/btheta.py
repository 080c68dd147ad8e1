"""The limiting Hermitian forms B_theta and the Maass-form nonnegativity probe.

Observables are finite Fourier expansions psi(z) = sum_m V_m(y) e(mx) with
every V_m supported in [1, inf).  Each V_m is stored as a finite linear
combination of closed-form test weights, so B_theta is exactly
sesquilinear in the stored coefficients.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev, legendre

from . import kernels
from .kernels import QuadratureSpec, TestWeight, integrate

__all__ = [
    "ThetaRegime",
    "FourierObservable",
    "MaassFormData",
    "MaassFormatError",
    "MaassValidationError",
    "f_theta_kernel",
    "b_theta_poincare",
    "b_theta_eisenstein",
    "b_theta_general",
    "parse_maass_file",
    "write_maass_file",
    "i_theta",
    "b_theta_maass",
    "corollary_weighted",
    "sobolev_norm",
    "continuity_battery",
    "PartialSums",
]

_MEAN_TOL = 1e-10


# ---------------------------------------------------------------------------
# regimes and kernel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThetaRegime:
    """theta in (0, 1) with its regime: low (< 1/2), critical (= 1/2) or high (> 1/2)."""

    theta: float
    regime: str

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.regime != _regime_name(self.theta):
            raise ValueError(f"regime {self.regime!r} inconsistent with theta={self.theta}")

    @classmethod
    def of(cls, theta: float) -> "ThetaRegime":
        return cls(float(theta), _regime_name(float(theta)))


def _regime_name(theta: float) -> str:
    if theta < 0.5:
        return "low"
    if theta == 0.5:
        return "critical"
    return "high"


def f_theta_kernel(regime: ThetaRegime, m: int, n: int, y):
    """1, exp(-2 pi^2 y^2 (m^2 + n^2)) or 0 according to the regime."""
    y = np.asarray(y, dtype=float)
    if regime.regime == "low":
        out = np.ones_like(y)
    elif regime.regime == "critical":
        out = np.exp(-2.0 * math.pi ** 2 * y * y * (m * m + n * n))
    else:
        out = np.zeros_like(y)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

def _mean(W: TestWeight) -> float:
    return integrate(lambda y: W(y) / y ** 2, W.support,
                     QuadratureSpec(abs_tol=1e-15, rel_tol=1e-13))[0]


@dataclass(frozen=True)
class FourierObservable:
    """psi(z) = sum_m V_m(y) e(mx), with V_m = sum_j c_j W_j.

    ``modes`` maps m to a tuple of (coefficient, TestWeight) pairs.
    """

    modes: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for m, terms in self.modes.items():
            terms = tuple((complex(c), W) for c, W in terms if c != 0)
            if not terms:
                continue
            for _, W in terms:
                if W.a < 1.0:
                    raise ValueError(f"mode {m}: weight support must lie in [1, inf)")
            clean[int(m)] = terms
        object.__setattr__(self, "modes", clean)
        zero = clean.get(0)
        if zero:
            mean = sum(c * _mean(W) for c, W in zero)
            size = sum(abs(c) * abs(_mean(W)) + abs(c) * _mean_abs(W) for c, W in zero)
            if abs(mean) > _MEAN_TOL * max(size, 1.0):
                raise ValueError(f"zero mode is not mean zero (int V_0 y^-2 dy = {mean})")

    @classmethod
    def single(cls, m: int, V: TestWeight, coef: complex = 1.0) -> "FourierObservable":
        return cls({int(m): ((coef, V),)})

    @property
    def cuspidal(self) -> bool:
        return 0 not in self.modes

    def __add__(self, other: "FourierObservable") -> "FourierObservable":
        modes = {m: list(t) for m, t in self.modes.items()}
        for m, t in other.modes.items():
            modes.setdefault(m, []).extend(t)
        return FourierObservable({m: tuple(t) for m, t in modes.items()})

    def scale(self, c: complex) -> "FourierObservable":
        return FourierObservable({m: tuple((c * a, W) for a, W in t) for m, t in self.modes.items()})

    def mode_value(self, m: int, y):
        terms = self.modes.get(m, ())
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape, dtype=complex)
        for c, W in terms:
            out = out + c * W(y)
        return out

    def __call__(self, z: complex) -> complex:
        return complex(sum(self.mode_value(m, z.imag) * np.exp(2j * math.pi * m * z.real)
                           for m in self.modes))

    def describe(self) -> str:
        parts = []
        for m in sorted(self.modes):
            parts.append(f"{m}:" + "+".join(f"({c.real:g}{c.imag:+g}j){W.describe()}"
                                             for c, W in self.modes[m]))
        return "psi{" + " ".join(parts) + "}"


def _mean_abs(W: TestWeight) -> float:
    return integrate(lambda y: np.abs(W(y)) / y ** 2, W.support)[0]


# ---------------------------------------------------------------------------
# Poincare pairs
# ---------------------------------------------------------------------------

def b_theta_poincare(V1: TestWeight, h1: int, V2: TestWeight, h2: int, regime: ThetaRegime,
                     spec: QuadratureSpec | None = None) -> float:
    """(pi/4) tau_1((|h1|,|h2|)) int V1(y/|h1|) V2(y/|h2|) f_theta(y) dy / y^2."""
    if h1 == 0 or h2 == 0:
        raise ValueError("h1 and h2 must be nonzero")
    if regime.regime == "high":
        return 0.0
    a1, a2 = abs(h1), abs(h2)
    lo = max(V1.a * a1, V2.a * a2)
    hi = min(V1.A * a1, V2.A * a2)
    if hi <= lo:
        return 0.0

    def g(y):
        return V1(y / a1) * V2(y / a2) * f_theta_kernel(regime, h1, h2, y) / y ** 2

    spec = spec or QuadratureSpec(abs_tol=1e-300, rel_tol=1e-13)
    val, _ = integrate(g, (lo, hi), spec)
    return math.pi / 4.0 * kernels.tau1(math.gcd(a1, a2)) * val


# ---------------------------------------------------------------------------
# incomplete Eisenstein pairs
# ---------------------------------------------------------------------------

def _gl(npts: int):
    x, w = legendre.leggauss(npts)
    return x, w


def _g_fixed(terms, t: float, depth: int) -> tuple[complex, float]:
    a = min(W.a for _, W in terms)
    A = max(W.A for _, W in terms)
    cuts = {a, A}
    for j in range(max(1, math.floor(t / A)), math.ceil(t / a) + 1):
        s = t / j
        if a < s < A:
            cuts.add(s)
    cuts = np.array(sorted(cuts))
    x, w = _gl(20)
    frac = np.arange(depth + 1) / depth
    width = cuts[1:, None] - cuts[:-1, None]
    lo = (cuts[:-1, None] + width * frac[None, :-1]).ravel()
    hi = (cuts[:-1, None] + width * frac[None, 1:]).ravel()
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    s = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    ww = (half[:, None] * w[None, :]).ravel()
    vt = np.zeros(s.shape, dtype=complex)
    for c, W in terms:
        vt = vt + c * kernels.weight_tilde(W)(s)
    integrand = ww * kernels.b2(t / s) * vt
    return complex(np.sum(integrand)) / t, float(np.sum(np.abs(integrand))) / t


def _g_function(terms, t: float, depth: int = 4, rel: float = 1e-13) -> complex:
    """G(t) = (1/t) int b_2(t/s) V~(s) ds for V = sum c_j W_j, piecewise Gauss-Legendre.

    Pieces end where t/s is an integer; each piece is split into ``depth``
    equal parts with 20 nodes per part, and ``depth`` is doubled until two
    successive values agree to ``rel`` times the integral of |integrand|.
    """
    prev, _ = _g_fixed(terms, t, depth)
    while depth <= 1024:
        depth *= 2
        cur, mass = _g_fixed(terms, t, depth)
        if abs(cur - prev) <= rel * mass:
            return cur
        prev = cur
    raise kernels.QuadratureError(f"G({t}) did not settle")


def _g_series(terms, t: float) -> complex:
    """G(t) = -sum_d V(t/d), valid for mean-zero V."""
    a = min(W.a for _, W in terms)
    A = max(W.A for _, W in terms)
    d = np.arange(max(1, math.ceil(t / A)), math.floor(t / a) + 1, dtype=float)
    if d.size == 0:
        return 0j
    tot = np.zeros(d.shape, dtype=complex)
    for c, W in terms:
        tot = tot + c * W(t / d)
    return -complex(np.sum(tot))


def _eis_pair(terms1, terms2, method: str = "quadrature", depth: int = 4,
              tol: float = 1e-13) -> complex:
    """(pi/4) int G_1(t) conj(G_2(t)) dt / t^2, integrated over dyadic blocks."""
    if not terms1 or not terms2:
        return 0j
    if method == "quadrature":
        def G(terms, t):
            return _g_function(terms, t, depth)
    elif method == "series":
        def G(terms, t):
            return _g_series(terms, t)
    else:
        raise ValueError(f"unknown method {method!r}")
    t0 = max(min(W.a for _, W in terms1), min(W.a for _, W in terms2))
    real = all(c.imag == 0 for c, _ in terms1 + terms2)
    same = tuple(terms1) == tuple(terms2)

    def block(lo, hi, scale):
        spec = QuadratureSpec(abs_tol=max(tol * scale, 1e-300), rel_tol=1e-11, max_depth=4000)
        memo = {}

        def prod(t):
            v = memo.get(t)
            if v is None:
                g1 = G(terms1, t)
                g2 = g1 if same else G(terms2, t)
                v = memo[t] = g1 * np.conj(g2) / (t * t)
            return v

        re = integrate(lambda ts: np.array([prod(float(t)).real for t in np.atleast_1d(ts)]),
                       (lo, hi), spec)[0]
        im = 0.0 if real else integrate(
            lambda ts: np.array([prod(float(t)).imag for t in np.atleast_1d(ts)]), (lo, hi), spec)[0]
        return re, im

    total_re, total_im = [], []
    lo = t0
    quiet = 0
    scale = 0.0
    while True:
        hi = 2.0 * lo
        br, bi = block(lo, hi, scale)
        total_re.append(br)
        total_im.append(bi)
        scale = max(scale, abs(math.fsum(total_re)) + abs(math.fsum(total_im)))
        if abs(br) + abs(bi) <= tol * scale:
            quiet += 1
            if quiet >= 2:
                break
        else:
            quiet = 0
        if hi > 1e6:
            raise kernels.QuadratureError("Eisenstein t-integral did not decay by t = 1e6")
        lo = hi
    return math.pi / 4.0 * complex(math.fsum(total_re), math.fsum(total_im))


def b_theta_eisenstein(V1: TestWeight, V2: TestWeight, regime: ThetaRegime | None = None,
                       method: str = "quadrature", depth: int = 4) -> float:
    """(pi/4) triple integral of b_2(y1) b_2(y2) V1~(t/y1) V2~(t/y2); theta plays no role.

    The inner y-integrals are G(t) = (1/t) int b_2(t/s) V~(s) ds, so the
    form equals (pi/4) int G_1 G_2 dt / t^2.  ``method="series"`` uses
    G(t) = -sum_d V(t/d) instead, which holds for mean-zero V.

    Raises
    ------
    ValueError
        If a weight is not mean zero or has no closed form.
    """
    for V in (V1, V2):
        if not V.closed_form:
            raise ValueError("closed-form weights are required")
        if V.family != "zero" and abs(_mean(V)) > _MEAN_TOL * max(_mean_abs(V), 1e-300):
            raise ValueError("weights must satisfy int V(y) y^-2 dy = 0")
    if V1.family == "zero" or V2.family == "zero":
        return 0.0
    return _eis_pair(((1.0, V1),), ((1.0, V2),), method, depth).real


def b_theta_general(psi1: FourierObservable, psi2: FourierObservable, regime: ThetaRegime,
                    method: str = "quadrature"):
    """B_theta(psi1, psi2): nonzero-mode pairs plus the zero-mode Eisenstein term.

    Mixed pairs (zero mode against a nonzero mode) do not contribute.
    Returns a float when every coefficient is real, else a complex number.
    """
    total = []
    for m, t1 in sorted(psi1.modes.items()):
        if m == 0:
            continue
        for n, t2 in sorted(psi2.modes.items()):
            if n == 0:
                continue
            for c1, W1 in t1:
                for c2, W2 in t2:
                    v = b_theta_poincare(W1, m, W2, n, regime)
                    if v != 0.0:
                        total.append(c1 * np.conj(c2) * v)
    z1 = psi1.modes.get(0)
    z2 = psi2.modes.get(0)
    if z1 and z2:
        for _, W in z1 + z2:
            if not W.closed_form:
                raise ValueError("zero modes need closed-form weights")
        total.append(_eis_pair(z1, z2, method))
    val = complex(math.fsum(v.real for v in total), math.fsum(v.imag for v in total))
    real_input = all(c.imag == 0 for t in (*psi1.modes.values(), *psi2.modes.values()) for c, _ in t)
    return val.real if real_input else val


# ---------------------------------------------------------------------------
# Sobolev norm and continuity battery
# ---------------------------------------------------------------------------

def sobolev_norm(psi: FourierObservable, N: int = 1) -> float:
    """sqrt(sum_{j <= N} sum_m |2 pi m|^(2j) int_1^inf |V_m(y)|^2 y^-2 dy)."""
    if not psi.cuspidal:
        raise ValueError("the norm is defined here for observables without a zero mode")
    if N < 0:
        raise ValueError("N must be >= 0")
    total = []
    for m, terms in sorted(psi.modes.items()):
        a = min(W.a for _, W in terms)
        A = max(W.A for _, W in terms)
        mass, _ = integrate(lambda y: np.abs(psi.mode_value(m, y)) ** 2 / y ** 2, (a, A))
        for j in range(N + 1):
            total.append((2 * math.pi * abs(m)) ** (2 * j) * mass)
    return math.sqrt(math.fsum(total))


def _random_observable(rng: np.random.Generator, max_mode: int = 4) -> FourierObservable:
    modes = {}
    for _ in range(int(rng.integers(1, 4))):
        m = int(rng.integers(1, max_mode + 1)) * (1 if rng.random() < 0.5 else -1)
        a = 1.0 + 2.0 * rng.random()
        A = a + 0.5 + 2.0 * rng.random()
        c = complex(rng.normal(), rng.normal())
        modes.setdefault(m, []).append((c, TestWeight.bump(a, A)))
    return FourierObservable({m: tuple(t) for m, t in modes.items()})


def continuity_battery(n_cases: int = 20, seed: int = 0, theta: float = 0.3) -> tuple[float, list]:
    """Max of |B_theta(psi1, psi2)| / (||psi1||_{2,1} ||psi2||_{2,1}) over random cuspidal pairs."""
    rng = np.random.default_rng(seed)
    regime = ThetaRegime.of(theta)
    ratios = []
    for _ in range(n_cases):
        p1 = _random_observable(rng)
        p2 = _random_observable(rng)
        b = b_theta_general(p1, p2, regime)
        ratios.append(abs(b) / (sobolev_norm(p1, 1) * sobolev_norm(p2, 1)))
    return max(ratios), ratios


# ---------------------------------------------------------------------------
# Maass forms
# ---------------------------------------------------------------------------

class MaassFormatError(ValueError):
    """Malformed Maass data file."""


class MaassValidationError(ValueError):
    """Hecke relations violated; ``pair`` names the offending (m, n)."""

    def __init__(self, msg: str, pair: tuple[int, int] | None = None):
        super().__init__(msg)
        self.pair = pair


@dataclass(frozen=True)
class MaassFormData:
    """Hecke-Maass form with s = 1/2 + it; ``lam[n]`` for 1 <= n <= n_max (entry 0 unused)."""

    t: float
    parity: str
    lam: tuple
    source: str = ""

    def __post_init__(self):
        if self.parity not in ("even", "odd"):
            raise ValueError("parity must be 'even' or 'odd'")
        if len(self.lam) < 2:
            raise MaassValidationError("empty eigenvalue list")

    @property
    def n_max(self) -> int:
        return len(self.lam) - 1

    def hecke_residuals(self, bound: int = 10) -> dict:
        """|lambda(m)lambda(n) - sum_{d|(m,n)} lambda(mn/d^2)| for m <= n <= bound, mn <= n_max."""
        out = {}
        lam = self.lam
        for m in range(1, bound + 1):
            for n in range(m, bound + 1):
                if m * n > self.n_max:
                    continue
                g = math.gcd(m, n)
                rhs = math.fsum(lam[m * n // (d * d)] for d in range(1, g + 1) if g % d == 0)
                out[(m, n)] = abs(lam[m] * lam[n] - rhs)
        return out

    def validate(self, tol: float = 1e-6) -> None:
        if abs(self.lam[1] - 1.0) > tol:
            raise MaassValidationError(f"lambda(1) = {self.lam[1]} is not 1", (1, 1))
        for pair, r in self.hecke_residuals().items():
            if not r < tol:
                raise MaassValidationError(f"Hecke relation fails at (m, n) = {pair}: residual {r:.3g}",
                                           pair)


def parse_maass_file(path, tol: float = 1e-6) -> MaassFormData:
    """Read and validate a ``cuspvariance-maass v1`` file.

    Raises
    ------
    MaassFormatError
        Malformed header or rows, or n not ascending from 1.
    MaassValidationError
        lambda(1) != 1 or a Hecke relation with m, n <= 10 violated.
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if len(lines) < 3 or lines[0] != "cuspvariance-maass v1":
        raise MaassFormatError("missing 'cuspvariance-maass v1' header")
    key, _, tval = lines[1].partition(" ")
    if key != "t":
        raise MaassFormatError("second line must be 't <decimal>'")
    key, _, parity = lines[2].partition(" ")
    if key != "parity" or parity.strip() not in ("even", "odd"):
        raise MaassFormatError("third line must be 'parity even|odd'")
    try:
        t = float(tval)
    except ValueError as exc:
        raise MaassFormatError(f"bad spectral parameter {tval!r}") from exc
    lam = [0.0]
    for i, ln in enumerate(lines[3:], start=1):
        parts = ln.split()
        if len(parts) != 2:
            raise MaassFormatError(f"bad row {ln!r}")
        try:
            n = int(parts[0])
            v = float(parts[1])
        except ValueError as exc:
            raise MaassFormatError(f"bad row {ln!r}") from exc
        if n != i:
            raise MaassFormatError(f"rows must list n = 1, 2, ... in order (found {n} at {i})")
        lam.append(v)
    if len(lam) < 2:
        raise MaassValidationError("empty eigenvalue list")
    data = MaassFormData(t, parity.strip(), tuple(lam), source=str(path))
    data.validate(tol)
    return data


def write_maass_file(data: MaassFormData, path, comment: str = "") -> None:
    with open(path, "w") as fh:
        fh.write("cuspvariance-maass v1\n")
        fh.write(f"t {data.t!r}\n")
        fh.write(f"parity {data.parity}\n")
        for ln in comment.splitlines():
            fh.write(f"# {ln}\n")
        for n in range(1, data.n_max + 1):
            fh.write(f"{n} {data.lam[n]!r}\n")


class _KTable:
    """Chebyshev interpolants of K_{it}(2 pi y) on unit intervals [j, j+1]."""

    NODES = 40

    def __init__(self, t: float):
        self.t = abs(float(t))
        self._coef: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    def _piece(self, j: int) -> np.ndarray:
        c = self._coef.get(j)
        if c is None:
            x = np.cos(math.pi * (np.arange(self.NODES) + 0.5) / self.NODES)
            y = j + 0.5 * (x + 1.0)
            v = np.array([kernels.bessel_k_imag(self.t, 2 * math.pi * yy, digits=13) for yy in y])
            c = chebyshev.chebfit(x, v, self.NODES - 1)
            with self._lock:
                self._coef.setdefault(j, c)
        return c

    def __call__(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.empty_like(y)
        js = np.floor(y).astype(np.int64)
        for j in np.unique(js):
            sel = js == j
            out[sel] = chebyshev.chebval(2.0 * (y[sel] - j) - 1.0, self._piece(int(j)))
        return out


_KTABLES: dict[float, _KTable] = {}
_KLOCK = threading.Lock()


def _ktable(t: float) -> _KTable:
    with _KLOCK:
        tab = _KTABLES.get(abs(float(t)))
        if tab is None:
            tab = _KTABLES[abs(float(t))] = _KTable(t)
        return tab


def _ray_end(y0: float, regime: ThetaRegime, m: int, n: int) -> float:
    # K_{it1} K_{it2} (2 pi y) decays like e^{-4 pi y}; stop 60 e-folds past y0
    end = y0 + 60.0 / (4 * math.pi)
    if regime.regime == "critical":
        end = min(end, max(y0, math.sqrt(60.0 / (2 * math.pi ** 2 * (m * m + n * n)))))
    return end


def i_theta(m: int, n: int, t1: float, t2: float, regime: ThetaRegime,
            spec: QuadratureSpec | None = None) -> complex:
    """int_{max(m,n)}^inf K_{i t1}(2 pi y) K_{i t2}(2 pi y) f_theta(y) dy / y.

    With s = 1/2 + it the K-Bessel functions have real order-parameter
    pairs, so the value is real; it is returned as a complex number.
    """
    if m < 1 or n < 1:
        raise ValueError("m, n must be >= 1")
    if regime.regime == "high":
        return 0j
    y0 = float(max(m, n))
    y1 = _ray_end(y0, regime, m, n)
    if y1 <= y0:
        return 0j
    k1 = _ktable(t1)
    k2 = k1 if abs(t1) == abs(t2) else _ktable(t2)

    def g(y):
        y = np.atleast_1d(y)
        v2 = k1(y) ** 2 if k2 is k1 else k1(y) * k2(y)
        return v2 * f_theta_kernel(regime, m, n, y) / y

    spec = spec or QuadratureSpec(abs_tol=1e-300, rel_tol=1e-13)
    pts = [float(j) for j in range(math.floor(y0) + 1, math.ceil(y1))]
    val, _ = integrate(g, (y0, y1), spec, points=pts)
    return complex(val, 0.0)


@dataclass
class PartialSums:
    """S_1, ..., S_N of a square-truncated double series (CSV ``N,partial_sum``)."""

    values: list

    @property
    def final(self) -> float:
        return self.values[-1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["N", "partial_sum"])
            for i, v in enumerate(self.values, start=1):
                w.writerow([i, repr(float(v))])


def _square_partial_sums(N: int, term) -> list[float]:
    out = []
    acc = []
    for M in range(1, N + 1):
        for m in range(1, M + 1):
            acc.append(term(m, M))
            if m != M:
                acc.append(term(M, m))
        out.append(math.fsum(acc))
    return out


def b_theta_maass(phi1: MaassFormData, phi2: MaassFormData, regime: ThetaRegime,
                  N: int) -> PartialSums:
    """Partial sums of 4 pi sum_{m,n <= M} tau_1((m,n)) lambda_1(m) lambda_2(n) (mn)^-1/2 I_theta(m,n).

    Zero identically unless both forms are even.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if phi1.parity == "odd" or phi2.parity == "odd":
        return PartialSums([0.0] * N)
    for phi in (phi1, phi2):
        if phi.n_max < N:
            raise ValueError(f"lambda data only up to n = {phi.n_max}, need {N}")

    def term(m, n):
        if regime.regime == "high":
            return 0.0
        c = kernels.tau1(math.gcd(m, n)) * phi1.lam[m] * phi2.lam[n] / math.sqrt(m * n)
        return 4 * math.pi * c * i_theta(m, n, phi1.t, phi2.t, regime).real

    return PartialSums(_square_partial_sums(N, term))


def corollary_weighted(phi: MaassFormData, w: TestWeight, N: int) -> PartialSums:
    """Partial sums of sum tau_1((m,n)) lambda(m) lambda(n) (mn)^-1/2
    int |K_{it}(2 pi y)|^2 w(y/m) w(y/n) dy / y.

    A plateau weight equal to 1 on [1, T] reproduces b_theta_maass / (4 pi)
    in the low regime as T grows.
    """
    if w.a < 1.0:
        raise ValueError("the weight must be supported in [1, inf)")
    if N < 1:
        raise ValueError("N must be >= 1")
    if phi.n_max < N:
        raise ValueError(f"lambda data only up to n = {phi.n_max}, need {N}")
    kt = _ktable(phi.t)
    spec = QuadratureSpec(abs_tol=1e-300, rel_tol=1e-12)

    def term(m, n):
        lo = max(m, n) * w.a
        hi = min(m, n) * w.A
        hi = min(hi, lo + 60.0 / (4 * math.pi))
        if hi <= lo:
            return 0.0

        def g(y):
            y = np.atleast_1d(y)
            return kt(y) ** 2 * w(y / m) * w(y / n) / y

        pts = [float(j) for j in range(math.floor(lo) + 1, math.ceil(hi))]
        pts += [p for p in (m * (w.a + w.ramp), m * (w.A - w.ramp), n * (w.a + w.ramp),
                            n * (w.A - w.ramp)) if lo < p < hi] if w.family == "plateau" else []
        val, _ = integrate(g, (lo, hi), spec, points=sorted(pts))
        return kernels.tau1(math.gcd(m, n)) * phi.lam[m] * phi.lam[n] / math.sqrt(m * n) * val

    return PartialSums(_square_partial_sums(N, term))
