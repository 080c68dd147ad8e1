"""Exact q-expansions and Hecke eigenforms for the full modular group.

Everything up to the characteristic polynomial of T_2 is exact integer
arithmetic.  Polynomial products use Kronecker substitution on top of
``gmpy2`` so that Miller bases at weight ~250 with a few hundred
coefficients build in well under a second.

The eigenforms themselves are algebraic, so their coefficients are carried
as multiprecision reals (``mpmath``) with at least 30 correct digits.
Spaces of dimension one keep their exact integer coefficients as well.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import gmpy2
import mpmath
import numpy as np
from gmpy2 import mpz

__all__ = [
    "QSeries",
    "HeckeEigenform",
    "HeckeBasis",
    "cusp_dim",
    "eisenstein_q",
    "delta_q",
    "miller_basis",
    "hecke_matrix",
    "charpoly",
    "hecke_eigenforms",
    "lambda_extend",
    "lambda_table",
    "hecke_residual",
    "divisor_sigma_table",
]

#: digits kept for stored eigenvalues (at least 30 are needed downstream)
STORE_DPS = 40


# ---------------------------------------------------------------------------
# integer polynomial arithmetic
# ---------------------------------------------------------------------------

def _pack(coeffs: Sequence[int], nbytes: int) -> mpz:
    """Evaluate sum c_i 2^(8*nbytes*i) with signed c_i."""
    zero = bytes(nbytes)
    pos = []
    neg = []
    any_neg = False
    for c in coeffs:
        c = int(c)
        if c > 0:
            pos.append(c.to_bytes(nbytes, "little"))
            neg.append(zero)
        elif c < 0:
            pos.append(zero)
            neg.append((-c).to_bytes(nbytes, "little"))
            any_neg = True
        else:
            pos.append(zero)
            neg.append(zero)
    x = mpz.from_bytes(b"".join(pos), "little")
    if any_neg:
        x -= mpz.from_bytes(b"".join(neg), "little")
    return x


def _unpack(x: mpz, nbytes: int, n: int) -> list[int]:
    """Inverse of ``_pack`` for the lowest ``n`` signed digits."""
    bits = 8 * nbytes
    x = gmpy2.f_mod_2exp(x, bits * n)
    buf = int(x).to_bytes(nbytes * n, "little")
    half = 1 << (bits - 1)
    full = 1 << bits
    out = []
    carry = 0
    for i in range(n):
        v = int.from_bytes(buf[i * nbytes:(i + 1) * nbytes], "little") + carry
        if v >= half:
            v -= full
            carry = 1
        else:
            carry = 0
        out.append(v)
    return out


def poly_mul(a: Sequence[int], b: Sequence[int], n: int) -> list[int]:
    """Product of two integer series truncated to ``n`` coefficients."""
    a = a[:n]
    b = b[:n]
    if not a or not b:
        return [0] * n
    ma = max(abs(int(v)) for v in a)
    mb = max(abs(int(v)) for v in b)
    if ma == 0 or mb == 0:
        return [0] * n
    bits = ma.bit_length() + mb.bit_length() + min(len(a), len(b)).bit_length() + 2
    nbytes = (bits + 7) // 8
    prod = _pack(a, nbytes) * _pack(b, nbytes)
    return _unpack(prod, nbytes, n)


def divisor_sigma_table(n_max: int, r: int) -> list[int]:
    """sigma_r(n) for 0 <= n <= n_max (entry 0 is 0)."""
    s = [0] * (n_max + 1)
    for d in range(1, n_max + 1):
        dr = d ** r
        for m in range(d, n_max + 1, d):
            s[m] += dr
    return s


# ---------------------------------------------------------------------------
# QSeries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QSeries:
    """Truncated q-expansion with exact rational coefficients.

    Coefficients are stored as integer numerators over one shared positive
    denominator, which keeps products on the fast integer path.

    Parameters
    ----------
    num : tuple of int
        Numerators of the coefficients of q^0 .. q^N.
    den : int
        Common denominator, default 1.
    """

    num: tuple
    den: int = 1

    def __post_init__(self):
        if self.den <= 0:
            raise ValueError("denominator must be positive")
        if len(self.num) == 0:
            raise ValueError("a QSeries needs at least the q^0 coefficient")
        g = self.den
        if g != 1:
            for c in self.num:
                g = math.gcd(g, int(c))
                if g == 1:
                    break
            if g != 1:
                object.__setattr__(self, "num", tuple(int(c) // g for c in self.num))
                object.__setattr__(self, "den", self.den // g)

    @classmethod
    def from_coeffs(cls, coeffs) -> "QSeries":
        fr = [Fraction(c) for c in coeffs]
        den = 1
        for c in fr:
            den = den * c.denominator // math.gcd(den, c.denominator)
        return cls(tuple(int(c * den) for c in fr), den)

    @property
    def precision(self) -> int:
        return len(self.num) - 1

    @property
    def coeffs(self) -> tuple:
        return tuple(Fraction(int(c), self.den) for c in self.num)

    def __len__(self):
        return len(self.num)

    def __getitem__(self, n: int) -> Fraction:
        return Fraction(int(self.num[n]), self.den)

    def truncate(self, N: int) -> "QSeries":
        if N > self.precision:
            raise ValueError("cannot raise precision by truncation")
        return QSeries(self.num[:N + 1], self.den)

    def __add__(self, other: "QSeries") -> "QSeries":
        n = min(len(self), len(other))
        d = self.den * other.den // math.gcd(self.den, other.den)
        fa, fb = d // self.den, d // other.den
        return QSeries(tuple(int(self.num[i]) * fa + int(other.num[i]) * fb for i in range(n)), d)

    def __neg__(self) -> "QSeries":
        return QSeries(tuple(-int(c) for c in self.num), self.den)

    def __sub__(self, other: "QSeries") -> "QSeries":
        return self + (-other)

    def scale(self, c) -> "QSeries":
        c = Fraction(c)
        return QSeries(tuple(int(v) * c.numerator for v in self.num), self.den * c.denominator)

    def __mul__(self, other):
        if not isinstance(other, QSeries):
            return self.scale(other)
        n = min(len(self), len(other))
        return QSeries(tuple(poly_mul(self.num, other.num, n)), self.den * other.den)

    __rmul__ = __mul__

    def __pow__(self, e: int) -> "QSeries":
        if e < 0:
            raise ValueError("negative powers are not supported")
        result = QSeries((1,) + (0,) * self.precision)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def shift(self, j: int) -> "QSeries":
        """Multiply by q^j keeping the precision."""
        return QSeries((0,) * j + tuple(self.num[:len(self.num) - j]), self.den)

    def __eq__(self, other):
        if not isinstance(other, QSeries):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.num, self.den))


def eisenstein_q(weight: int, precision: int) -> QSeries:
    """E_4 or E_6 normalized with constant term 1."""
    if weight not in (4, 6):
        raise ValueError("only weights 4 and 6 are provided")
    if precision < 0:
        raise ValueError("precision must be >= 0")
    r, c = (3, 240) if weight == 4 else (5, -504)
    sig = divisor_sigma_table(precision, r)
    return QSeries((1,) + tuple(c * s for s in sig[1:]))


def delta_q(precision: int) -> QSeries:
    """Delta = q prod (1 - q^n)^24 via Jacobi's series for eta^3."""
    n = precision + 1
    e3 = [0] * n
    m = 0
    while m * (m + 1) // 2 < n:
        e3[m * (m + 1) // 2] = (-1) ** m * (2 * m + 1)
        m += 1
    e6 = poly_mul(e3, e3, n)
    e12 = poly_mul(e6, e6, n)
    e24 = poly_mul(e12, e12, n)
    return QSeries((0,) + tuple(e24[:precision]))


def cusp_dim(k: int) -> int:
    """Dimension of S_k for the full modular group."""
    if k < 0 or k % 2:
        return 0
    d = k // 12
    if k % 12 == 2:
        d -= 1
    return max(d, 0)


def miller_basis(k: int, precision: int) -> list[QSeries]:
    """Integral echelon basis g_i = q^i + O(q^(d+1)) of S_k.

    Parameters
    ----------
    k : int
        Even weight >= 12.
    precision : int
        Highest q-exponent kept.

    Returns
    -------
    list of QSeries
        Empty when S_k = 0 (k = 14).
    """
    if k < 12 or k % 2:
        raise ValueError("weight must be even and >= 12")
    d = cusp_dim(k)
    if d == 0:
        return []
    if precision < d:
        raise ValueError(f"precision {precision} too small to echelonize dim {d}")
    N = precision
    n = N + 1
    e4 = list(eisenstein_q(4, N).num)
    e6 = list(eisenstein_q(6, N).num)
    dl = list(delta_q(N).num)
    e4cube = poly_mul(poly_mul(e4, e4, n), e4, n)
    # E-part for j = d, then multiply by E4^3 while stepping j down
    r = k - 12 * d
    b = 0 if r % 4 == 0 else 1
    a = (r - 6 * b) // 4
    epart = [1] + [0] * N
    base = e4
    ea = a
    while ea:
        if ea & 1:
            epart = poly_mul(epart, base, n)
        ea >>= 1
        if ea:
            base = poly_mul(base, base, n)
    if b:
        epart = poly_mul(epart, e6, n)
    eparts = {d: epart}
    for j in range(d - 1, 0, -1):
        eparts[j] = poly_mul(eparts[j + 1], e4cube, n)
    gens = []
    dpow = [1] + [0] * N
    for j in range(1, d + 1):
        dpow = poly_mul(dpow, dl, n)
        gens.append(poly_mul(dpow, eparts[j], n))
    # back-substitution; leading coefficients are 1 so everything stays integral
    for i in range(d - 1, -1, -1):
        gi = gens[i]
        for j in range(i + 1, d):
            c = gi[j + 1]
            if c:
                gj = gens[j]
                gi = [x - c * y for x, y in zip(gi, gj)]
        gens[i] = gi
    for i, g in enumerate(gens):
        if g[i + 1] != 1 or any(g[j + 1] for j in range(d) if j != i):
            raise ArithmeticError("echelonization failed")
    return [QSeries(tuple(g)) for g in gens]


def hecke_matrix(basis: Sequence[QSeries], n: int, k: int) -> list[list[int]]:
    """Matrix of T_n on an echelon basis (column j is T_n g_j).

    Needs coefficients up to ``n * d``.
    """
    d = len(basis)
    if d and basis[0].precision < n * d:
        raise ValueError(f"need precision >= {n * d} for T_{n}")
    if any(g.den != 1 for g in basis):
        raise ValueError("expected an integral basis")
    km1 = k - 1
    M = [[0] * d for _ in range(d)]
    for j, g in enumerate(basis):
        c = g.num
        for i in range(1, d + 1):
            s = 0
            for e in range(1, math.gcd(i, n) + 1):
                if i % e == 0 and n % e == 0:
                    s += e ** km1 * int(c[i * n // (e * e)])
            M[i - 1][j] = s
    return M


def matmul_exact(A, B):
    n, m, p = len(A), len(B), len(B[0]) if B else 0
    return [[sum(A[i][t] * B[t][j] for t in range(m)) for j in range(p)] for i in range(n)]


def charpoly(M: Sequence[Sequence[int]]) -> list[int]:
    """Characteristic polynomial det(xI - M), coefficients low to high.

    Faddeev-LeVerrier over the integers; every division is exact.
    """
    d = len(M)
    A = [[mpz(v) for v in row] for row in M]
    coeffs = [mpz(0)] * (d + 1)
    coeffs[d] = mpz(1)
    Mk = [[mpz(0)] * d for _ in range(d)]
    for k in range(1, d + 1):
        # M_k = A M_{k-1} + c_{d-k+1} I
        prod = matmul_exact(A, Mk) if k > 1 else [[mpz(0)] * d for _ in range(d)]
        cprev = coeffs[d - k + 1]
        for i in range(d):
            prod[i][i] += cprev
        Mk = prod
        tr = sum(sum(A[i][t] * Mk[t][i] for t in range(d)) for i in range(d))
        if tr % k:
            raise ArithmeticError("non-integral trace step in charpoly")
        coeffs[d - k] = -tr // k
    return [int(c) for c in coeffs]


# ---------------------------------------------------------------------------
# real root isolation
# ---------------------------------------------------------------------------

def _eval_dyadic_sign(p: Sequence[int], man: int, exp: int) -> int:
    """Sign of p(man * 2^exp) computed exactly."""
    d = len(p) - 1
    if exp >= 0:
        x = mpz(man) << exp
        acc = mpz(0)
        for c in reversed(p):
            acc = acc * x + c
        return (acc > 0) - (acc < 0)
    e = -exp
    acc = mpz(0)
    # p(m/2^e) * 2^(e d) = sum c_i m^i 2^(e(d-i))
    x = mpz(man)
    for i, c in enumerate(reversed(p)):
        acc = acc * x + (mpz(c) << (e * i))
    return (acc > 0) - (acc < 0)


def _mpf_dyadic(ctx, x):
    sign, man, exp, _bc = ctx.mpf(x)._mpf_
    return (-int(man) if sign else int(man)), int(exp)


def _isolate_roots(p: list[int], scale: int, ctx, dps: int) -> list:
    """All real roots of a squarefree integer polynomial with simple real roots.

    Roots are returned as ``ctx.mpf`` values accurate to ~``dps`` digits,
    each certified by an exact sign change on a disjoint bracket.
    """
    d = len(p) - 1
    if d == 0:
        return []
    if d == 1:
        return [ctx.mpf(-p[0]) / p[1]]
    # float approximations in scaled variable x = scale * y
    sc = [float(Fraction(int(c), int(scale) ** (d - i))) for i, c in enumerate(p)]
    approx = np.roots(sc[::-1])
    approx = np.sort(approx.real)
    with ctx.workdps(dps + 20):
        P = [ctx.mpf(int(c)) for c in p]

        def newton(x):
            for _ in range(200):
                v = ctx.polyval(P[::-1], x, derivative=True)
                f, df = v
                step = f / df
                x = x - step
                if abs(step) <= abs(x) * ctx.mpf(10) ** (-(dps + 15)):
                    break
            return x

        roots = [newton(ctx.mpf(float(y)) * scale) for y in approx]
        roots.sort()
        ok = all(roots[i + 1] - roots[i] > abs(roots[i + 1]) * ctx.mpf(10) ** (-dps)
                 for i in range(d - 1))
        if not ok:
            rts = ctx.polyroots(P[::-1], maxsteps=500, extraprec=4 * dps)
            roots = sorted(ctx.re(r) for r in rts)
            roots = [newton(r) for r in roots]
        # certify with disjoint exact brackets
        eps = ctx.mpf(10) ** (-(dps + 5))
        brackets = []
        for r in roots:
            w = max(abs(r), 1) * eps
            lo, hi = r - w, r + w
            slo = _eval_dyadic_sign(p, *_mpf_dyadic(ctx, lo))
            shi = _eval_dyadic_sign(p, *_mpf_dyadic(ctx, hi))
            if slo * shi >= 0:
                raise ArithmeticError("could not certify an isolated root; "
                                      "T_2 may have a repeated eigenvalue")
            brackets.append((lo, hi))
        for i in range(d - 1):
            if brackets[i][1] >= brackets[i + 1][0]:
                raise ArithmeticError("T_2 has a repeated eigenvalue at working precision")
    return roots


# ---------------------------------------------------------------------------
# eigenforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HeckeEigenform:
    """Normalized Hecke eigenform of level 1.

    Attributes
    ----------
    weight : int
    index : int
        Position in the basis (sorted by lambda(2) ascending).
    lam_mp : tuple
        lambda_f(n) as ``mpmath.mpf`` for 0 <= n <= n_max (entry 0 unused).
    exact_coeffs : tuple of int or None
        a_f(n) = lambda_f(n) n^((k-1)/2) exactly, only for rational forms.
    """

    weight: int
    index: int
    lam_mp: tuple
    exact_coeffs: tuple | None = None
    lam: np.ndarray = field(init=False, repr=False)
    memo: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        arr = np.array([float(v) for v in self.lam_mp], dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "lam", arr)

    @property
    def n_max(self) -> int:
        return len(self.lam_mp) - 1

    def __call__(self, n: int):
        return lambda_extend(self, n)

    def __repr__(self):
        return (f"HeckeEigenform(k={self.weight}, index={self.index}, "
                f"n_max={self.n_max}, lambda2={float(self.lam_mp[2]) if self.n_max >= 2 else None})")


@dataclass(frozen=True)
class HeckeBasis:
    """Hecke eigenbasis of S_k sorted by lambda(2)."""

    weight: int
    forms: tuple

    @property
    def dim(self) -> int:
        return len(self.forms)

    def __iter__(self):
        return iter(self.forms)

    def __len__(self):
        return len(self.forms)

    def __getitem__(self, i):
        return self.forms[i]

    @property
    def n_max(self) -> int:
        return min((f.n_max for f in self.forms), default=0)


def _needed_dps(basis: Sequence[QSeries], k: int, d: int) -> int:
    top = max(abs(int(c)) for g in basis for c in g.num)
    digits_g = top.bit_length() * math.log10(2)
    # |a_f(i)| <= d(i) i^((k-1)/2) for i <= d
    digits_c = (k - 1) / 2 * math.log10(max(d, 2)) + math.log10(max(d, 2)) + 1
    return int(40 + digits_g + digits_c + math.log10(d + 1))


def hecke_eigenforms(k: int, n_max: int) -> HeckeBasis:
    """Hecke eigenbasis of S_k with lambda_f(n) for n <= n_max.

    Raises
    ------
    ArithmeticError
        If T_2 has a repeated eigenvalue at working precision.
    """
    if k < 12 or k % 2:
        raise ValueError("weight must be even and >= 12")
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    d = cusp_dim(k)
    if d == 0:
        return HeckeBasis(k, ())
    N = max(n_max, 2 * d)
    basis = miller_basis(k, N)
    half = Fraction(k - 1, 2)
    if d == 1:
        a = [0] + [int(c) for c in basis[0].num[1:n_max + 1]]
        ctx = mpmath.MPContext()
        ctx.dps = STORE_DPS + 10
        lam = [ctx.mpf(0)] + [ctx.mpf(a[n]) / ctx.power(n, ctx.mpf(half.numerator) / half.denominator)
                              for n in range(1, n_max + 1)]
        with ctx.workdps(STORE_DPS):
            lam = tuple(+v for v in lam)
        f = HeckeEigenform(k, 0, lam, tuple(a))
        _sanity(f)
        return HeckeBasis(k, (f,))
    T2 = hecke_matrix(basis, 2, k)
    p = charpoly(T2)
    ctx = mpmath.MPContext()
    dps = _needed_dps(basis, k, d)
    ctx.dps = dps
    roots = _isolate_roots(p, 1 << (k // 2), ctx, dps)
    forms = []
    G = [[ctx.mpf(int(c)) for c in g.num[:n_max + 1]] for g in basis]
    T = ctx.matrix([[ctx.mpf(v) for v in row] for row in T2])
    expo = ctx.mpf(k - 1) / 2
    for lam2 in roots:
        A = T - lam2 * ctx.eye(d)
        # unknowns c_2..c_d with c_1 = 1
        Asub = ctx.matrix(d, d - 1)
        rhs = ctx.matrix(d, 1)
        for i in range(d):
            rhs[i] = -A[i, 0]
            for j in range(1, d):
                Asub[i, j - 1] = A[i, j]
        sol, _res = ctx.qr_solve(Asub, rhs)
        c = [ctx.mpf(1)] + [sol[j] for j in range(d - 1)]
        lam = [ctx.mpf(0)]
        for n in range(1, n_max + 1):
            an = ctx.fsum(c[i] * G[i][n] for i in range(d))
            lam.append(an / ctx.power(n, expo))
        with ctx.workdps(STORE_DPS):
            lam = tuple(+v for v in lam)
        forms.append(lam)
    forms.sort(key=lambda lam: lam[2])
    out = tuple(HeckeEigenform(k, i, lam) for i, lam in enumerate(forms))
    for f in out:
        _sanity(f)
    return HeckeBasis(k, out)


def _sanity(f: HeckeEigenform) -> None:
    if f.lam_mp[1] != 1 and abs(f.lam_mp[1] - 1) > mpmath.mpf(10) ** -30:
        raise ArithmeticError("lambda(1) != 1")
    for p in _primes_upto(min(f.n_max, 100)):
        if abs(float(f.lam_mp[p])) > 2 + 1e-9:
            raise ArithmeticError(f"Deligne bound violated at p={p} for k={f.weight}")


# ---------------------------------------------------------------------------
# multiplicativity
# ---------------------------------------------------------------------------

def _primes_upto(n: int) -> list[int]:
    if n < 2:
        return []
    sieve = bytearray([1]) * (n + 1)
    sieve[0] = sieve[1] = 0
    for i in range(2, int(n ** 0.5) + 1):
        if sieve[i]:
            sieve[i * i::i] = bytearray(len(sieve[i * i::i]))
    return [i for i in range(n + 1) if sieve[i]]


def _factor(n: int) -> list[tuple[int, int]]:
    out = []
    m = n
    for p in (2, 3):
        if m % p == 0:
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            out.append((p, e))
    p = 5
    step = 2
    while p * p <= m:
        if m % p == 0:
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            out.append((p, e))
        p += step
        step = 6 - step
    if m > 1:
        out.append((m, 1))
    return out


def _prime_power(lp, e):
    a, b = 1, lp
    if e == 0:
        return 1
    for _ in range(e - 1):
        a, b = b, lp * b - a
    return b


def lambda_extend(f: HeckeEigenform, n: int):
    """lambda_f(n) from lambda_f(p) via multiplicativity and the p-recursion.

    Returns an ``mpmath.mpf``.

    Raises
    ------
    ValueError
        If a prime divisor of n exceeds the stored range.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    ctx = mpmath.mp
    with ctx.workdps(STORE_DPS):
        res = ctx.mpf(1)
        for p, e in _factor(n):
            if p > f.n_max:
                raise ValueError(f"lambda({p}) not available (n_max={f.n_max})")
            res *= _prime_power(f.lam_mp[p], e)
        return +res


def lambda_table(f: HeckeEigenform, N: int) -> np.ndarray:
    """Float array of lambda_f(n), 0 <= n <= N, extended multiplicatively."""
    if N <= f.n_max:
        return np.array(f.lam[:N + 1])
    spf = np.zeros(N + 1, dtype=np.int64)
    for p in _primes_upto(int(math.isqrt(N))):
        idx = np.arange(p * p, N + 1, p)
        sel = spf[idx] == 0
        spf[idx[sel]] = p
    out = np.zeros(N + 1)
    out[1] = 1.0
    lam = f.lam
    nm = f.n_max
    for n in range(2, N + 1):
        p = int(spf[n])
        if p == 0:
            if n > nm:
                raise ValueError(f"lambda({n}) not available (n_max={nm})")
            out[n] = lam[n]
            continue
        m = n // p
        e = 1
        while m % p == 0:
            m //= p
            e += 1
        if m == 1:
            # prime power p^e
            out[n] = lam[p] * out[n // p] - out[n // (p * p)]
        else:
            pe = n // m
            out[n] = out[pe] * out[m]
    return out


def hecke_residual(f: HeckeEigenform, m: int, n: int):
    """lambda(m)lambda(n) - sum_{d|(m,n)} lambda(mn/d^2).

    With exact data the residual is returned as an exact integer after
    scaling by (mn)^((k-1)/2); otherwise as an ``mpmath.mpf``.
    """
    g = math.gcd(m, n)
    if f.exact_coeffs is not None and m * n <= f.n_max:
        a = f.exact_coeffs
        km1 = f.weight - 1
        rhs = sum(d ** km1 * a[m * n // (d * d)] for d in range(1, g + 1) if g % d == 0)
        return a[m] * a[n] - rhs
    with mpmath.mp.workdps(STORE_DPS):
        rhs = mpmath.fsum(lambda_extend(f, m * n // (d * d)) for d in range(1, g + 1) if g % d == 0)
        return lambda_extend(f, m) * lambda_extend(f, n) - rhs


# ---------------------------------------------------------------------------
# shared per-weight store
# ---------------------------------------------------------------------------

class FormStore:
    """Thread-safe, build-once cache of Hecke bases keyed by weight."""

    def __init__(self):
        self._lock = threading.Lock()
        self._locks: dict[int, threading.Lock] = {}
        self._bases: dict[int, HeckeBasis] = {}

    def get(self, k: int, n_max: int) -> HeckeBasis:
        with self._lock:
            b = self._bases.get(k)
            if b is not None and (b.dim == 0 or b.n_max >= n_max):
                return b
            lock = self._locks.setdefault(k, threading.Lock())
        with lock:
            b = self._bases.get(k)
            if b is not None and (b.dim == 0 or b.n_max >= n_max):
                return b
            b = hecke_eigenforms(k, n_max)
            with self._lock:
                self._bases[k] = b
            return b

    def put(self, basis: HeckeBasis) -> None:
        with self._lock:
            old = self._bases.get(basis.weight)
            if old is None or old.n_max < basis.n_max:
                self._bases[basis.weight] = basis

    def weights(self) -> list[int]:
        with self._lock:
            return sorted(self._bases)

    def clear(self) -> None:
        with self._lock:
            self._bases.clear()


#: process-wide store used by the experiment layers
STORE = FormStore()
