"""L(1, sym^2 f) and a two-sided check of the Petersson formula.

Two evaluators for L(1, sym^2 f) are provided.

``afe`` (default)
    Approximate functional equation of the completed L-function
    Lambda(s) = gamma(s) L(s, sym^2 f) with
    gamma(s) = Gamma_R(s+1) Gamma_C(s+k-1), conductor 1 and root number +1.
    The cut-off integrals are computed by the trapezoid rule on a vertical
    line, which converges geometrically.  Only about k/2 Dirichlet
    coefficients are needed.
``smoothed``
    zeta(2) sum lambda(n^2) n^-1 e^{-n/T}, doubling T.  The error decays
    only like a small negative power of T, so this is mainly of
    diagnostic interest.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import loggamma

from . import kernels
from .qforms import STORE, FormStore, HeckeEigenform, _factor, _prime_power

__all__ = [
    "Sym2Value",
    "l_sym2_at_1",
    "sym2_nmax",
    "harmonic_weight",
    "petersson_lhs",
    "petersson_rhs",
    "rhs_truncation",
    "PeterssonReport",
    "petersson_check",
]

ZETA2 = math.pi ** 2 / 6.0
_MAX_DOUBLINGS = 12


@dataclass(frozen=True)
class Sym2Value:
    """L(1, sym^2 f) with its convergence record.

    ``T`` is the smoothing parameter (smoothed method) or the number of
    Dirichlet terms (afe method); ``gap`` is |value(T) - value(2T)|.
    """

    weight: int
    index: int
    value: float
    T: float
    gap: float
    method: str = "afe"


def sym2_nmax(k: int) -> int:
    """Eigenvalue range the afe evaluator needs at weight k (with one doubling)."""
    return 2 * _afe_start(k)


def _afe_start(k: int) -> int:
    # the cut-off weights fall below 1e-16 near n = k/2 + sqrt(k)
    return int(math.ceil(0.5 * k + 2.0 * math.sqrt(k))) + 8


def lambda_squares(f: HeckeEigenform, M: int) -> np.ndarray:
    """lambda_f(n^2) for 0 <= n <= M as floats (needs lambda_f(p), p <= M)."""
    if M > f.n_max:
        raise ValueError(f"need lambda(p) for p <= {M}, have n_max={f.n_max}")
    out = np.zeros(M + 1)
    lam = f.lam
    for n in range(1, M + 1):
        v = 1.0
        for p, e in _factor(n):
            v *= _prime_power(lam[p], 2 * e)
        out[n] = v
    return out


def _sym2_dirichlet(f: HeckeEigenform, M: int) -> np.ndarray:
    """Coefficients A(n), n <= M, of zeta(2s) sum lambda(n^2) n^-s."""
    l2 = lambda_squares(f, M)
    A = np.zeros(M + 1)
    m = 1
    while m * m <= M:
        for d in range(1, M // (m * m) + 1):
            A[m * m * d] += l2[d]
        m += 1
    return A


def _log_gamma_factor(s, k: int):
    return (-(s + 1) / 2 * math.log(math.pi) + loggamma((s + 1) / 2)
            + math.log(2.0) - (s + k - 1) * math.log(2 * math.pi) + loggamma(s + k - 1))


@lru_cache(maxsize=512)
def _afe_weights(k: int, M: int, c: float = 1.5, h: float = 0.05) -> np.ndarray:
    """Phi(n;1) + Phi(n;0) for n = 1..M, divided by gamma(1)."""
    lg1 = float(np.real(_log_gamma_factor(1.0 + 0j, k)))
    # truncate the line where |gamma(s + c + it)| / gamma(1) < e^-60 for s = 0 and 1
    tmax = 20.0
    while True:
        edge = max(float(np.real(_log_gamma_factor(s + c + 1j * tmax, k))) for s in (0.0, 1.0)) - lg1
        if edge < -60.0 or tmax > 1e4:
            break
        tmax *= 1.25
    t = np.arange(-tmax, tmax + 0.5 * h, h)
    w = c + 1j * t
    logn = np.log(np.arange(1, M + 1, dtype=float))
    out = np.zeros(M)
    for s in (1.0, 0.0):
        lg = _log_gamma_factor(s + w, k) - lg1
        expo = lg[None, :] - (s + w)[None, :] * logn[:, None]
        vals = np.exp(expo) / w[None, :]
        out += np.real(vals.sum(axis=1)) * h / (2 * math.pi)
    out.setflags(write=False)
    return out


def _afe_value(f: HeckeEigenform, M: int) -> float:
    A = _sym2_dirichlet(f, M)
    wts = _afe_weights(f.weight, M)
    return math.fsum(A[1:] * wts)


def _smoothed_value(f: HeckeEigenform, T: float, tol: float) -> float:
    cutoff = int(math.ceil(T * (math.log(1.0 / tol) + 5.0)))
    l2 = lambda_squares(f, cutoff)
    n = np.arange(1, cutoff + 1, dtype=float)
    return ZETA2 * math.fsum(l2[1:] / n * np.exp(-n / T))


def l_sym2_at_1(f: HeckeEigenform, tol: float = 1e-12, method: str = "afe",
                T0: float | None = None) -> Sym2Value:
    """L(1, sym^2 f), doubling the truncation until successive values agree.

    Parameters
    ----------
    f : HeckeEigenform
    tol : float
        Required |value(T) - value(2T)|.
    method : {"afe", "smoothed"}
    T0 : float, optional
        Starting truncation.

    Raises
    ------
    ArithmeticError
        If the value does not stabilize within 12 doublings, or is not
        positive.
    ValueError
        If f does not carry enough eigenvalues.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    key = ("sym2", method, tol, T0)
    hit = f.memo.get(key)
    if hit is not None:
        return hit
    if method == "afe":
        M = int(T0) if T0 else _afe_start(f.weight)
        prev = _afe_value(f, M)
        for _ in range(_MAX_DOUBLINGS):
            if 2 * M > f.n_max:
                raise ValueError(f"afe needs lambda(p) for p <= {2 * M}; n_max={f.n_max}")
            cur = _afe_value(f, 2 * M)
            gap = abs(cur - prev)
            M *= 2
            if gap < tol:
                res = Sym2Value(f.weight, f.index, cur, float(M), gap, method)
                break
            prev = cur
        else:
            raise ArithmeticError("L(1, sym^2 f) did not stabilize")
    elif method == "smoothed":
        T = float(T0) if T0 else 16.0
        prev = _smoothed_value(f, T, tol)
        for _ in range(_MAX_DOUBLINGS):
            cur = _smoothed_value(f, 2 * T, tol)
            gap = abs(cur - prev)
            T *= 2
            if gap < tol:
                res = Sym2Value(f.weight, f.index, cur, T, gap, method)
                break
            prev = cur
        else:
            raise ArithmeticError("smoothed L(1, sym^2 f) did not stabilize after 12 doublings")
    else:
        raise ValueError(f"unknown method {method!r}")
    if not res.value > 0:
        raise ArithmeticError(f"non-positive L(1, sym^2 f) = {res.value}")
    f.memo[key] = res
    return res


def harmonic_weight(f: HeckeEigenform, tol: float = 1e-12) -> float:
    """omega_f = 2 pi^2 / ((k-1) L(1, sym^2 f))."""
    return 2.0 * math.pi ** 2 / ((f.weight - 1) * l_sym2_at_1(f, tol).value)


# ---------------------------------------------------------------------------
# Petersson formula
# ---------------------------------------------------------------------------

def _lhs(k: int, n1: int, n2: int, store: FormStore, tol: float) -> tuple[float, float]:
    need = max(n1, n2, sym2_nmax(k))
    basis = store.get(k, need)
    terms = []
    slack = []
    pref = 2.0 * math.pi ** 2 / (k - 1)
    for f in basis:
        L = l_sym2_at_1(f, tol)
        ll = float(f.lam[n1]) * float(f.lam[n2])
        terms.append(ll / L.value)
        slack.append(abs(ll) * L.gap / L.value ** 2)
    return pref * math.fsum(terms), pref * math.fsum(slack)


def petersson_lhs(k: int, n1: int, n2: int, store: FormStore | None = None,
                  tol: float = 1e-12) -> float:
    """(2 pi^2 / (k-1)) sum_f lambda_f(n1) lambda_f(n2) / L(1, sym^2 f)."""
    return _lhs(k, n1, n2, store or STORE, tol)[0]


def rhs_truncation(k: int, n1: int, n2: int, tail_tol: float) -> tuple[int, float]:
    """Smallest C whose Kloosterman-Bessel tail is provably below ``tail_tol``.

    Uses |S(n1,n2;c)| <= c and |J_nu(x)| <= (x/2)^nu / nu!, so the tail
    beyond C is at most
    2 pi (2 pi sqrt(n1 n2))^nu / nu! * C^(1-nu) / (nu-1) with nu = k-1.
    """
    if tail_tol <= 0:
        raise ValueError("tail_tol must be positive")
    nu = k - 1
    if nu < 2:
        raise ValueError("weight too small")
    logA = (math.log(2 * math.pi) + nu * math.log(2 * math.pi * math.sqrt(n1 * n2))
            - math.lgamma(nu + 1) - math.log(nu - 1))

    def bound(C):
        return math.exp(logA + (1 - nu) * math.log(C))

    C = max(1, int(math.floor(math.exp((logA - math.log(tail_tol)) / (nu - 1)))))
    while bound(C) >= tail_tol:
        C += 1
    while C > 1 and bound(C - 1) < tail_tol:
        C -= 1
    if C > 1_000_000:
        raise ArithmeticError(f"no truncation C <= 10^6 certifies tail < {tail_tol}")
    return C, bound(C)


def petersson_rhs(k: int, n1: int, n2: int, tail_tol: float = 1e-13,
                  with_truncation: bool = False):
    """delta(n1,n2) + 2 pi i^-k sum_{c <= C} S(n1,n2;c)/c J_{k-1}(4 pi sqrt(n1 n2)/c).

    With ``with_truncation`` the pair (value, C) is returned.
    """
    C, _ = rhs_truncation(k, n1, n2, tail_tol)
    S = kernels._core.kloosterman_many(n1, n2, C)
    cs = np.arange(1, C + 1, dtype=float)
    J = kernels._core.bessel_j_many(k - 1, 4.0 * math.pi * math.sqrt(n1 * n2) / cs)
    sign = -1.0 if (k // 2) % 2 else 1.0
    tail = math.fsum(S[1:] / cs * J)
    val = (1.0 if n1 == n2 else 0.0) + 2.0 * math.pi * sign * tail
    return (val, C) if with_truncation else val


@dataclass
class PeterssonReport:
    """Rows ``(k, n1, n2, lhs, rhs, abs_diff, c_truncation)`` and the verdict."""

    tol: float
    rows: list = field(default_factory=list)
    slack: list = field(default_factory=list)

    @property
    def failures(self) -> list[tuple[int, int, int]]:
        return [(r[0], r[1], r[2]) for r, s in zip(self.rows, self.slack)
                if not r[5] <= self.tol + s]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def max_abs_diff(self) -> float:
        return max((r[5] for r in self.rows), default=0.0)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "n1", "n2", "lhs", "rhs", "abs_diff", "c_truncation"])
            for k, n1, n2, lhs, rhs, diff, C in self.rows:
                w.writerow([k, n1, n2, repr(lhs), repr(rhs), repr(diff), C])


def petersson_check(k_range, n_max: int, tol: float = 1e-6, tail_tol: float = 1e-13,
                    store: FormStore | None = None, threads: int = 1,
                    l_tol: float = 1e-12) -> PeterssonReport:
    """Compare both sides for every k in ``k_range`` and 1 <= n1 <= n2 <= n_max."""
    store = store or STORE
    ks = sorted(set(int(k) for k in k_range))
    for k in ks:
        if k < 12 or k % 2:
            raise ValueError("weights must be even and >= 12")
    cells = [(k, n1, n2) for k in ks for n1 in range(1, n_max + 1) for n2 in range(n1, n_max + 1)]

    def work(cell):
        k, n1, n2 = cell
        lhs, slack = _lhs(k, n1, n2, store, l_tol)
        rhs, C = petersson_rhs(k, n1, n2, tail_tol, with_truncation=True)
        return (k, n1, n2, lhs, rhs, abs(lhs - rhs), C), slack

    rep = PeterssonReport(tol)
    if threads > 1:
        # bases first, one weight per task
        with ThreadPoolExecutor(threads) as ex:
            list(ex.map(lambda k: store.get(k, max(n_max, sym2_nmax(k))), ks))
            results = list(ex.map(work, cells))
    else:
        results = [work(c) for c in cells]
    for row, slack in results:
        rep.rows.append(row)
        rep.slack.append(slack + 10.0 * tail_tol)
    return rep
