"""Evaluation of holomorphic eigenforms on the upper half-plane.

Includes y^k |f|^2 heat grids (PGM + CSV), a modular-invariance spot
check, and the line-localization residual at heights (k-1)/(4 pi l).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._core import form_grid
from .petersson import sym2_nmax
from .qforms import STORE, FormStore, HeckeEigenform, lambda_table
from .variance import _log_norm

Y_MIN = 0.05
TRUNC = 1e-20
_LOG_TRUNC = math.log(1.0 / TRUNC)

__all__ = ["Y_MIN", "needed_terms", "form_for", "FormValue", "evaluate_form", "evaluate_form_scaled",
           "mass_density", "invariance_check", "HeatGrid", "heatmap", "row_variation",
           "ghosh_sarnak_residual", "ghosh_sarnak_range"]


def _log_term(k: int, n, y: float):
    return 0.5 * (k - 1) * np.log(n) - 2 * math.pi * np.asarray(n, dtype=float) * y


def needed_terms(k: int, y: float, extra: int = 0) -> int:
    """Smallest N past the peak with n^((k-1)/2) e^(-2 pi n y) < 1e-20 * (max term) for n > N."""
    if y < Y_MIN:
        raise ValueError(f"y = {y} is below the supported minimum {Y_MIN}")
    peak = max(1.0, (k - 1) / (4 * math.pi * y))
    top = _log_term(k, max(1, math.floor(peak)), y)
    top = max(top, _log_term(k, math.floor(peak) + 1, y))
    n = int(math.floor(peak)) + 1
    step = max(1, int(peak) // 8)
    while _log_term(k, n, y) >= top - _LOG_TRUNC:
        n += step
    while n > 1 and _log_term(k, n - 1, y) < top - _LOG_TRUNC:
        n -= 1
    return n - 1 + extra


def _tail_bound(k: int, y: float, N: int) -> float:
    """Bound on sum_{n > N} |lambda(n)| n^((k-1)/2) e^(-2 pi n y) relative to the peak term.

    Uses |lambda(n)| <= d(n) <= 2 sqrt(n) and the geometric decay of
    n^(k/2) e^(-2 pi n y) once past its maximum.
    """
    n = N + 1
    r = (1.0 + 1.0 / n) ** (0.5 * k) * math.exp(-2 * math.pi * y)
    if r >= 1.0:
        return math.inf
    peak = max(1.0, (k - 1) / (4 * math.pi * y))
    top = max(_log_term(k, max(1, math.floor(peak)), y), _log_term(k, math.floor(peak) + 1, y))
    lead = math.log(2.0) + 0.5 * k * math.log(n) - 2 * math.pi * n * y
    return math.exp(lead - top) / (1.0 - r)


def form_for(k: int, index: int, y_min: float, store: FormStore | None = None) -> HeckeEigenform:
    """Eigenform f in H_k with enough eigenvalues for evaluation down to ``y_min``."""
    store = store or STORE
    basis = store.get(k, max(needed_terms(k, y_min, extra=20), sym2_nmax(k)))
    if not 0 <= index < basis.dim:
        raise ValueError(f"form index {index} out of range for dim S_{k} = {basis.dim}")
    return basis[index]


@dataclass(frozen=True)
class FormValue:
    """f(z) = exp(logscale) * scaled, with the certified relative tail bound."""

    scaled: complex
    logscale: float
    tail: float
    nterms: int

    @property
    def value(self) -> complex:
        if self.logscale > 709.0:
            raise OverflowError("f(z) exceeds double range; use the scaled form")
        return self.scaled * math.exp(self.logscale)


def evaluate_form_scaled(f: HeckeEigenform, z: complex, extra: int = 0) -> FormValue:
    """f(z) = sum lambda(n) n^((k-1)/2) e(nz), truncated at relative size 1e-20."""
    z = complex(z)
    x, y = z.real, z.imag
    k = f.weight
    N = needed_terms(k, y, extra)
    lam = lambda_table(f, N)
    re, im, scale = form_grid(lam, k, np.array([x - math.floor(x)]), np.array([y]), N)
    return FormValue(complex(re[0, 0], im[0, 0]), float(scale[0]), _tail_bound(k, y, N), N)


def evaluate_form(f: HeckeEigenform, z: complex) -> complex:
    """f(z) as a complex number (y >= 0.05)."""
    return evaluate_form_scaled(f, z).value


def mass_density(f: HeckeEigenform, z: complex) -> float:
    """y^k |f(z)|^2, evaluated in log space."""
    fv = evaluate_form_scaled(f, z)
    y = complex(z).imag
    a = abs(fv.scaled)
    if a == 0.0:
        return 0.0
    return math.exp(f.weight * math.log(y) + 2.0 * (fv.logscale + math.log(a)))


def invariance_check(f: HeckeEigenform, npoints: int = 10, seed: int = 0) -> float:
    """Max relative gap of y^k |f|^2 between z and -1/z over random points."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(npoints):
        z = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.6, 1.5))
        a = mass_density(f, z)
        b = mass_density(f, -1.0 / z)
        worst = max(worst, abs(a - b) / max(abs(a), abs(b)))
    return worst


def _scaled_grid(f: HeckeEigenform, xs, ys) -> tuple[np.ndarray, np.ndarray]:
    """|f|^2 up to a per-row factor: returns (sq, logfactor) with y^k|f|^2 = sq * exp(logfactor)."""
    k = f.weight
    N = needed_terms(k, float(np.min(ys)))
    lam = lambda_table(f, N)
    re, im, scale = form_grid(lam, k, np.asarray(xs) - np.floor(xs), np.asarray(ys), N)
    return re ** 2 + im ** 2, k * np.log(ys) + 2.0 * scale


def _grid_values(f: HeckeEigenform, xs, ys) -> np.ndarray:
    """y^k |f|^2 / ||f||^2 with the Petersson norm taken on the probability measure."""
    sq, logs = _scaled_grid(f, xs, ys)
    with np.errstate(divide="ignore", under="ignore"):
        return np.exp(np.log(sq) + logs[:, None] + _log_norm(f))


def row_variation(f: HeckeEigenform, y: float, nx: int = 256) -> float:
    """Relative variance var/mean^2 of y^k |f(x + iy)|^2 over a periodic x-grid."""
    xs = np.arange(nx) / nx - 0.5
    v = _scaled_grid(f, xs, np.array([float(y)]))[0][0]
    m = float(np.mean(v))
    return float(np.var(v)) / (m * m) if m > 0 else math.inf


@dataclass
class HeatGrid:
    """Values y_j^k |f(x_i + i y_j)|^2 / ||f||^2; rows are y (ascending), columns x.

    Dividing by the Petersson norm keeps the values in double range for
    large k; it rescales the whole grid by one constant.
    """

    k: int
    index: int
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    invariance_gap: float = field(default=math.nan)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["y", "x", "value"])
            for j, y in enumerate(self.ys):
                for i, x in enumerate(self.xs):
                    w.writerow([repr(float(y)), repr(float(x)), repr(float(self.values[j, i]))])

    def to_pgm(self, path) -> None:
        """ASCII PGM with log(1 + v/median) compression; top row is the largest y."""
        v = self.values
        med = float(np.median(v))
        c = np.log1p(v / med) if med > 0 else v.copy()
        top = float(c.max())
        pix = np.zeros_like(c, dtype=np.int64) if top <= 0 else np.rint(c / top * 65535).astype(np.int64)
        ny, nx = pix.shape
        with open(path, "w", newline="\n") as fh:
            fh.write(f"P2\n{nx} {ny}\n65535\n")
            for row in pix[::-1]:
                fh.write(" ".join(str(int(p)) for p in row) + "\n")


def heatmap(f: HeckeEigenform, y_min: float, y_max: float, nx: int, ny: int,
            out=None, seed: int = 0) -> HeatGrid:
    """Grid of y^k |f|^2 on [-1/2, 1/2] x [y_min, y_max].

    Both x endpoints are included, so the first and last columns coincide.
    When ``out`` is given, writes ``out.pgm`` and ``out.csv``.
    """
    if not (Y_MIN <= y_min < y_max):
        raise ValueError(f"need {Y_MIN} <= y_min < y_max")
    if nx < 2 or ny < 2:
        raise ValueError("nx, ny must be >= 2")
    xs = np.linspace(-0.5, 0.5, nx)
    ys = np.linspace(y_min, y_max, ny)
    vals = _grid_values(f, xs, ys)
    grid = HeatGrid(f.weight, f.index, xs, ys, vals, invariance_check(f, 10, seed))
    if out is not None:
        out = Path(out)
        grid.to_pgm(out.with_suffix(".pgm"))
        grid.to_csv(out.with_suffix(".csv"))
    return grid


def ghosh_sarnak_range(k: int) -> int:
    """Largest admissible l, floor(sqrt((k-1)/log(k-1)))."""
    return int(math.floor(math.sqrt((k - 1) / math.log(k - 1))))


def ghosh_sarnak_residual(f: HeckeEigenform, l: int, npoints: int = 256,
                          exponent: str = "half") -> float:
    """sup_x |N f(x + i y_l) - lambda(l) e(lx)| with y_l = (k-1)/(4 pi l).

    ``exponent="half"`` uses N = (e/l)^((k-1)/2), which makes the n = l term
    exactly lambda(l) e(lx) under the normalization of this package;
    ``exponent="full"`` uses the alternative N = (e/l)^(k-1).
    """
    k = f.weight
    if not 1 <= l <= ghosh_sarnak_range(k):
        raise ValueError(f"l must lie in [1, {ghosh_sarnak_range(k)}] for k = {k}")
    power = {"half": 0.5 * (k - 1), "full": float(k - 1)}.get(exponent)
    if power is None:
        raise ValueError("exponent must be 'half' or 'full'")
    y = (k - 1) / (4 * math.pi * l)
    xs = np.arange(npoints) / npoints
    N = needed_terms(k, y)
    lam = lambda_table(f, max(N, l))
    re, im, scale = form_grid(lam, k, xs, np.array([y]), N)
    logn = power * (1.0 - math.log(l)) + float(scale[0])
    target = lam[l] * np.exp(2j * math.pi * l * xs)
    if logn > 700.0:
        return math.inf
    val = math.exp(logn) * (re[0] + 1j * im[0])
    return float(np.max(np.abs(val - target)))
