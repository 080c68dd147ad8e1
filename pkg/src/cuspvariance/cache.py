"""Plain-text persistence of Hecke eigenvalues.

File layout::

    cuspvariance-eigencache v1
    k,form_index,n,lambda[,p/q]

``lambda`` carries 30 significant digits; the optional last column is the
exact Fourier coefficient a_f(n) = lambda_f(n) n^((k-1)/2) as ``p/q`` for
rational forms. Rows are sorted by (k, form_index, n).
"""
from __future__ import annotations

import os
from collections import defaultdict
from fractions import Fraction
from pathlib import Path

import mpmath

from .qforms import STORE_DPS, FormStore, HeckeBasis, HeckeEigenform

HEADER = "cuspvariance-eigencache v1"
DIGITS = 30

__all__ = ["HEADER", "CacheFormatError", "default_path", "format_lambda", "write_cache",
           "read_cache", "load_into", "save_store"]


class CacheFormatError(ValueError):
    """Malformed eigenvalue cache file."""


def default_path() -> Path:
    """``$CUSPVARIANCE_CACHE`` if set, else ``~/.cache/cuspvariance/eigencache.txt``."""
    env = os.environ.get("CUSPVARIANCE_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "cuspvariance" / "eigencache.txt"


def format_lambda(v) -> str:
    with mpmath.workdps(STORE_DPS):
        return mpmath.nstr(mpmath.mpf(v), DIGITS, strip_zeros=False, min_fixed=-4, max_fixed=6)


def _rows(basis: HeckeBasis):
    k = basis.weight
    for f in basis:
        for n in range(1, f.n_max + 1):
            row = [str(k), str(f.index), str(n), format_lambda(f.lam_mp[n])]
            if f.exact_coeffs is not None:
                row.append(f"{Fraction(f.exact_coeffs[n]).numerator}/{Fraction(f.exact_coeffs[n]).denominator}")
            yield row


def write_cache(bases, path) -> None:
    """Write ``bases`` (iterable of HeckeBasis) atomically to ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="\n") as fh:
        fh.write(HEADER + "\n")
        for basis in sorted(bases, key=lambda b: b.weight):
            for row in _rows(basis):
                fh.write(",".join(row) + "\n")
    os.replace(tmp, path)


def read_cache(path) -> dict[int, HeckeBasis]:
    """Parse a cache file into bases keyed by weight."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise CacheFormatError(f"missing '{HEADER}' header")
    lam: dict = defaultdict(lambda: defaultdict(dict))
    exact: dict = defaultdict(lambda: defaultdict(dict))
    with mpmath.workdps(STORE_DPS):
        for ln in lines[1:]:
            if not ln.strip():
                continue
            parts = ln.strip().split(",")
            if len(parts) not in (4, 5):
                raise CacheFormatError(f"bad row {ln!r}")
            try:
                k, idx, n = int(parts[0]), int(parts[1]), int(parts[2])
                lam[k][idx][n] = mpmath.mpf(parts[3])
                if len(parts) == 5:
                    exact[k][idx][n] = Fraction(parts[4])
            except ValueError as exc:
                raise CacheFormatError(f"bad row {ln!r}") from exc
    out = {}
    for k in sorted(lam):
        forms = []
        for idx in sorted(lam[k]):
            col = lam[k][idx]
            nmax = max(col)
            if sorted(col) != list(range(1, nmax + 1)):
                raise CacheFormatError(f"k={k} form {idx}: n must run over 1..{nmax}")
            ex = exact[k].get(idx)
            coeffs = None
            if ex:
                if sorted(ex) != list(range(1, nmax + 1)):
                    raise CacheFormatError(f"k={k} form {idx}: partial exact column")
                coeffs = (0,) + tuple(int(ex[n]) if ex[n].denominator == 1 else ex[n]
                                      for n in range(1, nmax + 1))
            forms.append(HeckeEigenform(k, idx, (mpmath.mpf(0),) + tuple(col[n] for n in range(1, nmax + 1)),
                                        coeffs))
        if [f.index for f in forms] != list(range(len(forms))):
            raise CacheFormatError(f"k={k}: form indices must be 0..d-1")
        out[k] = HeckeBasis(k, tuple(forms))
    return out


def load_into(store: FormStore, path) -> int:
    """Seed ``store`` from ``path`` if it exists; returns the number of weights loaded."""
    path = Path(path)
    if not path.exists():
        return 0
    bases = read_cache(path)
    for b in bases.values():
        store.put(b)
    return len(bases)


def save_store(store: FormStore, path) -> None:
    """Merge the bases held by ``store`` into the cache file at ``path``."""
    path = Path(path)
    merged = read_cache(path) if path.exists() else {}
    for k in store.weights():
        b = store.get(k, 2)
        old = merged.get(k)
        if old is None or b.n_max > old.n_max:
            merged[k] = b
    write_cache(merged.values(), path)
