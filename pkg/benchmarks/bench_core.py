#!/usr/bin/env python3
"""Compare the compiled and pure-Python kernel backends.

Each kernel is timed on both backends with identical inputs; the
outputs are compared so a speedup never hides a wrong answer.

    python3 benchmarks/bench_core.py [--repeat 3]
"""
from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from cuspvariance import _pykernels

try:
    from cuspvariance import _ckernels
except ImportError:
    _ckernels = None


def _cases():
    rng = np.random.default_rng(0)
    lam = np.concatenate([[0.0], rng.uniform(-2, 2, 400)])
    xs = np.arange(128) / 128
    ys = np.linspace(0.3, 3.0, 32)
    return {
        "kloosterman_many(1, 3, 400)": lambda m: m.kloosterman_many(1, 3, 400),
        "bessel_j_many(23, 200 pts)": lambda m: m.bessel_j_many(23, np.linspace(0.5, 60.0, 200)),
        "k_imag_double x20": lambda m: [m.k_imag_double(13.78, x, 0.5) for x in np.linspace(6.0, 40.0, 20)],
        "form_grid(k=40, 128x32, 300 terms)": lambda m: m.form_grid(lam, 40, xs, ys, 300),
    }


def _flat(v):
    if isinstance(v, tuple):
        return np.concatenate([np.ravel(np.asarray(p, dtype=float)) for p in v])
    if isinstance(v, list):
        return np.concatenate([_flat(p) for p in v])
    return np.ravel(np.asarray(v, dtype=float))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="kernel backend benchmark")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled backend not built; only the pure-Python timings are shown")
    print(f"{'kernel':40s} {'python [ms]':>12s} {'compiled [ms]':>14s} {'speedup':>8s} {'max rel diff':>13s}")
    for name, fn in _cases().items():
        tp = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:40s} {tp:12.2f}")
            continue
        tc = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        a, b = _flat(fn(_pykernels)), _flat(fn(_ckernels))
        diff = float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300))) if a.size else 0.0
        print(f"{name:40s} {tp:12.2f} {tc:14.2f} {tp / tc:8.1f} {diff:13.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
