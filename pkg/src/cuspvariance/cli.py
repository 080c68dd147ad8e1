"""Command-line front end.

Every subcommand accepts ``--config FILE`` (flat ``key = value`` lines,
``#`` comments); flags given on the command line win over the file.

Exit status: 0 when every internal check passes, 1 when a check fails
or a computation does not converge, 2 on a configuration or input
error. Errors are reported on stderr as one machine-readable line
``cuspvariance: error=<kind> message=<text>``.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import mpmath

from . import btheta, cache, petersson, qforms, render, variance
from .kernels import TestWeight

__all__ = ["ConfigError", "RunConfig", "parse_weight", "build_parser", "load_config", "run", "main"]


class ConfigError(ValueError):
    """Invalid command line or configuration file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# ---------------------------------------------------------------------------
# option tables
# ---------------------------------------------------------------------------

def _int_range(s: str) -> list[int]:
    """``12:40`` (even weights, inclusive), ``12,16,20`` or ``24``."""
    s = str(s).strip()
    if ":" in s:
        lo, _, hi = s.partition(":")
        lo, hi = int(lo), int(hi)
        return [k for k in range(lo, hi + 1) if k % 2 == 0]
    return [int(v) for v in s.split(",") if v.strip()]


def parse_weight(s: str) -> TestWeight:
    """Weight descriptor ``family:a:A[:extra]``.

    Families: ``bump:a:A``, ``mean_zero_bump:a:A``, ``plateau:a:A:ramp``,
    ``poly_bump:a:A:c0,c1,...``.
    """
    parts = str(s).strip().split(":")
    fam = parts[0]
    try:
        if fam in ("bump", "mean_zero_bump") and len(parts) == 3:
            return getattr(TestWeight, fam)(float(parts[1]), float(parts[2]))
        if fam == "plateau" and len(parts) == 4:
            return TestWeight.plateau(float(parts[1]), float(parts[2]), float(parts[3]))
        if fam == "poly_bump" and len(parts) == 4:
            return TestWeight.poly_bump(float(parts[1]), float(parts[2]),
                                        [float(c) for c in parts[3].split(",")])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad weight {s!r}: {exc}") from exc
    raise argparse.ArgumentTypeError(f"bad weight {s!r}")


def _weight_arg(s: str) -> TestWeight:
    return parse_weight(s)


_BUMP = "bump:1:2"

# subcommand -> [(flag, type, default, help)]
_OPTIONS = {
    "forms": [
        ("weight", int, None, "single weight k"),
        ("weights", _int_range, None, "weight range lo:hi or list"),
        ("nmax", int, 100, "eigenvalues lambda(n) for n <= nmax"),
    ],
    "petersson": [
        ("weights", _int_range, "12:40", "weight range lo:hi or list"),
        ("nmax", int, 5, "check 1 <= n1 <= n2 <= nmax"),
        ("tol", float, 1e-6, "tolerance on |LHS - RHS|"),
    ],
    "qvthm": [
        ("K", float, 64.0, "weight scale K"),
        ("theta", float, 0.3, "shrinking exponent"),
        ("u", _weight_arg, _BUMP, "weight profile in (k-1)/K"),
        ("W1", _weight_arg, _BUMP, "first convolution weight"),
        ("h1", int, 1, "first shift"),
        ("W2", _weight_arg, _BUMP, "second convolution weight"),
        ("h2", int, 1, "second shift"),
    ],
    "variance": [
        ("K", float, 64.0, "weight scale K"),
        ("theta", float, 0.3, "shrinking exponent"),
        ("u", _weight_arg, _BUMP, "weight profile in (k-1)/K"),
        ("V1", _weight_arg, _BUMP, "first observable profile"),
        ("h1", int, 1, "first observable frequency"),
        ("V2", _weight_arg, _BUMP, "second observable profile"),
        ("h2", int, 1, "second observable frequency"),
    ],
    "moments": [
        ("K", float, 64.0, "weight scale K"),
        ("order", int, 0, "0 (L-values) or 1 (squeezed incomplete Eisenstein mass)"),
        ("theta", float, 0.3, "shrinking exponent (order 1)"),
        ("u", _weight_arg, _BUMP, "weight profile in (k-1)/K"),
        ("V", _weight_arg, _BUMP, "observable profile (order 1)"),
    ],
    "btheta": [
        ("theta", float, 0.3, "shrinking exponent in (0, 1)"),
        ("V1", _weight_arg, _BUMP, "first profile"),
        ("h1", int, 1, "first frequency (0 selects the Eisenstein form)"),
        ("V2", _weight_arg, _BUMP, "second profile"),
        ("h2", int, 1, "second frequency"),
    ],
    "maass": [
        ("file", str, None, "Maass data file (default: bundled even form)"),
        ("file2", str, None, "second Maass data file (default: same as --file)"),
        ("theta", float, 0.3, "shrinking exponent in (0, 1)"),
        ("N", int, 20, "square truncation"),
    ],
    "heatmap": [
        ("weight", int, 40, "weight k"),
        ("index", int, 0, "form index (lambda(2) ascending)"),
        ("ymin", float, 0.3, "lowest row"),
        ("ymax", float, 4.0, "highest row"),
        ("nx", int, 256, "columns over [-1/2, 1/2]"),
        ("ny", int, 128, "rows"),
        ("tol", float, 1e-8, "tolerance of the modular-invariance spot check"),
    ],
    "ghosh-sarnak": [
        ("weight", int, 200, "weight k"),
        ("index", int, 0, "form index (lambda(2) ascending)"),
        ("l", int, None, "single l (default: every admissible l)"),
    ],
    "planck-failure": [
        ("weights", _int_range, "50,100,200", "weights to probe"),
        ("theta", float, 1.0, "shrinking exponent >= 1"),
        ("V", _weight_arg, _BUMP, "observable profile"),
    ],
}

_COMMON = [
    ("out", str, ".", "output directory"),
    ("threads", int, 1, "worker threads"),
    ("cache", str, None, "eigenvalue cache path (default $CUSPVARIANCE_CACHE or ~/.cache)"),
]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cuspvariance", description="Hecke eigenform and quantum-variance experiments.")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name, opts in _OPTIONS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key = value configuration file")
        p.add_argument("--no-cache", action="store_true", default=argparse.SUPPRESS,
                       help="neither read nor write the eigenvalue cache")
        for flag, typ, default, hlp in opts + _COMMON:
            p.add_argument(f"--{flag}", dest=flag.replace("-", "_"), type=typ,
                           default=argparse.SUPPRESS, help=f"{hlp} (default {default})")
    return parser


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    subcommand: str
    params: dict
    out: Path
    threads: int = 1
    cache_path: Path | None = None
    use_cache: bool = True
    source: dict = field(default_factory=dict)


def load_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; blank lines and ``#`` comments ignored."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    for i, ln in enumerate(text.splitlines(), start=1):
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        key, sep, val = ln.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{i}: expected key = value")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def _resolve(argv) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    name = ns.pop("subcommand")
    table = {flag.replace("-", "_"): (typ, default) for flag, typ, default, _ in _OPTIONS[name] + _COMMON}
    values = {}
    source = {}
    for key, (typ, default) in table.items():
        values[key] = typ(default) if isinstance(default, str) and typ is not str else default
        source[key] = "default"
    cfg_path = ns.pop("config", None)
    if cfg_path:
        for key, raw in load_config(cfg_path).items():
            if key == "no_cache":
                values["no_cache"] = raw.lower() in ("1", "true", "yes")
                continue
            if key not in table:
                raise ConfigError(f"unknown key {key!r} for {name}")
            try:
                values[key] = table[key][0](raw)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
            source[key] = "config"
    for key, val in ns.items():
        values[key] = val
        source[key] = "flag"

    if "theta" in values and not 0.0 <= values["theta"] <= 4.0:
        raise ConfigError("theta must lie in [0, 4]")
    if "tol" in values and not values["tol"] > 0:
        raise ConfigError("tol must be positive")
    if values["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    for key in ("K", "N", "nmax", "nx", "ny"):
        if key in values and values[key] is not None and not values[key] > 0:
            raise ConfigError(f"{key} must be positive")
    out = Path(values.pop("out"))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc.strerror}") from exc
    threads = values.pop("threads")
    cpath = values.pop("cache")
    use_cache = not values.pop("no_cache", False)
    return RunConfig(name, values, out, threads,
                     Path(cpath) if cpath else cache.default_path(), use_cache, source)


# ---------------------------------------------------------------------------
# subcommands; each returns a list of (check name, passed, detail)
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _cmd_forms(cfg: RunConfig, p: dict) -> list:
    if p["weight"] is not None:
        ks = [p["weight"]]
    elif p["weights"] is not None:
        ks = p["weights"]
    else:
        raise ConfigError("forms needs --weight or --weights")
    if any(k < 12 or k % 2 for k in ks):
        raise ConfigError("weights must be even and >= 12")
    if p["nmax"] < 2:
        raise ConfigError("nmax must be >= 2")
    checks = []
    worst = 0.0
    for k in ks:
        basis = qforms.STORE.get(k, p["nmax"])
        with mpmath.workdps(qforms.STORE_DPS):
            for f in basis:
                for n in range(2, f.n_max + 1):
                    direct = f.lam_mp[n]
                    gap = abs(qforms.lambda_extend(f, n) - direct) / max(abs(direct), mpmath.mpf(1))
                    worst = max(worst, float(gap))
        checks.append((f"dim_S{k}", basis.dim == qforms.cusp_dim(k), f"dim={basis.dim}"))
    checks.append(("hecke_multiplicativity", worst <= 1e-20, f"max_rel_gap={worst:.3g}"))
    # the forms subcommand always persists what it built
    cache.save_store(qforms.STORE, cfg.cache_path)
    print(f"cache {cfg.cache_path}")
    return checks


def _cmd_petersson(cfg: RunConfig, p: dict) -> list:
    ks = p["weights"]
    if not ks or any(k < 12 or k % 2 for k in ks):
        raise ConfigError("weights must be even and >= 12")
    rep = petersson.petersson_check(ks, p["nmax"], tol=p["tol"], threads=cfg.threads)
    path = cfg.out / "petersson.csv"
    rep.to_csv(path)
    print(f"wrote {path}")
    fails = rep.failures
    return [("petersson_identity", rep.passed,
             f"max_abs_diff={rep.max_abs_diff:.3g} failures={len(fails)}")]


def _write_report(cfg: RunConfig, rep: variance.VarianceReport, stem: str) -> None:
    rep.to_csv(cfg.out / f"{stem}.csv")
    rep.per_k_csv(cfg.out / f"{stem}_per_k.csv")
    print(f"wrote {cfg.out / (stem + '.csv')}")
    print(f"empirical={_fmt(rep.empirical)} predicted={_fmt(rep.predicted)} ratio={_fmt(rep.ratio)}")


def _tag(x: float) -> str:
    return f"{x:g}"


def _cmd_qvthm(cfg: RunConfig, p: dict) -> list:
    rep = variance.qvthm_experiment(p["K"], p["u"], p["theta"], p["W1"], p["h1"], p["W2"], p["h2"],
                                    threads=cfg.threads)
    _write_report(cfg, rep, f"qvthm_theta{_tag(p['theta'])}_K{_tag(p['K'])}")
    return [("finite", math.isfinite(rep.empirical), "")]


def _cmd_variance(cfg: RunConfig, p: dict) -> list:
    P1 = variance.PoincareObservable(p["V1"], p["h1"])
    P2 = variance.PoincareObservable(p["V2"], p["h2"])
    rep = variance.variance_experiment(p["K"], p["u"], p["theta"], P1, P2, threads=cfg.threads)
    _write_report(cfg, rep, f"variance_theta{_tag(p['theta'])}_K{_tag(p['K'])}")
    checks = [("finite", math.isfinite(rep.empirical), "")]
    if P1 == P2:
        checks.append(("nonnegative", rep.empirical >= 0.0, f"empirical={rep.empirical:.6g}"))
    return checks


def _cmd_moments(cfg: RunConfig, p: dict) -> list:
    if p["order"] == 0:
        rep = variance.zeroth_moment(p["K"], p["u"], threads=cfg.threads)
        stem = f"moment0_K{_tag(p['K'])}"
    elif p["order"] == 1:
        rep = variance.first_moment(p["K"], p["u"], p["theta"], p["V"], threads=cfg.threads)
        stem = f"moment1_theta{_tag(p['theta'])}_K{_tag(p['K'])}"
    else:
        raise ConfigError("order must be 0 or 1")
    _write_report(cfg, rep, stem)
    return [("finite", math.isfinite(rep.empirical), "")]


def _cmd_btheta(cfg: RunConfig, p: dict) -> list:
    if not 0.0 < p["theta"] < 1.0:
        raise ConfigError("btheta needs theta in (0, 1)")
    regime = btheta.ThetaRegime.of(p["theta"])
    try:
        psi1 = btheta.FourierObservable.single(p["h1"], p["V1"])
        psi2 = btheta.FourierObservable.single(p["h2"], p["V2"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    val = btheta.b_theta_general(psi1, psi2, regime)
    back = btheta.b_theta_general(psi2, psi1, regime)
    path = cfg.out / f"btheta_theta{_tag(p['theta'])}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "regime", "obs1", "obs2", "re", "im"])
        w.writerow([_fmt(p["theta"]), regime.regime, psi1.describe(), psi2.describe(),
                    _fmt(complex(val).real), _fmt(complex(val).imag)])
    print(f"wrote {path}")
    print(f"B_theta={complex(val).real!r}")
    gap = abs(complex(val) - complex(back).conjugate())
    return [("hermitian", gap <= 1e-10 * max(1.0, abs(val)), f"gap={gap:.3g}")]


def _bundled(name: str) -> Path:
    return Path(str(resources.files("cuspvariance") / "data" / name))


def _cmd_maass(cfg: RunConfig, p: dict) -> list:
    if not 0.0 < p["theta"] < 1.0:
        raise ConfigError("maass needs theta in (0, 1)")
    f1 = Path(p["file"]) if p["file"] else _bundled("maass_even.txt")
    f2 = Path(p["file2"]) if p["file2"] else f1
    try:
        phi1 = btheta.parse_maass_file(f1)
        phi2 = phi1 if f2 == f1 else btheta.parse_maass_file(f2)
    except OSError as exc:
        raise ConfigError(f"cannot read Maass data: {exc}") from exc
    except (btheta.MaassFormatError, btheta.MaassValidationError) as exc:
        raise ConfigError(f"Maass data rejected: {exc}") from exc
    if p["N"] > min(phi1.n_max, phi2.n_max):
        raise ConfigError(f"N exceeds the available eigenvalues ({min(phi1.n_max, phi2.n_max)})")
    ps = btheta.b_theta_maass(phi1, phi2, btheta.ThetaRegime.of(p["theta"]), p["N"])
    path = cfg.out / f"maass_theta{_tag(p['theta'])}_N{p['N']}.csv"
    ps.to_csv(path)
    print(f"wrote {path}")
    print(f"S_1={ps.values[0]!r} S_N={ps.final!r}")
    checks = []
    if f2 == f1:
        bound = -1e-3 * abs(ps.values[0])
        checks.append(("partial_sum_bounded_below", ps.final >= bound, f"S_N={ps.final:.6g}"))
    return checks


def _cmd_heatmap(cfg: RunConfig, p: dict) -> list:
    if p["ymin"] < render.Y_MIN:
        raise ConfigError(f"ymin must be >= {render.Y_MIN}")
    try:
        f = render.form_for(p["weight"], p["index"], p["ymin"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    stem = cfg.out / f"heatmap_k{p['weight']}_f{p['index']}"
    grid = render.heatmap(f, p["ymin"], p["ymax"], p["nx"], p["ny"], out=stem)
    print(f"wrote {stem}.pgm {stem}.csv")
    return [("modular_invariance", grid.invariance_gap <= p["tol"], f"max_rel_gap={grid.invariance_gap:.3g}"),
            ("nonnegative", bool((grid.values >= 0).all()), "")]


def _cmd_ghosh_sarnak(cfg: RunConfig, p: dict) -> list:
    k = p["weight"]
    try:
        f = render.form_for(k, p["index"], 0.5)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    top = render.ghosh_sarnak_range(k)
    ls = [p["l"]] if p["l"] is not None else list(range(1, top + 1))
    if any(not 1 <= l <= top for l in ls):
        raise ConfigError(f"l must lie in [1, {top}] for k = {k}")
    path = cfg.out / f"ghosh_sarnak_k{k}_f{p['index']}.csv"
    rows = []
    for l in ls:
        rows.append((l, (k - 1) / (4 * math.pi * l), render.ghosh_sarnak_residual(f, l),
                     render.ghosh_sarnak_residual(f, l, exponent="full")))
    with open(path, "w", newline="") as fh:
        fh.write("# residual_half: normalizer (e/l)^((k-1)/2); the n = l term then equals lambda(l) e(lx)\n")
        fh.write("# residual_full: alternative normalizer (e/l)^(k-1), reported for comparison\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "index", "l", "y_l", "residual_half", "residual_full"])
        for l, y, r1, r2 in rows:
            w.writerow([k, p["index"], l, _fmt(y), _fmt(r1), _fmt(r2)])
    print(f"wrote {path}")
    return [("finite", all(math.isfinite(r[2]) for r in rows), "")]


def _cmd_planck(cfg: RunConfig, p: dict) -> list:
    if p["theta"] < 1.0:
        raise ConfigError("planck-failure needs theta >= 1")
    rows = variance.planck_failure_probe(p["weights"], p["theta"], p["V"])
    path = cfg.out / f"planck_theta{_tag(p['theta'])}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "index", "log_mu", "mu", "mu_approx", "nu", "ratio", "log_ratio"])
        for r in rows:
            w.writerow([r.k, r.index, _fmt(r.log_mu), _fmt(r.mu), _fmt(r.mu_approx), _fmt(r.nu),
                        _fmt(r.ratio), _fmt(r.log_ratio)])
    print(f"wrote {path}")
    return [("finite", all(math.isfinite(r.log_mu) for r in rows), "")]


_HANDLERS = {
    "forms": _cmd_forms,
    "petersson": _cmd_petersson,
    "qvthm": _cmd_qvthm,
    "variance": _cmd_variance,
    "moments": _cmd_moments,
    "btheta": _cmd_btheta,
    "maass": _cmd_maass,
    "heatmap": _cmd_heatmap,
    "ghosh-sarnak": _cmd_ghosh_sarnak,
    "planck-failure": _cmd_planck,
}


def _error_line(kind: str, msg: str) -> str:
    return f"cuspvariance: error={kind} message={' '.join(str(msg).split())}"


def run(cfg: RunConfig) -> int:
    """Execute a resolved configuration; returns the exit status."""
    if cfg.use_cache and cfg.cache_path.exists():
        try:
            cache.load_into(qforms.STORE, cfg.cache_path)
        except cache.CacheFormatError as exc:
            raise ConfigError(f"eigenvalue cache {cfg.cache_path}: {exc}") from exc
    checks = _HANDLERS[cfg.subcommand](cfg, dict(cfg.params))
    if cfg.use_cache and cfg.subcommand != "forms":
        cache.save_store(qforms.STORE, cfg.cache_path)
    ok = True
    for name, passed, detail in checks:
        ok &= bool(passed)
        print(f"check {name}: {'PASS' if passed else 'FAIL'} {detail}".rstrip())
    if not ok:
        failed = ",".join(name for name, passed, _ in checks if not passed)
        print(_error_line("check", f"failed checks: {failed}"), file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = _resolve(argv)
        return run(cfg)
    except ConfigError as exc:
        print(_error_line("config", exc), file=sys.stderr)
        return 2
    except ValueError as exc:
        # domain errors raised by the library for the requested inputs
        print(_error_line("input", exc), file=sys.stderr)
        return 2
    except OSError as exc:
        print(_error_line("io", exc), file=sys.stderr)
        return 2
    except ArithmeticError as exc:
        print(_error_line("numeric", exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
