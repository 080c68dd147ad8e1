from __future__ import annotations

import csv
import subprocess
import sys

import pytest

from cuspvariance import cache, cli, render
from cuspvariance.btheta import MaassFormData, parse_maass_file, write_maass_file
from cuspvariance.kernels import integrate


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_forms_writes_cache(tmp_path, isolated_cache, capsys):
    code, out, _ = run(["forms", "--weight", "12", "--nmax", "100", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert "check hecke_multiplicativity: PASS" in out
    data = cache.read_cache(isolated_cache)
    assert data[12].n_max >= 100
    rows = [ln for ln in isolated_cache.read_text().splitlines()[1:] if ln.startswith("12,")]
    assert len(rows) == data[12].n_max


def test_forms_needs_a_weight(tmp_path, capsys):
    code, _, err = run(["forms", "--out", str(tmp_path), "--no-cache"], capsys)
    assert code == 2
    assert err.startswith("cuspvariance: error=config ")


def test_petersson_passes(tmp_path, isolated_cache, capsys):
    code, out, _ = run(["petersson", "--weights", "12:24", "--nmax", "5", "--tol", "1e-6",
                        "--out", str(tmp_path)], capsys)
    assert code == 0
    assert "check petersson_identity: PASS" in out
    assert (tmp_path / "petersson.csv").exists()


def test_unknown_flag_exit_2(tmp_path, capsys):
    code, _, err = run(["petersson", "--bogus", "1"], capsys)
    assert code == 2
    assert "error=config" in err


def test_unknown_subcommand_exit_2(capsys):
    assert run(["nope"], capsys)[0] == 2


@pytest.mark.parametrize("argv", [
    ["variance", "--theta", "5"],
    ["petersson", "--tol", "0"],
    ["variance", "--threads", "0"],
    ["moments", "--K", "-3"],
    ["heatmap", "--ymin", "0.01"],
    ["variance", "--u", "triangle:1:2"],
    ["btheta", "--theta", "0.5", "--h1", "0", "--V1", "bump:1:2"],
    ["ghosh-sarnak", "--weight", "50", "--l", "99"],
    ["planck-failure", "--theta", "0.5"],
    ["moments", "--order", "2", "--K", "24"],
])
def test_bad_values_exit_2(tmp_path, capsys, argv):
    code, _, err = run(argv + ["--out", str(tmp_path), "--no-cache"], capsys)
    assert code == 2
    assert err.startswith("cuspvariance: error=")
    assert len(err.strip().splitlines()) == 1


def test_library_domain_error_exit_2(tmp_path, capsys):
    code, _, err = run(["variance", "--V1", "bump:0.5:2", "--K", "24", "--out", str(tmp_path), "--no-cache"],
                       capsys)
    assert code == 2
    assert "error=input" in err


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# experiment\nK = 40\ntheta = 0.4\nh1 = 2\n")
    rc = cli._resolve(["variance", "--config", str(cfg), "--theta", "0.2", "--out", str(tmp_path)])
    assert rc.params["K"] == 40.0 and rc.source["K"] == "config"
    assert rc.params["theta"] == 0.2 and rc.source["theta"] == "flag"
    assert rc.params["h2"] == 1 and rc.source["h2"] == "default"


@pytest.mark.parametrize("body", ["K 40\n", "nonsense = 1\n", "K = many\n"])
def test_config_errors(tmp_path, capsys, body):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(body)
    code, _, err = run(["variance", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 2 and "error=config" in err


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run(["variance", "--config", str(tmp_path / "none.cfg")], capsys)
    assert code == 2 and "error=config" in err


def test_parse_weight_families():
    assert cli.parse_weight("bump:1:2").support == (1.0, 2.0)
    assert cli.parse_weight("plateau:1:5:0.1").family == "plateau"
    assert cli.parse_weight("poly_bump:1:3:1,0.5").family == "poly_bump"
    mz = cli.parse_weight("mean_zero_bump:1:2")
    assert abs(integrate(lambda y: mz(y) / y ** 2, mz.support)[0]) < 1e-12


def test_int_range():
    assert cli._int_range("12:20") == [12, 14, 16, 18, 20]
    assert cli._int_range("50,100") == [50, 100]


def test_maass_bundled_even(tmp_path, isolated_cache, capsys):
    code, out, _ = run(["maass", "--N", "6", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert "partial_sum_bounded_below: PASS" in out
    with open(tmp_path / "maass_theta0.3_N6.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["N", "partial_sum"] and len(rows) == 7


def test_maass_odd_gives_zero(tmp_path, isolated_cache, capsys):
    odd = str(cli._bundled("maass_odd.txt"))
    code, out, _ = run(["maass", "--file", odd, "--N", "5", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert "S_N=0.0" in out


def test_maass_bad_file_exit_2(tmp_path, capsys):
    even = parse_maass_file(cli._bundled("maass_even.txt"))
    lam = list(even.lam)
    lam[6] *= 1.01
    bad = tmp_path / "bad.txt"
    write_maass_file(MaassFormData(even.t, "even", tuple(lam)), bad)
    code, _, err = run(["maass", "--file", str(bad), "--out", str(tmp_path), "--no-cache"], capsys)
    assert code == 2
    assert "(2, 3)" in err


def test_heatmap_check_failure_exit_1(tmp_path, isolated_cache, capsys):
    code, out, err = run(["heatmap", "--weight", "12", "--nx", "8", "--ny", "4", "--tol", "1e-300",
                          "--out", str(tmp_path)], capsys)
    assert code == 1
    assert "check modular_invariance: FAIL" in out
    assert "error=check" in err
    assert (tmp_path / "heatmap_k12_f0.pgm").exists()


def test_heatmap_passes(tmp_path, isolated_cache, capsys):
    code, out, _ = run(["heatmap", "--weight", "24", "--index", "1", "--nx", "16", "--ny", "8",
                        "--out", str(tmp_path)], capsys)
    assert code == 0 and "modular_invariance: PASS" in out


def test_ghosh_sarnak_csv(tmp_path, isolated_cache, capsys):
    code, _, _ = run(["ghosh-sarnak", "--weight", "50", "--out", str(tmp_path)], capsys)
    assert code == 0
    lines = (tmp_path / "ghosh_sarnak_k50_f0.csv").read_text().splitlines()
    assert lines[0].startswith("#") and lines[1].startswith("#")
    assert lines[2] == "k,index,l,y_l,residual_half,residual_full"
    assert len(lines) == 3 + render.ghosh_sarnak_range(50)


def test_btheta_subcommand(tmp_path, capsys):
    code, out, _ = run(["btheta", "--theta", "0.7", "--out", str(tmp_path), "--no-cache"], capsys)
    assert code == 0
    assert "B_theta=0.0" in out
    assert (tmp_path / "btheta_theta0.7.csv").exists()


def test_planck_subcommand(tmp_path, isolated_cache, capsys):
    code, _, _ = run(["planck-failure", "--weights", "40,60", "--out", str(tmp_path)], capsys)
    assert code == 0
    lines = (tmp_path / "planck_theta1.csv").read_text().splitlines()
    assert lines[0] == "k,index,log_mu,mu,mu_approx,nu,ratio,log_ratio"
    assert len(lines) == 1 + 3 + 5


def test_moments_and_qvthm(tmp_path, isolated_cache, capsys):
    assert run(["moments", "--K", "24", "--out", str(tmp_path)], capsys)[0] == 0
    assert (tmp_path / "moment0_K24.csv").exists()
    assert run(["moments", "--order", "1", "--K", "24", "--theta", "0.4", "--out", str(tmp_path)], capsys)[0] == 0
    assert (tmp_path / "moment1_theta0.4_K24_per_k.csv").exists()
    assert run(["qvthm", "--K", "24", "--out", str(tmp_path)], capsys)[0] == 0
    assert (tmp_path / "qvthm_theta0.3_K24.csv").exists()


def test_variance_subcommand(tmp_path, isolated_cache, capsys):
    code, out, _ = run(["variance", "--K", "24", "--out", str(tmp_path)], capsys)
    assert code == 0 and "check nonnegative: PASS" in out
    assert (tmp_path / "variance_theta0.3_K24.csv").exists()


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "cuspvariance", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    assert "ghosh-sarnak" in r.stdout
