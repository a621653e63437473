import json
import subprocess
import sys

import numpy as np
import pytest

from dbar_spectra import cli, spectra


def _run(argv):
    lines = []
    code = cli.run(argv, out=lines.append)
    return code, lines


def test_disk_curves_csv(tmp_path):
    p = tmp_path / "d.csv"
    code, lines = _run(["disk-curves", "--points", "20", "--count", "4", "--out", str(p)])
    assert code == 0
    d = spectra.read_curve_csv(p)
    assert list(d)[:5] == ["a", "mu_1", "mu_2", "mu_3", "mu_4"]
    assert len(d["a"]) == 20 and d["a"][0] == 0.01 and d["a"][-1] == pytest.approx(60.0)
    assert all("increasing=True" in l for l in lines)


def test_disk_curves_byte_identical(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        p = tmp_path / name
        assert cli.run(["disk-curves", "--points", "15", "--count", "3", "--out", str(p)],
                       out=lambda s: None) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_disk_curves_json(tmp_path):
    p = tmp_path / "d.json"
    code, _ = _run(["disk-curves", "--points", "5", "--count", "2", "--format", "json",
                    "--out", str(p)])
    assert code == 0
    doc = json.loads(p.read_text())
    assert len(doc["a"]) == 5 and len(doc["mu"]) == 2 and len(doc["labels"]) == 2
    assert doc["meta"]["radius"] == 3.0


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\npoints = 7\ncount=2\nradius=2.0\n")
    p = tmp_path / "o.csv"
    code, _ = _run(["disk-curves", "--config", str(cfg), "--points", "9", "--out", str(p)])
    assert code == 0
    d = spectra.read_curve_csv(p)
    assert len(d["a"]) == 9  # command line beats file
    assert "mu_2" in d and "mu_3" not in d  # file beats defaults
    c = cli.build_config(["disk-curves", "--config", str(cfg)])
    assert c.radius == 2.0 and c.points == 7
    assert cli.build_config(["disk-curves"]).radius == 3.0


@pytest.mark.parametrize("argv", [
    ["disk-curves"],  # missing --out
    ["disk-curves", "--out", "x", "--a-min", "5", "--a-max", "1"],
    ["disk-curves", "--out", "x", "--count", "0"],
    ["fem-curves", "--h", "-1"],
    ["no-such-command"],
    ["robin-compare", "--a-values", "1,abc"],
    ["resolvent", "--lam", "2.0"],
    ["steklov", "--domain", "polygon"],
])
def test_config_errors_exit_2(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, _ = _run(argv)
    assert code == cli.EXIT_CONFIG


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("unknown_key=1\n")
    assert _run(["disk-curves", "--config", str(cfg)])[0] == cli.EXIT_CONFIG
    cfg.write_text("no equals sign\n")
    assert _run(["disk-curves", "--config", str(cfg)])[0] == cli.EXIT_CONFIG
    assert _run(["disk-curves", "--config", str(tmp_path / "missing")])[0] == cli.EXIT_CONFIG


def test_numerical_failure_exit_3(monkeypatch, tmp_path):
    def boom(*a, **k):
        raise spectra.SolverConvergenceError("forced")

    monkeypatch.setattr(spectra, "robin_comparison", boom)
    assert _run(["robin-compare", "--h", "0.3"])[0] == cli.EXIT_NUMERIC


def test_verify_failure_exit_1(monkeypatch):
    monkeypatch.setattr(cli, "run_checks", lambda level, out: (False, []))
    assert _run(["verify"])[0] == cli.EXIT_VERIFY


def test_annulus_curves(tmp_path):
    p = tmp_path / "a.csv"
    code, lines = _run(["annulus-curves", "--points", "40", "--count", "6", "--out", str(p)])
    assert code == 0
    d = spectra.read_curve_csv(p)
    assert "convex_1" in d and "convex_6" in d
    assert any("convex_region=yes" in l for l in lines)
    assert np.all(np.diff(d["mu_1"]) > 0)


def test_fem_curves_and_robin_compare(tmp_path):
    p = tmp_path / "f.csv"
    code, lines = _run(["fem-curves", "--h", "0.25", "--points", "6", "--count", "3",
                        "--out", str(p)])
    assert code == 0 and len(lines) == 3
    code, lines = _run(["robin-compare", "--h", "0.25"])
    assert code == 0 and len(lines) == 3 and lines[0].startswith("a=0.5:")


def test_steklov_and_bergman(tmp_path):
    p = tmp_path / "s.csv"
    code, lines = _run(["steklov", "--radius", "2", "--count", "3", "--out", str(p)])
    assert code == 0
    assert lines[1:] == ["S_1 = 1", "S_2 = 2", "S_3 = 3"]
    code, lines = _run(["bergman-demo", "--h", "0.2"])
    assert code == 0 and lines[2].startswith("sharp constant")


def test_faber_krahn_cli(tmp_path):
    p = tmp_path / "fk.csv"
    code, lines = _run(["faber-krahn", "--h", "0.25", "--a-values", "1", "--out", str(p)])
    assert code == 0 and len(lines) == 1
    assert p.read_text().startswith("a,mu_domain,mu_disk,margin,error,inconclusive\n")
    assert _run(["faber-krahn", "--domain", "disk"])[0] == cli.EXIT_CONFIG


@pytest.mark.parametrize("mode", ["dirichlet", "zero", "continuity"])
def test_resolvent_modes(mode, tmp_path):
    p = tmp_path / "r.csv"
    code, lines = _run(["resolvent", "--mode", mode, "--h", "0.3", "--holomorphic-degree", "4",
                        "--out", str(p)])
    assert code == 0
    assert p.read_text().splitlines()[0] == "a,norm_projected,norm_unprojected,fitted_slope"


def test_mesh_info_round_trip(tmp_path):
    m = tmp_path / "m.txt"
    code, a = _run(["mesh-info", "--h", "0.3", "--write-mesh", str(m)])
    assert code == 0
    code, b = _run(["mesh-info", "--read-mesh", str(m)])
    assert code == 0 and a == b
    bad = tmp_path / "bad.txt"
    bad.write_text("garbage\n")
    assert _run(["mesh-info", "--read-mesh", str(bad)])[0] == cli.EXIT_CONFIG


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "dbar_spectra.cli", "steklov", "--count", "2"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert "S_2 = 4" in r.stdout
