"""Command-line interface: subcommands, exit codes, file outputs."""
import json
import subprocess
import sys

import pytest

from levyldp import step_path

CLI = [sys.executable, "-m", "levyldp.cli"]


def run_cli(args, **kw):
    return subprocess.run(CLI + list(args), capture_output=True, text=True, **kw)


SIM_KEYS = """
model.stable = 1.5
drift.name = zero
set.name = sup_exceed
set.c = 1.0
sim.grid_n = 128
sim.shard_size = 2048
audit.max = 8
seed = 3
"""


@pytest.fixture()
def slope_config(tmp_path):
    f = tmp_path / "slope.cfg"
    f.write_text(SIM_KEYS + """
eps = 0.5,0.25,0.125
n_samples = 20000
slope.force_jk = 1,0
slope.tol = 0.4
""")
    return f


@pytest.fixture()
def path_file(tmp_path):
    p = step_path([(0.3, 1.0), (0.7, -2.0)])
    f = tmp_path / "path.json"
    f.write_text(p.to_json())
    return f


def test_help_exits_zero():
    assert run_cli(["--help"]).returncode == 0


def test_missing_config_key_exit_2(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text(SIM_KEYS + "eps = 0.5,0.25\n")  # n_samples missing
    res = run_cli(["--config", str(f), "--out", str(tmp_path), "slope"])
    assert res.returncode == 2
    assert "n_samples" in res.stderr


def test_unknown_config_key_exit_2(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text("model.alhpa = 1.5\n")
    res = run_cli(["--config", str(f), "--out", str(tmp_path), "slope"])
    assert res.returncode == 2
    assert "model.alhpa" in res.stderr


def test_increasing_eps_exit_2(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text(SIM_KEYS + "eps = 0.125,0.25\nn_samples = 2000\n")
    res = run_cli(["--config", str(f), "--out", str(tmp_path), "slope"])
    assert res.returncode == 2


def test_j1_prints_bracket(tmp_path, path_file):
    other = tmp_path / "other.json"
    other.write_text(step_path([(0.35, 1.0), (0.7, -2.0)]).to_json())
    res = run_cli(["j1", str(path_file), str(other), "--tol", "1e-3"])
    assert res.returncode == 0
    blob = json.loads(res.stdout)
    assert blob["lower"] <= blob["upper"]
    assert blob["lower"] == pytest.approx(0.05, abs=2e-3)


def test_rate_subcommand(path_file, tmp_path):
    f = tmp_path / "rate.cfg"
    f.write_text("model.alpha = 1.5\nmodel.beta = 2.0\ndrift.name = zero\n")
    res = run_cli(["--config", str(f), "rate", str(path_file)])
    assert res.returncode == 0
    blob = json.loads(res.stdout)
    assert blob["I"] == pytest.approx(1.5)
    assert blob["I_tilde"] == pytest.approx(1.5)


def test_solve_roundtrip(tmp_path, path_file):
    f = tmp_path / "solve.cfg"
    f.write_text("drift.name = const\ndrift.c = 1.0\n")
    out = tmp_path / "solved.json"
    res = run_cli(["--config", str(f), "--out", str(tmp_path),
                   "solve", str(path_file)])
    assert res.returncode == 0, res.stderr
    files = list(tmp_path.glob("*solved*")) + list(tmp_path.glob("*solution*"))
    assert files, f"no solution file written in {list(tmp_path.iterdir())}"


def test_simulate_writes_paths(tmp_path):
    f = tmp_path / "sim.cfg"
    f.write_text(SIM_KEYS + "eps = 0.25\nn_samples = 1000\n")
    res = run_cli(["--config", str(f), "--out", str(tmp_path),
                   "simulate", "--n", "3"])
    assert res.returncode == 0, res.stderr
    written = [p for p in tmp_path.iterdir() if p.suffix in (".json", ".csv")
               and p.name != "sim.cfg"]
    assert len(written) >= 3


def test_cjk_appends_csv(tmp_path):
    f = tmp_path / "cjk.cfg"
    f.write_text("""
model.stable = 1.5
set.name = sup_exceed
set.c = 1.0
cjk.j = 1
cjk.k = 0
cjk.floor_up = 0.5
cjk.n = 20000
seed = 5
""")
    res = run_cli(["--config", str(f), "--out", str(tmp_path), "cjk"])
    assert res.returncode == 0, res.stderr
    blob = json.loads(res.stdout)
    assert blob["schema_version"] == 1
    csv = (tmp_path / "cjk.csv").read_text().strip().splitlines()
    assert csv[0].startswith("j,k,floor_up,floor_down,n,value")
    assert len(csv) == 2


def test_slope_pass_writes_outputs(tmp_path, slope_config):
    res = run_cli(["--config", str(slope_config), "--out", str(tmp_path),
                   "--threads", "2", "slope"])
    assert res.returncode == 0, res.stderr + res.stdout
    for suffix in (".csv", ".json", ".gp"):
        assert (tmp_path / f"slope{suffix}").exists()
    blob = json.loads((tmp_path / "slope.json").read_text())
    assert blob["pass"] is True
    assert blob["schema_version"] == 1


def test_slope_fail_exit_4(tmp_path):
    f = tmp_path / "slope.cfg"
    f.write_text(SIM_KEYS + """
eps = 0.5,0.25
n_samples = 2000
slope.force_jk = 1,0
slope.tol = 0.0001
""")
    res = run_cli(["--config", str(f), "--out", str(tmp_path), "slope"])
    assert res.returncode == 4
    assert (tmp_path / "slope.json").exists()  # results still written


def test_thread_invariant_csv_bytes(tmp_path, slope_config):
    out1 = tmp_path / "t1"
    out8 = tmp_path / "t8"
    out1.mkdir(), out8.mkdir()
    r1 = run_cli(["--config", str(slope_config), "--out", str(out1),
                  "--threads", "1", "slope"])
    r8 = run_cli(["--config", str(slope_config), "--out", str(out8),
                  "--threads", "4", "slope"])
    assert r1.returncode == 0 and r8.returncode == 0
    assert (out1 / "slope.csv").read_bytes() == (out8 / "slope.csv").read_bytes()
