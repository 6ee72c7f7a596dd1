import hashlib
import json
import math
import subprocess
import sys

import pytest

from outerbilliards import cli
from outerbilliards.errors import ConfigError


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_orbit_closes_from_exact_start(tmp_path, capsys):
    out = tmp_path / "orbit"
    rc = cli.main(["orbit", "--beta", "1.5708", "--start", "2+sqrt(3),1", "--steps", "5",
                   "--out", str(out)])
    assert rc == 0
    rep = json.loads((out / "orbit.json").read_text())
    assert rep["beta"] == math.pi / 2
    assert rep["closure_residual"] < 1e-9
    assert rep["closed"] is True
    lines = (out / "orbit.csv").read_text().splitlines()
    assert lines[0] == "step,x,y,region"
    assert len(lines) == 7
    assert "closure residual" in capsys.readouterr().out


def test_rounded_start_does_not_close(tmp_path):
    # frozen: 3.732 is not 2 + sqrt 3, and the five-step orbit misses by about 1.3e-4
    out = tmp_path / "orbit"
    cli.main(["orbit", "--beta", "1.5708", "--start", "3.732,1", "--out", str(out)])
    rep = json.loads((out / "orbit.json").read_text())
    assert rep["closure_residual"] == pytest.approx(1.3e-4, rel=0.1)
    assert rep["closed"] is False


def test_beta_snap_only_near_half_pi():
    assert cli.config_from_args(["orbit", "--beta", "1.5708"]).beta == math.pi / 2
    assert cli.config_from_args(["orbit", "--beta", "pi/3"]).beta == pytest.approx(math.pi / 3)
    assert cli.config_from_args(["orbit", "--beta", "1.57"]).beta == 1.57


def test_config_file_and_flag_precedence(tmp_path):
    cfg_file = tmp_path / "lab.cfg"
    cfg_file.write_text("# sawtooth run\nseeds = 12\nsteps=300\nm = 3,4\n"
                        "horizon = 50  # comment\n")
    cfg = cli.config_from_args(["sawtooth", "--config", str(cfg_file), "--seeds", "7"])
    assert cfg.seeds == 7
    assert cfg.steps == 300
    assert cfg.m == [3, 4]
    assert cfg.horizon == 50


def test_defaults_per_command():
    cfg = cli.config_from_args(["return-map"])
    assert cfg.n == [10**4]
    assert cfg.steps == 100


@pytest.mark.parametrize("argv", [
    ["orbit", "--beta", "2.0"],
    ["orbit", "--beta", "abc"],
    ["sawtooth", "--m", "2"],
    ["sawtooth", "--delta", "5"],
    ["normal-form", "--n", "10"],
    ["orbit", "--seeds", "0"],
    ["acceptance", "--suite", "nonsense"],
])
def test_bad_config_exits_with_status_two(argv, tmp_path, capsys):
    assert cli.main(argv + ["--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_bad_config_file(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text("colour = blue\n")
    with pytest.raises(ConfigError):
        cli.read_config(f)
    f.write_text("seeds 12\n")
    with pytest.raises(ConfigError):
        cli.read_config(f)
    f.write_text("seeds = many\n")
    with pytest.raises(ConfigError):
        cli.read_config(f)


def test_env_threads(monkeypatch):
    monkeypatch.setenv("BILLIARD_LAB_THREADS", "3")
    assert cli.config_from_args(["orbit"]).threads == 3
    assert cli.config_from_args(["orbit", "--threads", "2"]).threads == 2
    monkeypatch.setenv("BILLIARD_LAB_THREADS", "x")
    with pytest.raises(ConfigError):
        cli.config_from_args(["orbit"])


def test_sawtooth_run_is_deterministic(tmp_path):
    outs = []
    for k, threads in enumerate(("1", "4", "1")):
        out = tmp_path / f"run{k}"
        rc = cli.main(["sawtooth", "--m", "3,4", "--seeds", "20", "--steps", "2000",
                       "--threads", threads, "--out", str(out)])
        assert rc == 0
        outs.append(out)
    for name in ("sawtooth.json", "polygon_m3.csv", "orbit_m4.csv"):
        assert len({digest(o / name) for o in outs}) == 1
    rep = json.loads((outs[0] / "sawtooth.json").read_text())
    assert [r["crossings"] for r in rep] == [0, 0]


def test_manifest(tmp_path):
    out = tmp_path / "fu"
    cli.main(["fermi-ulam", "--m", "4", "--seeds", "10", "--steps", "1000", "--out", str(out)])
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "fermi-ulam"
    assert man["status"] == 0
    assert man["config"]["seeds"] == 10
    assert man["files"] == ["fermi_ulam.json"]
    assert set(man["versions"]) >= {"outerbilliards", "python", "numpy"}
    assert man["wall_time"] >= 0
    rep = json.loads((out / "fermi_ulam.json").read_text())
    assert rep["crossings"] == 0
    assert all(j["jump"] < j["bound"] for j in rep["jump_checks"])


def test_acceptance_subcommand(tmp_path, capsys):
    out = tmp_path / "acc"
    rc = cli.main(["acceptance", "--suite", "sector-constants", "--out", str(out)])
    assert rc == 0
    rep = json.loads((out / "acceptance.json").read_text())
    assert rep[0]["passed"] is True
    assert "PASS" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "outerbilliards", "orbit", "--out", str(tmp_path)],
                       capture_output=True, text=True, timeout=300)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "manifest.json").exists()
