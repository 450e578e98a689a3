"""Command-line runner, configs and experiment outputs."""

from __future__ import annotations

import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from rrsim.cli import EXIT_CONFIG, main
from rrsim.config import load_config, parse_config
from rrsim.errors import ConfigurationError
from rrsim.experiments import DIVERGED_AS_EXPECTED, EXIT_UNEXPECTEDLY_STABLE
from rrsim.integrator import Trajectory

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write_config(tmp_path: Path, name: str, **overrides) -> Path:
    data = json.loads((CONFIGS / f"{name}.json").read_text())
    data["output_dir"] = "out"
    data.update(overrides)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(data))
    return path


def test_presets_listing(capsys):
    assert main(["presets"]) == 0
    text = capsys.readouterr().out
    for expected in ("coupled-linear", "spacecraft", "L: 1 m", "Switching time: 0.5 s"):
        assert expected in text


def test_shipped_configs_parse():
    for path in sorted(CONFIGS.glob("*.json")):
        cfg = load_config(path)
        assert cfg.output_dir.is_absolute() or cfg.output_dir.parts[0] == ".."
        cfg.system_params()


def test_coupled_stability_run(tmp_path, capsys):
    assert main(["run", str(write_config(tmp_path, "coupled-stability"))]) == 0
    out = tmp_path / "out"
    report = json.loads((out / "report_coupled-stability.json").read_text())
    assert report["verdict"]["kind"] == "ConvergesTo0"
    assert report["decay_fit"]["rate"] < 0
    traj = Trajectory.from_csv(out / "trajectory_switched.csv")
    assert traj.times[-1] == pytest.approx(50.0)
    assert list(out.glob("plot_*.gp"))
    assert "coupled-stability:" in capsys.readouterr().out


def test_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    for d in (a, b):
        assert main(["run", str(write_config(d, "tau-sweep"))]) == 0
    files = sorted(p.name for p in (a / "out").iterdir())
    assert files == sorted(p.name for p in (b / "out").iterdir())
    for name in files:
        assert (a / "out" / name).read_bytes() == (b / "out" / name).read_bytes()


def test_tau_sweep_outputs(tmp_path):
    assert main(["run", str(write_config(tmp_path, "tau-sweep"))]) == 0
    report = json.loads((tmp_path / "out" / "report_tau-sweep.json").read_text())
    assert report["non_increasing"] is True
    rows = (tmp_path / "out" / "sweep_gaps.csv").read_text().splitlines()
    assert rows[0] == "tau,gap" and len(rows) == 5
    gaps = [float(r.split(",")[1]) for r in rows[1:]]
    assert gaps == report["gaps"]


def test_no_amplification_diverges_as_expected(tmp_path, capsys):
    assert main(["run", str(write_config(tmp_path, "no-amplification"))]) == 0
    assert DIVERGED_AS_EXPECTED in capsys.readouterr().out


def test_unexpectedly_stable_exit_code(tmp_path):
    path = write_config(tmp_path, "no-amplification",
                        analysis={"growth_window": [10.0, 50.0], "growth_factor": 1e30})
    assert main(["run", str(path)]) == EXIT_UNEXPECTEDLY_STABLE


def test_bounded_run_that_diverges_exits_nonzero(tmp_path):
    path = write_config(tmp_path, "coupled-stability", analysis={"epsilon": 1e-3})
    assert main(["run", str(path)]) == 1


@pytest.mark.parametrize("bad", [
    {"experiment": "warp-drive"},
    {"integrator": {"step": 0.05, "dt": 0.1}},
    {"analysis": {"epsilon": 1.0, "gamma": 2.0}},
    {"system": {"preset": "coupled-linear", "params": {"mass": 3.0}}},
    {"system": "submarine"},
    {"schedule": {"type": "constant", "tau": 0.5, "jitter": 0.1}},
    {"seed": "abc"},
    {"colour": "blue"},
])
def test_strict_config_rejection(tmp_path, bad, capsys):
    path = write_config(tmp_path, "coupled-stability", **bad)
    assert main(["run", str(path)]) == EXIT_CONFIG
    assert "error:" in capsys.readouterr().err


def test_missing_and_malformed_files(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == EXIT_CONFIG
    with pytest.raises(ConfigurationError):
        parse_config({"experiment": "tau-sweep"})


def test_inline_parameter_override(tmp_path):
    cfg = parse_config({"experiment": "coupled-stability", "output_dir": "x",
                        "system": {"preset": "coupled-linear", "params": {"x0": [0, 0.1, 0, 0, 0, 0]}}},
                       tmp_path)
    p = cfg.system_params()
    assert p.x0 == (0, 0.1, 0, 0, 0, 0)
    assert cfg.output_dir == tmp_path / "x"


def test_slow_switch_probe_is_seeded(tmp_path):
    a = tmp_path / "a"
    a.mkdir()
    path = write_config(a, "slow-switch-probe", integrator={"step": 0.1, "horizon": 60.0},
                        analysis={"epsilon": 0.1, "radii": [0.1]})
    main(["run", str(path)])
    r1 = json.loads((a / "out" / "report_slow-switch-probe.json").read_text())
    main(["run", str(path)])
    r2 = json.loads((a / "out" / "report_slow-switch-probe.json").read_text())
    assert r1 == r2
    offset = np.array(r1["runs"][0]["omega0_offset"])
    assert np.linalg.norm(offset) <= 0.1


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    assert "FAIL" not in capsys.readouterr().out


@pytest.mark.skipif(shutil.which("rrsim") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(["rrsim", "presets"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "coupled-linear" in proc.stdout


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "rrsim.cli", "presets"], capture_output=True, text=True,
                          check=False)
    assert proc.returncode == 0 and "spacecraft" in proc.stdout
