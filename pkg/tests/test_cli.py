import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from warpflow import experiments
from warpflow.cli import (EXIT_CONDITIONS, EXIT_CONFIG, EXIT_CONVERGED, EXIT_FAILURE, EXIT_IO,
                          EXIT_TMAX, OUTPUT_ENV, _clean, emit, endpoint_report, main, read_series)
from warpflow.config import load_config, parse_config
from warpflow.diagnostics import SERIES_COLUMNS

ROOT = Path(__file__).resolve().parents[1]

SMALL = """phi = "sin"
base = "sphere"
resolution = 32
K = 1
cfl = 0.5
t_max = 20
record_every = 50
rho0 = "expr:0.8+0.2*cos(theta)"
"""


def write_cfg(tmp_path, text, name="run.cfg", out="out"):
    path = tmp_path / name
    path.write_text(text + f'output_dir = "{tmp_path / out}"\n')
    return path


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(autouse=True)
def no_env_override(monkeypatch):
    monkeypatch.delenv(OUTPUT_ENV, raising=False)


# ---------------------------------------------------------------- exit codes
def test_converged_run_writes_outputs(tmp_path):
    assert main(["run", str(write_cfg(tmp_path, SMALL))]) == EXIT_CONVERGED
    out = tmp_path / "out"
    table = rows(out / "series.csv")
    assert table[0] == list(SERIES_COLUMNS)
    report = json.loads((out / "report.json").read_text())
    assert report["termination"] == "Converged" and report["admissible"]
    assert report["decay"]["mode"] == "Exponential" and report["decay"]["rate"] > 0
    assert report["conditions"]["satisfied"] and report["photon_sphere"]["roots"] == []
    assert abs(report["stability"]["margin"]) <= 1e-10
    assert report["config"]["resolution"] == 32
    assert not list(out.glob("state_*.csv"))


def test_sin_sphere_n128_needs_longer_horizon(tmp_path):
    """The N = 128 sin example is still at osc ~ 4e-7 at t = 5; it converges by t = 8."""
    text = SMALL.replace("resolution = 32", "resolution = 128").replace("cfl = 0.5\n", "")
    assert main(["run", str(write_cfg(tmp_path, text.replace("t_max = 20", "t_max = 5")))]) == EXIT_TMAX
    assert main(["run", str(write_cfg(tmp_path, text.replace("t_max = 20", "t_max = 8")))]) == EXIT_CONVERGED


def test_tiny_t_max_exits_2(tmp_path):
    path = write_cfg(tmp_path, SMALL.replace("t_max = 20", "t_max = 1e-6"))
    assert main(["run", str(path)]) == EXIT_TMAX
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["termination"] == "TMaxReached" and report["t_final"] == 1e-6
    assert report["decay"]["mode"] is None and "error" in report["decay"]


def test_conditions_exit_4_writes_nothing(tmp_path):
    path = write_cfg(tmp_path, SMALL.replace("K = 1", "K = 0.5"))
    assert main(["run", str(path)]) == EXIT_CONDITIONS
    assert not (tmp_path / "out").exists()


def test_numerical_failure_exits_3(tmp_path):
    text = SMALL.replace("resolution = 32", "resolution = 64").replace("cfl = 0.5", "cfl = 1.0")
    assert main(["run", str(write_cfg(tmp_path, text))]) == EXIT_FAILURE
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["termination"] == "NumericalFailure" and "outside band" in report["message"]


def test_bad_config_and_usage_exit_1(tmp_path, caplog):
    path = write_cfg(tmp_path, SMALL.replace("resolution = 32", "resolution = -4"))
    assert main(["run", str(path)]) == EXIT_CONFIG
    assert "resolution: expected an integer" in caplog.text
    assert main(["run", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == EXIT_CONFIG
    assert main(["run", str(path), "--jobs", "0"]) == EXIT_CONFIG


def test_io_error_exits_5(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory")
    path = tmp_path / "run.cfg"
    path.write_text(SMALL + f'output_dir = "{blocker / "sub"}"\n')
    assert main(["run", str(path)]) == EXIT_IO


# ---------------------------------------------------------------- contents
def test_slice_run_series(tmp_path):
    path = write_cfg(tmp_path, SMALL.replace("0.8+0.2*cos(theta)", "0.8"))
    assert main(["run", str(path)]) == EXIT_CONVERGED
    table = rows(tmp_path / "out" / "series.csv")[1:]
    assert len(table) >= 1 and all(r == table[0] for r in table)
    assert float(table[0][SERIES_COLUMNS.index("osc_rho")]) == 0.0


def test_determinism(tmp_path):
    text = SMALL.replace("t_max = 20", "t_max = 0.3")
    a = write_cfg(tmp_path, text, "a.cfg", "a")
    b = write_cfg(tmp_path, text, "b.cfg", "b")
    main(["run", str(a)])
    main(["run", str(b)])
    assert (tmp_path / "a" / "series.csv").read_bytes() == (tmp_path / "b" / "series.csv").read_bytes()


def test_series_and_report_round_trip(tmp_path):
    cfg = parse_config(SMALL.replace("t_max = 20", "t_max = 0.5"))
    p = experiments.prepare(cfg)
    traj = experiments.run_prepared(p)
    emit(traj, p.iso, tmp_path, grid=p.grid, profile=p.profile, config=cfg)
    assert read_series(tmp_path / "series.csv") == traj.records
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["endpoint"] == _clean(endpoint_report(traj, p.iso))
    assert report["steps"] == traj.steps and report["t_final"] == traj.final_state.t


def test_emit_states_and_h_column(tmp_path):
    text = SMALL.replace("t_max = 20", "t_max = 0.02").replace("record_every = 50", "record_every = 20")
    path = write_cfg(tmp_path, text + "emit_states = true\nh_evolution = true\n")
    assert main(["run", str(path)]) == EXIT_TMAX
    out = tmp_path / "out"
    table = rows(out / "series.csv")
    assert table[0][-1] == "h_evolution_residual"
    assert all(r[-1] != "" for r in table[1:])
    states = sorted(out.glob("state_*.csv"))
    assert len(states) == len(table) - 1
    first = rows(out / "state_0.csv")
    assert first[0] == ["theta", "rho"] and len(first) == 33
    # a written state is valid initial data for a new run
    restart = write_cfg(tmp_path, text.replace('"expr:0.8+0.2*cos(theta)"', f'"file:{states[-1]}"'),
                        "restart.cfg", "restart")
    assert main(["run", str(restart)]) == EXIT_TMAX


def test_torus_state_files(tmp_path):
    text = ('phi = "exp(1, 0.5)"\nbase = "torus(2*pi)"\nresolution = 8\nK = 0\n'
            't_max = 0.01\nr0 = -1\nr_bar = 1\nrho0 = "expr:0.1*cos(x)"\nemit_states = true\n')
    assert main(["run", str(write_cfg(tmp_path, text))]) == EXIT_TMAX
    state = rows(tmp_path / "out" / "state_0.csv")
    assert state[0] == ["x", "y", "rho"] and len(state) == 65


def test_output_env_override(tmp_path, monkeypatch):
    target = tmp_path / "elsewhere"
    monkeypatch.setenv(OUTPUT_ENV, str(target))
    assert main(["run", str(write_cfg(tmp_path, SMALL))]) == EXIT_CONVERGED
    assert (target / "series.csv").is_file() and not (tmp_path / "out").exists()


def test_jobs_runs_configs_separately(tmp_path):
    ok = write_cfg(tmp_path, SMALL, "ok.cfg")
    short = write_cfg(tmp_path, SMALL.replace("t_max = 20", "t_max = 1e-4"), "short.cfg")
    assert main(["run", str(ok), str(short), "--jobs", "2"]) == EXIT_TMAX
    assert json.loads((tmp_path / "out" / "ok" / "report.json").read_text())["termination"] == "Converged"
    assert json.loads((tmp_path / "out" / "short" / "report.json").read_text())["termination"] == "TMaxReached"


def test_distinct_output_dirs_are_not_nested(tmp_path):
    a = write_cfg(tmp_path, SMALL.replace("t_max = 20", "t_max = 1e-4"), "a.cfg", "a")
    b = write_cfg(tmp_path, SMALL.replace("t_max = 20", "t_max = 1e-4"), "b.cfg", "b")
    assert main(["run", str(a), str(b)]) == EXIT_TMAX
    assert (tmp_path / "a" / "series.csv").is_file() and (tmp_path / "b" / "series.csv").is_file()


# --------------------------------------------------------- other subcommands
def test_profile_subcommand(tmp_path):
    assert main(["profile", str(write_cfg(tmp_path, SMALL))]) == EXIT_CONVERGED
    table = rows(tmp_path / "out" / "profile.csv")
    assert table[0] == ["r", "A", "V"] and float(table[1][2]) == 0.0


def test_check_subcommand(tmp_path, capsys):
    assert main(["check", str(write_cfg(tmp_path, SMALL))]) == EXIT_CONVERGED
    printed = json.loads(capsys.readouterr().out)
    assert printed["conditions"]["satisfied"] and printed["stability"]["stable"]
    assert (tmp_path / "out" / "check.json").is_file()
    bad = write_cfg(tmp_path, SMALL.replace("K = 1", "K = 0.5"), "bad.cfg")
    assert main(["check", str(bad)]) == EXIT_CONDITIONS
    capsys.readouterr()
    schw = ('phi = "schwarzschild(1)"\nbase = "sphere"\nresolution = 16\nK = 1\nt_max = 1\n'
            'r0 = 0.5\nr_bar = 3\nrho0 = "expr:1.5"\n')
    assert main(["check", str(write_cfg(tmp_path, schw, "s.cfg"))]) == EXIT_CONDITIONS
    roots = json.loads(capsys.readouterr().out)["photon_sphere"]["roots"]
    assert len(roots) == 1


def test_console_script(tmp_path):
    path = write_cfg(tmp_path, SMALL.replace("t_max = 20", "t_max = 1e-5"))
    res = subprocess.run([sys.executable, "-m", "warpflow.cli", "run", str(path)],
                         capture_output=True, text=True)
    assert res.returncode == EXIT_TMAX


# ------------------------------------------------------------- shipped files
@pytest.mark.parametrize("name", sorted(experiments.STANDARD))
def test_shipped_configs_match_standard(name):
    shipped = load_config(ROOT / "configs" / f"{name}.cfg")
    assert shipped.output_dir == f"out/{name}"
    assert shipped.replace(output_dir="out") == experiments.standard_config(name)
    assert np.isfinite(shipped.t_max)
