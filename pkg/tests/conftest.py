import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from warpflow import experiments  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]

_ACCEPTANCE_LINES: list[str] = []


class AcceptanceReport:
    """Collects one PASS/FAIL line per checked quantity of a criterion."""

    def __call__(self, criterion: int, label: str, ok: bool, detail: str) -> bool:
        line = f"[criterion {criterion:2d}] {'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return bool(ok)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceReport()


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# ------------------------------------------------------------- standard runs
@pytest.fixture(scope="session")
def sphere_run():
    """sin / S^2 standard run at N = 256 (to convergence)."""
    return experiments.sphere_run(256)


@pytest.fixture(scope="session")
def sphere_run_512():
    return experiments.sphere_run(512)


@pytest.fixture(scope="session")
def sphere_run_1024():
    return experiments.sphere_run(1024)


def _torus(name, keep_states=False):
    p = experiments.prepare(experiments.standard_config(name), keep_states=keep_states)
    return {"prepared": p, "trajectory": experiments.run_prepared(p)}


@pytest.fixture(scope="session")
def torus_exp_run():
    return _torus("torus_exp")


@pytest.fixture(scope="session")
def torus_const_run():
    return _torus("torus_const", keep_states=True)


@pytest.fixture(scope="session")
def standard_runs(sphere_run, torus_exp_run, torus_const_run):
    """name -> (trajectory, prepared) for the three standard runs."""
    return {
        "sphere_sin": (sphere_run["trajectory"], sphere_run["prepared"]),
        "torus_exp": (torus_exp_run["trajectory"], torus_exp_run["prepared"]),
        "torus_const": (torus_const_run["trajectory"], torus_const_run["prepared"]),
    }
