"""Run the three standard configurations and print their run statistics.

Each run goes through the same path as ``warpflow run configs/<name>.cfg``
and writes series.csv / report.json under out/<name>.

    python scripts/standard_runs.py                  # all three
    python scripts/standard_runs.py torus_exp
"""

import sys
import time
from pathlib import Path

from warpflow import experiments
from warpflow.cli import emit
from warpflow.diagnostics import decay_fit, run_summary
from warpflow.errors import InsufficientData


def main(argv):
    names = argv or sorted(experiments.STANDARD)
    for name in names:
        t0 = time.perf_counter()
        p = experiments.prepare(experiments.standard_config(name))
        traj = experiments.run_prepared(p)
        out = emit(traj, p.iso, Path("out") / name, grid=p.grid, profile=p.profile, config=p.config)
        s = run_summary(traj.records)
        try:
            fit = decay_fit(traj.records, p.config.K)
            decay = f"{fit.mode} rate={fit.rate:.4g} R2={fit.quality:.4f}"
        except InsufficientData as exc:
            decay = f"no fit ({exc})"
        print(f"{name}: {traj.termination.value} after {traj.steps} steps, t={traj.final_state.t:.4g} "
              f"[{time.perf_counter() - t0:.1f} s] -> {out}")
        print(f"  volume drift {s['max_volume_drift']:.3e}  max area increase "
              f"{s['max_area_increase']:.3e}  min slack {s['min_iso_slack']:.3e}")
        print(f"  osc {traj.final_state.osc:.3e}  decay: {decay}")


if __name__ == "__main__":
    main(sys.argv[1:])
