"""Grid refinement of the sin / S^2 run (volume drift, endpoint, decay rate).

Runs the standard sphere configuration to convergence at several
resolutions with a fixed cfl, so dt / h^2 is the same on every grid, and
prints the observed orders log2(e_N / e_2N).

    python scripts/sphere_refinement.py            # N = 256 512 1024
    python scripts/sphere_refinement.py 128 256    # custom list
"""

import math
import sys
import time

from warpflow import experiments


def main(argv):
    sizes = [int(a) for a in argv] or [256, 512, 1024]
    rows = []
    for N in sizes:
        t0 = time.perf_counter()
        res = experiments.sphere_run(N)
        res["seconds"] = time.perf_counter() - t0
        rows.append(res)
        print(f"N={N:5d}  steps={res['steps']:8d}  t_end={res['t_end']:.4f}  "
              f"drift={res['drift']:.3e}  A_gap={res['A_gap']:.3e}  "
              f"rho_dev={res['rho_dev']:.3e}  rate={res['rate']:.5f}  "
              f"R2={res['quality']:.6f}  [{res['seconds']:.1f} s]", flush=True)
    for a, b in zip(rows, rows[1:]):
        orders = {k: math.log2(a[k] / b[k]) for k in ("drift", "A_gap")}
        print(f"{a['N']}->{b['N']}: " + "  ".join(f"order({k})={v:.3f}" for k, v in orders.items())
              + f"  rate change={abs(b['rate'] - a['rate']) / a['rate']:.3%}")


if __name__ == "__main__":
    main(sys.argv[1:])
