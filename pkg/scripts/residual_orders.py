"""Observed orders of the identity residuals on a fixed smooth sphere state.

Prints the Minkowski and Phi-balance residuals of rho = 0.8 + 0.2 cos(theta)
on the sin / S^2 geometry, then the H-evolution residual on the first
window of the standard run with dt / h^2 held fixed.

    python scripts/residual_orders.py              # N = 128 256 512
    python scripts/residual_orders.py 64 128 256
"""

import sys

from warpflow import experiments


def show(label, sizes, values):
    orders = experiments.observed_orders(values)
    print(label)
    for k, (N, v) in enumerate(zip(sizes, values)):
        tail = f"  order {orders[k - 1]:.3f}" if k else ""
        print(f"  N={N:5d}  {v:.3e}{tail}")


def main(argv):
    sizes = [int(a) for a in argv] or [128, 256, 512]
    res = experiments.residual_refinement(sizes)
    show("minkowski residual", sizes, res["minkowski"])
    show("laplace_phi residual", sizes, res["laplace_phi"])
    h = experiments.h_evolution_refinement(sizes)
    show(f"H-evolution residual (dt/h^2 = {h['dt'][0] / (3.141592653589793 / sizes[0]) ** 2:.3f})",
         sizes, h["residual"])


if __name__ == "__main__":
    main(sys.argv[1:])
