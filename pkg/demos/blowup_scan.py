"""Continue solutions with a focusing cubic source and watch the blow-up time shrink with the data.

Run: python3 demos/blowup_scan.py
"""
import warnings

import numpy as np

from mgtsim import BlockOperator, MgtParams, make_dirichlet_power_operator
from mgtsim.mild_solver import SolverConfig, continue_solution
from mgtsim.nonlinearity import Nonlinearity, ScalarFn, scalar


def focusing_cubic():
    f = ScalarFn("focusing", lambda s: s**3, lambda s: 3 * s**2, dealias=2.0)
    zero = scalar("zero")
    return Nonlinearity(f, zero, zero, rho=3.0)


def main():
    warnings.simplefilter("ignore", RuntimeWarning)
    B = BlockOperator(make_dirichlet_power_operator(1, 16), MgtParams(1.0, 2.0, 1.0, 1.0))
    cfg = SolverConfig(T=0.5, dt=0.01, blowup_threshold=1e4, max_halvings=10)
    x0 = np.zeros((16, 3))
    x0[0, 0] = 1.0
    for amp in (1.0, 5.0, 10.0, 20.0, 40.0):
        tr = continue_solution(B, focusing_cubic(), amp * x0, cfg, horizon=20.0)
        if tr.blowup:
            print(f"amplitude {amp:5.1f}: norm passes 1e4 at t = {tr.blowup_time:.3f}")
        else:
            print(f"amplitude {amp:5.1f}: global on [0, 20], final Y^alpha norm {tr.norms['y_alpha_norm'][-1]:.2e}")


if __name__ == "__main__":
    main()
