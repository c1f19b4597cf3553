"""Sweep gamma across the stability threshold and compare the margin with the measured decay.

Run: python3 demos/stability_sweep.py
"""
import numpy as np

from mgtsim import BlockOperator, MgtParams, make_dirichlet_power_operator
from mgtsim.block_system import stability_condition
from mgtsim.semigroup import decay_rate


def main():
    op = make_dirichlet_power_operator(1, 16)
    print(f"{'gamma':>6} {'chi':>8} {'omega':>10} {'abscissa':>10}  verdict")
    for gamma in np.linspace(0.5, 6.0, 12):
        params = MgtParams(1.0, 2.0, gamma, 1.0)
        stable, chi = stability_condition(params, op.lambda0)
        fit = decay_rate(BlockOperator(op, params), 50.0)
        print(f"{gamma:6.2f} {chi:8.3f} {fit.omega:10.4f} {fit.abscissa:10.4f}  {'stable' if stable else 'unstable'}")


if __name__ == "__main__":
    main()
