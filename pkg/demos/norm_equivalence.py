"""Show how the two extrapolation norms drift apart as modes are added.

The upper constant of ||G^-1 s||_Y <= C ||s||_Y(-1) settles, the lower one
decays like lambda_max^(-1/2), so the equivalence holds at every truncation
but not uniformly in it.

Run: python3 demos/norm_equivalence.py
"""
import math

import numpy as np

from mgtsim import BlockOperator, MgtParams, make_dirichlet_power_operator
from mgtsim.block_system import norm_equivalence_bounds, norm_equivalence_sample


def main():
    params = MgtParams(1.0, 2.0, 1.0, 1.0)
    print(f"{'n':>5} {'c':>10} {'C':>8} {'c*sqrt(lam_max)':>16} {'sample max/min':>15}")
    for n in (16, 64, 256, 1024):
        B = BlockOperator(make_dirichlet_power_operator(1, n), params)
        c, C = norm_equivalence_bounds(B)
        r = norm_equivalence_sample(B, np.random.default_rng(0), 1000)
        print(f"{n:5d} {c:10.3e} {C:8.4f} {c * math.sqrt(B.lambdas[-1]):16.4f} {r.max() / r.min():15.2f}")


if __name__ == "__main__":
    main()
