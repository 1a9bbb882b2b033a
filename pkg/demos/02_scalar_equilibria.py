"""Scalar biased quantizers: closed forms, far-tail bins, infeasibility.

The 1-D game with encoder bias beta has quantized equilibria whose interior
boundaries sit at (u_i + u_{i+1})/2 + beta with every action the conditional
mean of its bin.  For uniform sources the bin lengths obey a simple linear
recursion; for gaussian sources every bin count is feasible but large biases
push the extra bins far into one tail.
"""

import math

import numpy as np

from cheaptalk import (
    InfeasibleBinCountError,
    iid_gaussian,
    iid_uniform,
    solve_scalar_biased,
)
from cheaptalk.sources import truncated_moments_1d

print("uniform[0,1], beta = 0.05 (bin lengths shrink by 4*beta):")
for k in (1, 2, 3):
    q = solve_scalar_biased(iid_uniform(1), 0.05, k)
    lengths = np.diff(q.boundaries)
    print(f"  K={k}: boundaries {np.round(q.boundaries, 6)} lengths {np.round(lengths, 4)}")
try:
    solve_scalar_biased(iid_uniform(1), 0.05, 4)
except InfeasibleBinCountError as exc:
    print(f"  K=4: infeasible ({exc})")

print("\nstandard gaussian, beta = 0 (classic two-level design):")
q = solve_scalar_biased(iid_gaussian(1), 0.0, 2)
print(f"  actions {np.round(q.actions, 6)}  expected: +-sqrt(2/pi) = {math.sqrt(2/math.pi):.6f}")
print(f"  distortion {q.distortion():.6f}  expected: 1 - 2/pi = {1 - 2/math.pi:.6f}")

print("\nstandard gaussian, beta = sqrt(2): feasible for every K, but the")
print("extra bins climb into the upper tail with vanishing mass:")
for k in (2, 3, 4):
    q = solve_scalar_biased(iid_gaussian(1), math.sqrt(2.0), k)
    mass = [truncated_moments_1d(q.model, q.boundaries[j], q.boundaries[j + 1])[0]
            for j in range(k)]
    print(f"  K={k}: boundaries {np.round(q.boundaries, 3)}")
    print(f"        bin masses {[f'{m:.2e}' for m in mass]}")
