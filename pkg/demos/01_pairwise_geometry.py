"""Geometry of competing decoder actions.

Two decoder actions split the source space along a hyperplane where the
biased encoder is indifferent.  The pair can only coexist at equilibrium
when the actions are far enough apart relative to the bias direction; this
script walks through the pieces on a small 2-D example.
"""

import numpy as np

from cheaptalk import (
    assign_action,
    encoder_cost,
    geo_slack,
    h_value,
    indifference_hyperplane,
    lambda_bar,
)

b = np.array([0.5, 0.0])
u1 = np.array([0.0, 0.0])
u2 = np.array([2.0, 0.0])

print("bias:", b, " actions:", u1, u2)

plane = indifference_hyperplane(u1, u2, b)
print("\nindifference plane: normal", plane.normal, "anchor", plane.anchor)
for m in ([1.5, 0.0], [0.0, 0.0], [2.0, 0.0]):
    h = h_value(m, u1, u2, b)
    side = "indifferent" if h == 0 else ("prefers u1" if h > 0 else "prefers u2")
    print(f"  m={m}: h={h:+.2f} -> {side}  (costs {encoder_cost(m, u1, b):.2f} / {encoder_cost(m, u2, b):.2f})")

print("\npairwise separation slack (nonnegative = the pair can coexist):")
for ua, ub in ([u1, u2], [u1, [1.0, 0.0]], [u1, [0.0, 2.0]]):
    s = geo_slack(ua, ub, b)
    lam = lambda_bar(ua, ub, b)
    print(f"  {np.asarray(ua)} vs {np.asarray(ub)}: slack={s:+.2f}, crossing at lambda={lam:.2f}")
print("  (actions orthogonal to the bias pass at any distance; along the bias")
print("   they need separation at least twice the bias component)")

print("\nbin assignment is the cheapest-action rule; ties break to the lowest index:")
for m in ([1.5, 0.0], [1.6, 0.0], [-1.0, 3.0]):
    print(f"  m={m} -> action index {assign_action(m, [u1, u2], b)}")
