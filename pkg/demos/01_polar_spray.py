"""
Spray and nonlinear connection of the polar metric
==================================================

The flat plane in polar coordinates has nonzero Christoffel symbols, so the
canonical spray and its nonlinear connection are nonzero too.
"""

import numpy as np

from osculator.ambient import AmbientSpace, JetPoint, adapted_frame_pair, christoffel, jet_transform, spray_and_dual

np.set_printoptions(precision=4, suppress=True)

polar = AmbientSpace([["1", "0"], ["0", "x1^2"]])

# a jet point: position (r, theta), velocity, half acceleration
p = JetPoint([2.0, 0.0], [1.0, 1.0], [0.0, 0.0])

gamma = christoffel(polar, p).components
print("gamma^1_22 =", gamma[0, 1, 1], " gamma^2_12 =", gamma[1, 0, 1])

G, N = spray_and_dual(polar, p)
print("spray G =", G)
print("M1 =\n", N.M1)
print("M2 =\n", N.M2)

# adapted frame (columns) and coframe (rows) are dual
pair = adapted_frame_pair(N)
print("duality residual:", pair.duality_residual())

# jets move with the prolonged chart change: x1 -> x1^2
q = jet_transform(["x1^2", "x2"], JetPoint([2.0, 1.0], [1.0, 0.0], [3.0, 1.0]))
print("new velocity", q.y1, "new half acceleration", q.y2)
