"""
Moving frame on a cylinder
==========================

Prolong the embedding of a round cylinder, build its moving frame, and check
that the ambient adapted coframe splits along the frame.  A small error in
K1 shows up immediately in that split.
"""

import dataclasses

import numpy as np

from osculator.ambient import AmbientSpace, JetPoint
from osculator.submanifold import Embedding, induced_nonlinear, moving_frame, prolong, restrict_coframe

np.set_printoptions(precision=4, suppress=True)

euclid = AmbientSpace([["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]])
cyl = Embedding(euclid, ["cos(u1)", "sin(u1)", "u2"])

q = JetPoint([0.0, 0.0], [1.0, 1.0], [0.0, 0.0], "sub")
p = prolong(cyl, q)
print("x =", p.x, " y1 =", p.y1, " y2 =", p.y2)

mf = moving_frame(cyl, q)
print("tangent frame B =\n", mf.B)
print("unit normal =", mf.Bn[:, 0])
print("frame relations:", {k: f"{v:.1e}" for k, v in mf.residuals().items()})

# the ambient space is flat, so the induced M1 is the tangent part of B0 and
# K1 its normal part; along a circle of the cylinder B0 is radial
ind = induced_nonlinear(cyl, JetPoint([0.0, 0.0], [1.0, 0.0], [0.0, 0.0], "sub"))
print("M1 =\n", ind.M1, "\nK1 =", ind.K1)

q = JetPoint([0.3, 0.1], [1.0, 0.5], [0.2, -0.4], "sub")
print("coframe split residual:", restrict_coframe(cyl, q))
ind = induced_nonlinear(cyl, q)
bad = dataclasses.replace(ind, K1=ind.K1 + 1e-3)
print("with K1 off by 1e-3:   ", restrict_coframe(cyl, q, induced=bad))
