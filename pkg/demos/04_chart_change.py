"""
Tensors and non-tensors under a chart change
============================================

Deflections and curvature families move by Jacobians when the submanifold
is reparametrized.  Christoffel symbols do not.
"""

import numpy as np

from osculator.ambient import AmbientSpace, JetPoint, christoffel, jet_transform
from osculator.connections import InducedConnections, deflections
from osculator.identities import extract_coefficients
from osculator.scenario import bundled
from osculator.submanifold import pull_point, reparametrize
from osculator.symbolic import gradient, sym_array
from osculator.tensor import transform

sc = bundled("sphere_block")
emb = sc.embedding_obj()
new = reparametrize(emb, sc.chart_change)
print("old u in terms of new u:", ", ".join(str(e) for e in sc.chart_change))

q = sc.jet_points()[1]
q2, J = pull_point(sc.chart_change, q)
Ji = np.linalg.inv(J)
sp = InducedConnections(emb.geometry(q)).at(q)
sp2 = InducedConnections(new.geometry(q2)).at(q2)

d1, d2 = deflections(sp), deflections(sp2)
gap = max(np.abs(Ji @ d1[nm, 0] @ J - d2[nm, 0]).max() for nm in d1.NAMES)
print("deflections, mapped vs recomputed:", f"{gap:.1e}")

R1 = extract_coefficients(sp, 0, np.random.default_rng(1))["hh"].curvature
R2 = extract_coefficients(sp2, 0, np.random.default_rng(2))["hh"].curvature
mapped = np.einsum("Dd,aA,Bb,Cc,DABC->dabc", J, Ji, J, J, R1)
print("curvature, mapped vs recomputed:  ", f"{np.abs(mapped - R2).max():.1e}")

# the ambient Christoffel symbols under a quadratic chart change
polar = AmbientSpace([["1", "0", "0"], ["0", "x1^2", "0"], ["0", "0", "1"]])
old_in_new = ["x1 + 0.3*x2^2", "x2 + 0.2*x1*x3", "x3 - 0.25*x1^2"]
polar2 = polar.reparametrize(old_in_new)
p2 = JetPoint([1.2, 0.4, -0.3], [0.5, 1.0, -0.2], [0.1, 0.0, 0.3])
p1 = jet_transform(old_in_new, p2)
Jx = polar2.evaluator(p2).array(gradient(sym_array(old_in_new), polar2.x_names))
Jxi = np.linalg.inv(Jx)
as_tensor = transform(christoffel(polar, p1), [Jxi, Jxi, Jxi]).components
print("Christoffel, tensor rule vs recomputed:", f"{np.abs(as_tensor - christoffel(polar2, p2).components).max():.2f}")
