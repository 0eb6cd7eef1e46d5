"""
Curvature from commutators
==========================

The curvature and torsion families of the induced tangent connection are
read off the commutator of two covariant derivatives, which is affine in
the jet of the differentiated field.  An intrinsically flat surface gives
zero curvature even when the chart makes every coefficient nonzero.
"""

import numpy as np

from osculator.ambient import AmbientSpace, JetPoint
from osculator.connections import InducedConnections, deflections
from osculator.identities import (
    SHAPES,
    check_special_deflections,
    extract_coefficients,
    verify_deflection_identities,
    verify_ricci,
)
from osculator.scenario import bundled
from osculator.submanifold import Embedding

rng = np.random.default_rng(0)


def at(emb, u, v1, v2):
    q = JetPoint(u, v1, v2, "sub")
    return InducedConnections(emb.geometry(q)).at(q)


# Euclidean space in cylindrical coordinates, and a cone z = r inside it
polar = AmbientSpace([["1", "0", "0"], ["0", "x1^2", "0"], ["0", "0", "1"]])
cone = at(Embedding(polar, ["u1", "0.5*u2", "u1"]), [1.3, 0.4], [0.6, -0.9], [0.2, 0.5])
c = extract_coefficients(cone, 0, rng)
print("cone: largest tangent coefficient", np.abs(cone.tangent[0, 0]).max())
print("cone: largest horizontal curvature", np.abs(c["hh"].curvature).max())

# a curved example from the bundled scenarios
sc = bundled("sphere_block")
emb = sc.embedding_obj()
q = sc.jet_points()[0]
sp = InducedConnections(emb.geometry(q)).at(q)
c = extract_coefficients(sp, 0, rng)
print("\nsphere_block: largest horizontal curvature", np.abs(c["hh"].curvature).max())
for shape, r in verify_ricci(sp, c, rng, trials=50).items():
    print(f"  {shape:5s} fit {c[shape].residual:.1e}  fresh fields {r:.1e}  condition {c[shape].condition:.1f}")

# the Liouville d-vectors satisfy the same identities through their deflections
worst = max(verify_deflection_identities(sp, c).values())
print("deflection identities:", f"{worst:.1e}")

# the special deflection pattern fails here but holds on the plane z = 0
rep = check_special_deflections(sp, c, 1e-8, deflections(sp))
print("special pattern met on sphere_block:", rep.met)
plane = at(Embedding(polar, ["u1", "u2", "0"]), [1.3, 0.4], [0.6, -0.9], [0.2, 0.5])
rep = check_special_deflections(plane, extract_coefficients(plane, 0, rng), 1e-8)
print("special pattern met on the plane z = 0:", rep.met, " worst conclusion", max(rep.conclusions.values()))
