"""Connections induced on a submanifold: the coupling of the ambient canonical
connection, the tangent and normal connections, the relative covariant
derivative, Liouville d-vectors and deflection tensors.

Coefficient arrays follow one layout everywhere: ``coef[a, b, c]`` is the
family with upper index ``a``, lower index ``b`` and derivative index ``c``.
A family is keyed ``(i, k)``: ``i`` is the row (0, 1, 2) and ``k`` the
derivative kind (0 horizontal, 1 first vertical, 2 second vertical).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import symbolic as sym
from .ambient import AmbientSpace, JetPoint, canonical_connection, direct_coefficients
from .expr import Evaluator, const, var
from .submanifold import Embedding, SubmanifoldGeometry, restrict_coframe

__all__ = [
    "FAMILIES",
    "BERWALD_FLAG",
    "InducedConnections",
    "SubPoint",
    "DeflectionSet",
    "coupling",
    "tangent_connection",
    "normal_connection",
    "relative_nabla",
    "liouville_fields",
    "deflections",
    "deflections_closed_form",
    "random_jet",
    "coupling_residual",
    "gauss_residual",
    "weingarten_residual",
]

FAMILIES = tuple((i, k) for i in range(3) for k in range(3))
BERWALD_FLAG = "assumption: Berwald default"


def _contract_last(coef: np.ndarray, E: np.ndarray) -> np.ndarray:
    """coef[a, b, d] E[d, delta] summed over d."""
    return np.tensordot(coef, E, axes=([2], [0]))


class InducedConnections:
    """Symbolic coupling, tangent and normal coefficients for one
    submanifold geometry (fixed normal seeding/gauge)."""

    def __init__(self, geo: SubmanifoldGeometry, berwald: Callable | None = None):
        self.geo = geo
        self.emb = geo.emb
        self.space = geo.space
        self.berwald = berwald
        self.m, self.n = geo.m, geo.n

    @cached_property
    def ambient(self) -> dict:
        """Ambient canonical families composed with the prolonged embedding."""
        conn = self.space.canonical(self.berwald)
        return {key: self.emb.restrict(conn[key]) for key in FAMILIES}

    @cached_property
    def _E(self):
        # representation of dx, delta y1, delta y2 on the submanifold:
        # dx = B du, delta y1 = B dv1 + BnK1 du, delta y2 = B dv2 + BnK1 dv1 + BnK2 du
        g = self.geo
        return g.B, g.normals.dot(g.K1), g.normals.dot(g.K2)

    @cached_property
    def coupling(self) -> dict:
        B, E1, E2 = self._E
        A = self.ambient
        out = {}
        for i in range(3):
            out[i, 0] = _contract_last(A[i, 0], B) + _contract_last(A[i, 1], E1) + _contract_last(A[i, 2], E2)
            out[i, 1] = _contract_last(A[i, 1], B) + _contract_last(A[i, 2], E1)
            out[i, 2] = _contract_last(A[i, 2], B)
        return out

    @cached_property
    def tangent(self) -> dict:
        g = self.geo
        Bt, B = g.B_t, g.B
        out = {}
        for (i, k), Lc in self.coupling.items():
            inner = np.einsum("dfc,fb->dbc", Lc, B)
            if k == 0:
                inner = inner + self.emb.B2
            out[i, k] = np.tensordot(Bt, inner, axes=([1], [0]))
        return out

    def _normal(self, printed: bool) -> dict:
        g = self.geo
        Bnd, Bn = g.B_n, g.normals
        dframe = {k: g.delta(Bn, k) for k in range(3)}
        zero_t = sym.zeros(Bn.shape + (self.m,))
        out = {}
        for (i, k), Lc in self.coupling.items():
            inner = np.einsum("dfc,fb->dbc", Lc, Bn)
            # the printed rule differentiates the tangent frame for k = 1, 2
            inner = inner + (zero_t if printed and k > 0 else dframe[k])
            out[i, k] = np.tensordot(Bnd, inner, axes=([1], [0]))
        return out

    @cached_property
    def normal(self) -> dict:
        return self._normal(printed=False)

    @cached_property
    def normal_printed(self) -> dict:
        return self._normal(printed=True)

    @cached_property
    def tangent_gradients(self) -> dict:
        names = self.geo.names
        return {key: sym.gradient(arr, names) for key, arr in self.tangent.items()}

    @cached_property
    def liouville(self):
        v1 = np.array([var(v) for v in self.emb.v1_names], dtype=object)
        v2 = np.array([var(v) for v in self.emb.v2_names], dtype=object)
        z2 = v2 + const(0.5) * self.geo.Ms1.dot(v1)
        return v1, z2

    @cached_property
    def liouville_jets(self):
        names = self.geo.names
        out = []
        for z in self.liouville:
            d = sym.gradient(z, names)
            out.append((z, d, sym.gradient(d, names)))
        return out

    def at(self, q: JetPoint) -> "SubPoint":
        return SubPoint(self, q)


class SubPoint:
    """Numeric values of the induced geometry at one submanifold jet point."""

    def __init__(self, conns: InducedConnections, q: JetPoint):
        self.conns = conns
        self.geo = conns.geo
        self.q = q
        self.m, self.n = conns.m, conns.n
        self.ev = Evaluator(q.env())

    def _num(self, arr):
        return self.ev.array(arr)

    def _family(self, d: dict) -> dict:
        return {key: self._num(arr) for key, arr in d.items()}

    @cached_property
    def N1(self):
        return self._num(self.geo.Ns1)

    @cached_property
    def N2(self):
        return self._num(self.geo.Ns2)

    @cached_property
    def M1(self):
        return self._num(self.geo.Ms1)

    @cached_property
    def M2(self):
        return self._num(self.geo.Ms2)

    @cached_property
    def K1(self):
        return self._num(self.geo.K1)

    @cached_property
    def K2(self):
        return self._num(self.geo.K2)

    @cached_property
    def B(self):
        return self._num(self.geo.B)

    @cached_property
    def Bn(self):
        return self._num(self.geo.normals)

    @cached_property
    def B_t(self):
        return self._num(self.geo.B_t)

    @cached_property
    def B_n(self):
        return self._num(self.geo.B_n)

    @cached_property
    def dB(self):
        """Natural partials of the tangent frame, dB[a, beta, J]."""
        return self._num(sym.gradient(self.geo.B, self.geo.names))

    @cached_property
    def dBn(self):
        return self._num(sym.gradient(self.geo.normals, self.geo.names))

    @cached_property
    def frame(self) -> np.ndarray:
        """3m x 3m; column A is the induced adapted frame vector A in the
        natural basis (d/du, d/dv1, d/dv2)."""
        return _frame(self.N1, self.N2)

    @cached_property
    def coframe(self) -> np.ndarray:
        m = self.m
        I, Z = np.eye(m), np.zeros((m, m))
        return np.block([[I, Z, Z], [self.M1, I, Z], [self.M2, self.M1, I]])

    @cached_property
    def dN(self):
        names = self.geo.names
        return (
            self._num(sym.gradient(self.geo.Ns1, names)),
            self._num(sym.gradient(self.geo.Ns2, names)),
        )

    @cached_property
    def dframe(self) -> np.ndarray:
        """dframe[I, A, J] = d frame[I, A] / d w^J."""
        m = self.m
        dN1, dN2 = self.dN
        out = np.zeros((3 * m, 3 * m, 3 * m))
        out[m : 2 * m, :m] = -dN1
        out[2 * m :, :m] = -dN2
        out[2 * m :, m : 2 * m] = -dN1
        return out

    def frame_block(self, k: int) -> np.ndarray:
        m = self.m
        return self.frame[:, k * m : (k + 1) * m]

    def dframe_block(self, k: int) -> np.ndarray:
        m = self.m
        return self.dframe[:, k * m : (k + 1) * m]

    @cached_property
    def ambient_at_point(self) -> dict:
        """Ambient canonical families evaluated at the prolonged point
        directly in ambient variables (independent of the composition)."""
        sp = self.conns.space
        x, y1, y2 = self.geo.emb.prolonged
        p = JetPoint(self._num(x), self._num(y1), self._num(y2), "ambient")
        return canonical_connection(sp, p, self.conns.berwald).families

    @cached_property
    def pulled_coframe(self) -> np.ndarray:
        """Ambient adapted coframe pulled back by the prolonged embedding,
        3n x 3m in the natural cobasis of the submanifold chart."""
        geo = self.geo
        n = self.n
        M1a, M2a = self._num(geo.M1a), self._num(geo.M2a)
        I, Z = np.eye(n), np.zeros((n, n))
        C = np.block([[I, Z, Z], [M1a, I, Z], [M2a, M1a, I]])
        return C @ self._num(geo.emb.jacobian)

    @cached_property
    def coupling(self) -> dict:
        return self._family(self.conns.coupling)

    @cached_property
    def tangent(self) -> dict:
        return self._family(self.conns.tangent)

    @cached_property
    def normal(self) -> dict:
        return self._family(self.conns.normal)

    @cached_property
    def normal_printed(self) -> dict:
        return self._family(self.conns.normal_printed)

    @cached_property
    def dtangent(self) -> dict:
        return self._family(self.conns.tangent_gradients)

    @cached_property
    def liouville(self):
        return tuple(self._num(z) for z in self.conns.liouville)

    @cached_property
    def liouville_jets(self):
        return [tuple(self._num(a) for a in jet) for jet in self.conns.liouville_jets]

    def coframe_residual(self) -> float:
        return restrict_coframe(self.geo.emb, self.q, gauge=self.geo.gauge)


def _frame(N1, N2) -> np.ndarray:
    m = N1.shape[0]
    I, Z = np.eye(m), np.zeros((m, m))
    return np.block([[I, Z, Z], [-N1, I, Z], [-N2, -N1, I]])


# -- public operations -------------------------------------------------------


def coupling(sp: SubPoint) -> dict:
    return sp.coupling


def tangent_connection(sp: SubPoint) -> dict:
    return sp.tangent


def normal_connection(sp: SubPoint, printed: bool = False) -> dict:
    """Normal connection families.  ``printed=True`` differentiates the
    tangent frame in the vertical rows (their v-derivatives vanish), the
    default differentiates the normal frame."""
    return sp.normal_printed if printed else sp.normal


def relative_nabla(
    sp: SubPoint,
    value: np.ndarray,
    grad: np.ndarray,
    slots: str,
    i: int,
    k: int,
) -> np.ndarray:
    """Relative covariant derivative of a mixed d-tensor at the point.

    ``value`` holds the components and ``grad`` their natural partials
    (trailing axis of length 3m).  ``slots`` spells each index: ``A``/``a``
    ambient up/down, ``T``/``t`` tangent, ``N``/``n`` normal.  The result gets
    a trailing index along the frame block ``k``.
    """
    value = np.asarray(value, dtype=float)
    if len(slots) != value.ndim:
        raise ValueError("slot string does not match tensor rank")
    out = np.tensordot(grad, sp.frame_block(k), axes=([-1], [0]))
    coefs = {"a": sp.coupling[i, k], "t": sp.tangent[i, k], "n": sp.normal[i, k]}
    for s, ch in enumerate(slots):
        coef = coefs[ch.lower()]
        if ch.isupper():
            term = np.tensordot(coef, value, axes=([1], [s]))
            term = np.moveaxis(term, 0, s + 1)
        else:
            term = -np.tensordot(coef, value, axes=([0], [s]))
            term = np.moveaxis(term, 0, s + 1)
        out = out + np.moveaxis(term, 0, value.ndim)
    return out


def liouville_fields(ind, q: JetPoint):
    """(z1, z2) with z1 = v1 and z2 = v2 + M1 v1 / 2, for any ``ind`` carrying
    the induced dual coefficients ``M1`` at ``q``."""
    v1, v2 = q.v1, q.v2
    return v1, v2 + 0.5 * np.asarray(ind.M1, dtype=float) @ v1


@dataclass
class DeflectionSet:
    """Deflections keyed ``(name, i)`` with name in D1, d11, d12, D2, d21, d22."""

    values: dict
    assumptions: dict = field(default_factory=dict)

    NAMES = ("D1", "d11", "d12", "D2", "d21", "d22")

    def __getitem__(self, key):
        return self.values[key]

    def max_diff(self, other: "DeflectionSet", names=None, rows=(0, 1, 2)) -> float:
        names = self.NAMES if names is None else names
        return max(float(np.abs(self[nm, i] - other[nm, i]).max()) for nm in names for i in rows)

    def matches_special_form(self, tol: float, i: int) -> float:
        """Max deviation from the pattern D=0, d11=I, d12=0, D2=0, d21=0, d22=I."""
        m = self.values["D1", i].shape[0]
        I, Z = np.eye(m), np.zeros((m, m))
        target = {"D1": Z, "d11": I, "d12": Z, "D2": Z, "d21": Z, "d22": I}
        return max(float(np.abs(self[nm, i] - target[nm]).max()) for nm in self.NAMES)


def deflections(sp: SubPoint) -> DeflectionSet:
    """Covariant derivatives of the Liouville d-vectors, computed from their
    own frame derivatives."""
    out = {}
    for j, (z, dz, _) in enumerate(sp.liouville_jets, start=1):
        for i in range(3):
            for k in range(3):
                val = relative_nabla(sp, z, dz, "T", i, k)
                name = f"D{j}" if k == 0 else f"d{j}{k}"
                out[name, i] = val
    flags = {(nm, i): [BERWALD_FLAG] if i > 0 and nm.startswith("D") else [] for (nm, i) in out}
    return DeflectionSet(out, flags)


def deflections_closed_form(sp: SubPoint) -> DeflectionSet:
    """Closed forms of the deflections in terms of the induced nonlinear
    connection and the tangent coefficients.  The z2 rows use the vertical
    derivative of N1 in place of the unspecified B-symbols."""
    z1, z2 = sp.liouville
    m = sp.m
    I = np.eye(m)
    dN1 = sp.dN[0]
    # frame derivatives of N1[alpha, gamma] along delta_beta and delta_1beta
    dlt = np.tensordot(dN1, sp.frame, axes=([-1], [0]))
    d0N1, d1N1 = dlt[..., :m], dlt[..., m : 2 * m]
    out, flags = {}, {}
    for i in range(3):
        L, C1, C2 = (sp.tangent[i, k] for k in range(3))
        out["D1", i] = -sp.N1 + np.einsum("g,agb->ab", z1, L)
        out["d11", i] = I + np.einsum("g,agb->ab", z1, C1)
        out["d12", i] = np.einsum("g,agb->ab", z1, C2)
        out["D2", i] = (
            -0.5 * (sp.N2 + sp.M2)
            + 0.5 * np.einsum("g,agb->ab", z1, d0N1)
            + np.einsum("g,agb->ab", z2, L)
        )
        out["d21", i] = (
            -0.5 * sp.N1 + 0.5 * np.einsum("g,agb->ab", z1, d1N1) + np.einsum("g,agb->ab", z2, C1)
        )
        out["d22", i] = I + np.einsum("g,agb->ab", z2, C2)
        for nm in DeflectionSet.NAMES:
            f = []
            if nm in ("D2", "d21", "d22"):
                f.append(BERWALD_FLAG)
            elif i > 0 and nm == "D1":
                f.append(BERWALD_FLAG)
            flags[nm, i] = f
    return DeflectionSet(out, flags)


# -- property checks with random fields -------------------------------------


def random_jet(rng: np.random.Generator, shape: Sequence[int], nvars: int, degree: int = 2):
    """Value, gradient and Hessian at the point of a random polynomial field
    of the given degree (the jet determines every derivative used here)."""
    shape = tuple(shape)
    val = rng.normal(size=shape)
    grad = rng.normal(size=shape + (nvars,)) if degree >= 1 else np.zeros(shape + (nvars,))
    if degree >= 2:
        h = rng.normal(size=shape + (nvars, nvars))
        hess = 0.5 * (h + np.swapaxes(h, -1, -2))
    else:
        hess = np.zeros(shape + (nvars, nvars))
    return val, grad, hess


def coupling_residual(sp: SubPoint, rng: np.random.Generator, trials: int = 50) -> dict[int, float]:
    """Per row i: max deviation between the coupling derivative of a random
    ambient-index field and the ambient derivative pulled back to the
    submanifold, both as 1-forms in the natural cobasis."""
    n, m = sp.n, sp.m
    amb = sp.ambient_at_point
    pulled = sp.pulled_coframe
    res = {}
    for i in range(3):
        # pulled-back connection 1-forms omega[a, b, J]
        omega = sum(amb[i, k] @ pulled[k * n : (k + 1) * n] for k in range(3))
        worst = 0.0
        for _ in range(trials):
            X, dX, _ = random_jet(rng, (n,), 3 * m, 1)
            comps = [relative_nabla(sp, X, dX, "A", i, k) for k in range(3)]
            lhs = np.concatenate(comps, axis=1) @ sp.coframe
            rhs = dX + np.einsum("b,abJ->aJ", X, omega)
            worst = max(worst, float(np.abs(lhs - rhs).max()))
        res[i] = worst
    return res


def gauss_residual(sp: SubPoint, rng: np.random.Generator, trials: int = 50) -> dict[int, float]:
    """Tangent derivative of X^alpha versus the projected coupling derivative
    of B X, per row i (all three derivative kinds)."""
    m = sp.m
    res = {}
    for i in range(3):
        worst = 0.0
        for _ in range(trials):
            X, dX, _ = random_jet(rng, (m,), 3 * m, 1)
            Xa = sp.B @ X
            dXa = np.einsum("agJ,g->aJ", sp.dB, X) + sp.B @ dX
            for k in range(3):
                lhs = relative_nabla(sp, X, dX, "T", i, k)
                rhs = sp.B_t @ relative_nabla(sp, Xa, dXa, "A", i, k)
                worst = max(worst, float(np.abs(lhs - rhs).max()))
        res[i] = worst
    return res


def weingarten_residual(
    sp: SubPoint, rng: np.random.Generator, trials: int = 50, printed: bool = False
) -> dict[int, float]:
    """Normal derivative of X^abar versus the projected coupling derivative
    of Bn X, per row i.  ``printed`` swaps in the vertical rows that
    differentiate the tangent frame."""
    m, k_dim = sp.m, sp.n - sp.m
    res = {}
    normal = sp.normal_printed if printed else sp.normal
    for i in range(3):
        worst = 0.0
        for _ in range(trials):
            X, dX, _ = random_jet(rng, (k_dim,), 3 * m, 1)
            Xa = sp.Bn @ X
            dXa = np.einsum("agJ,g->aJ", sp.dBn, X) + sp.Bn @ dX
            for k in range(3):
                lhs = np.tensordot(dX, sp.frame_block(k), axes=([-1], [0])) + np.einsum(
                    "b,abc->ac", X, normal[i, k]
                )
                rhs = sp.B_n @ relative_nabla(sp, Xa, dXa, "A", i, k)
                worst = max(worst, float(np.abs(lhs - rhs).max()))
        res[i] = worst
    return res
