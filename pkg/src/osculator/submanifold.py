"""Submanifolds of the 2-osculator bundle: prolonged embedding, moving frame,
induced nonlinear connection and the coframe restriction.

Symbolic quantities live in the submanifold chart variables
``u1..um, v1_1..v1_m, v2_1..v2_m``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import symbolic as sym
from .ambient import AmbientSpace, JetPoint, direct_coefficients, jet_transform
from .expr import ONE, ZERO, Evaluator, Expr, const, free_variables, sqrt, var

__all__ = [
    "Embedding",
    "SubmanifoldGeometry",
    "MovingFrame",
    "InducedNonlinearConnection",
    "RankDeficiencyError",
    "FrameBreakdownError",
    "prolong",
    "moving_frame",
    "induced_nonlinear",
    "restrict_coframe",
    "frame_delta",
    "prolongation_residual",
    "reparametrize",
    "pull_point",
]


class RankDeficiencyError(ValueError):
    pass


class FrameBreakdownError(ValueError):
    pass


def frame_delta(arr: np.ndarray, names: Sequence[str], N1, N2, block: int) -> np.ndarray:
    """Adapted-frame derivatives (block 0: horizontal, 1: first vertical,
    2: second vertical) of a symbolic array, for a chart with variable list
    ``names`` = base + first jet + second jet and direct coefficients N1, N2.
    Appends the derivative index last."""
    k = len(names) // 3
    d0 = sym.gradient(arr, names[:k])
    d1 = sym.gradient(arr, names[k : 2 * k])
    d2 = sym.gradient(arr, names[2 * k :])
    if block == 2:
        return d2
    if block == 1:
        return d1 - np.tensordot(d2, N1, axes=([-1], [0]))
    return d0 - np.tensordot(d1, N1, axes=([-1], [0])) - np.tensordot(d2, N2, axes=([-1], [0]))


class Embedding:
    """Parametric submanifold x^a(u^1..u^m) of an ambient space."""

    def __init__(self, space: AmbientSpace, coords: Sequence):
        x = sym.sym_array(coords)
        self.space = space
        self.n = space.n
        self.m = m = _sub_dim(x, space.n)
        if len(x) != space.n:
            raise ValueError(f"embedding has {len(x)} components, ambient dimension is {space.n}")
        if not 1 < m < space.n:
            raise ValueError(f"submanifold dimension must satisfy 1 < m < n (m={m}, n={space.n})")
        self.x = x
        names = sym.coord_names(m, "sub")
        self.names = names
        self.u_names = names[:m]
        self.v1_names = names[m : 2 * m]
        self.v2_names = names[2 * m :]
        self._geometries: dict = {}

    @cached_property
    def B(self) -> np.ndarray:
        return sym.gradient(self.x, self.u_names)

    @cached_property
    def B2(self) -> np.ndarray:
        return sym.gradient(self.B, self.u_names)

    @cached_property
    def B3(self) -> np.ndarray:
        return sym.gradient(self.B2, self.u_names)

    @cached_property
    def prolonged(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        v1 = [var(v) for v in self.v1_names]
        v2 = [var(v) for v in self.v2_names]
        y1 = sym.zeros(self.n)
        for a in range(self.n):
            for al in range(self.m):
                y1[a] = y1[a] + self.B[a, al] * v1[al]
        dy1_du = sym.gradient(y1, self.u_names)
        dy1_dv = sym.gradient(y1, self.v1_names)
        y2 = sym.zeros(self.n)
        for a in range(self.n):
            twice = ZERO
            for al in range(self.m):
                twice = twice + dy1_du[a, al] * v1[al] + const(2.0) * dy1_dv[a, al] * v2[al]
            y2[a] = const(0.5) * twice
        return self.x, y1, y2

    @cached_property
    def mapping(self) -> dict:
        x, y1, y2 = self.prolonged
        sp = self.space
        out = {}
        for a in range(self.n):
            out[sp.x_names[a]] = x[a]
            out[sp.y1_names[a]] = y1[a]
            out[sp.y2_names[a]] = y2[a]
        return out

    @cached_property
    def _memo(self) -> dict:
        return {}

    def restrict(self, arr: np.ndarray) -> np.ndarray:
        """Compose an ambient symbolic field with the prolonged embedding."""
        return sym.subs(arr, self.mapping, self._memo)

    @cached_property
    def jacobian(self) -> np.ndarray:
        """3n x 3m Jacobian of the prolonged embedding."""
        x, y1, y2 = self.prolonged
        return sym.gradient(np.concatenate([x, y1, y2]), self.names)

    def geometry(self, q: JetPoint, gauge: np.ndarray | None = None) -> "SubmanifoldGeometry":
        """Symbolic moving frame and everything built on it, with the normal
        seeding chosen at ``q`` (and frozen for every later point using the
        same seeding)."""
        pivots = self._choose_pivots(q)
        key = (pivots, None if gauge is None else tuple(np.round(np.asarray(gauge), 15).ravel()))
        geo = self._geometries.get(key)
        if geo is None:
            geo = SubmanifoldGeometry(self, pivots, gauge)
            self._geometries[key] = geo
        return geo

    def _choose_pivots(self, q: JetPoint) -> tuple[int, ...]:
        if q.chart != "sub" or q.dim != self.m:
            raise ValueError("expected a submanifold jet point of matching dimension")
        ev = Evaluator(q.env())
        B = ev.array(self.B)
        s = np.linalg.svd(B, compute_uv=False)
        if s[-1] <= 1e-10 * max(1.0, s[0]):
            raise RankDeficiencyError(f"rank of dx/du is below {self.m} at u={q.u.tolist()}")
        g = ev.array(self.restrict(self.space.g))
        basis = []
        for col in B.T:
            _gs_append(basis, col, g)
        pivots = []
        for _ in range(self.n - self.m):
            best, best_norm = None, -1.0
            for k in range(self.n):
                if k in pivots:
                    continue
                e = np.zeros(self.n)
                e[k] = 1.0
                r = e - sum((e @ g @ w) * w for w in basis)
                norm = float(r @ g @ r)
                if norm > best_norm + 1e-12:
                    best, best_norm = k, norm
            if best_norm <= 1e-10:
                raise FrameBreakdownError("no admissible normal direction (degenerate metric on complement)")
            pivots.append(best)
            e = np.zeros(self.n)
            e[best] = 1.0
            _gs_append(basis, e, g)
        return tuple(pivots)


def _sub_dim(x: np.ndarray, n: int) -> int:
    names = set()
    for e in x.ravel():
        names |= free_variables(e)
    bad = {v for v in names if not (v.startswith("u") and v[1:].isdigit())}
    if bad:
        raise ValueError(f"embedding may depend on u1..um only; found {sorted(bad)}")
    return max((int(v[1:]) for v in names), default=0)


def _gs_append(basis, v, g):
    r = v - sum((v @ g @ w) * w for w in basis)
    norm = float(r @ g @ r)
    if norm <= 1e-14:
        raise FrameBreakdownError("Gram-Schmidt breakdown")
    basis.append(r / np.sqrt(norm))


class SubmanifoldGeometry:
    """Symbolic moving frame, induced nonlinear connection and K-tensors for a
    fixed normal seeding (and optional constant orthogonal gauge)."""

    def __init__(self, emb: Embedding, pivots: tuple[int, ...], gauge=None):
        self.emb = emb
        self.space = emb.space
        self.n, self.m = emb.n, emb.m
        self.pivots = pivots
        self.gauge = None if gauge is None else np.asarray(gauge, dtype=float)
        self.names = emb.names

    # -- moving frame ------------------------------------------------------

    @cached_property
    def g(self) -> np.ndarray:
        return self.emb.restrict(self.space.g)

    @cached_property
    def normals(self) -> np.ndarray:
        """n x (n-m) normal frame, g-orthonormal and g-orthogonal to B."""
        g = self.g
        n = self.n

        def inner(a, b):
            total = ZERO
            for i in range(n):
                for j in range(n):
                    if a[i] is ZERO or b[j] is ZERO or g[i, j] is ZERO:
                        continue
                    total = total + a[i] * g[i, j] * b[j]
            return total

        basis = []

        def append(v):
            r = v.copy()
            for w in basis:
                c = inner(v, w)
                r = r - c * w
            nrm = sqrt(inner(r, r))
            w = np.empty(n, dtype=object)
            w[:] = [ri / nrm for ri in r]
            basis.append(w)
            return w

        for al in range(self.m):
            append(self.emb.B[:, al].copy())
        out = sym.zeros((n, n - self.m))
        for k, p in enumerate(self.pivots):
            e = sym.zeros(n)
            e[p] = ONE
            out[:, k] = append(e)
        if self.gauge is not None:
            out = out.dot(sym.sym_array(self.gauge.T))
        return out

    @cached_property
    def frame_matrix(self) -> np.ndarray:
        return np.concatenate([self.emb.B, self.normals], axis=1)

    @cached_property
    def duals(self) -> np.ndarray:
        """Rows 0..m-1: tangent covectors; rows m..n-1: normal covectors."""
        return sym.inverse(self.frame_matrix)

    @property
    def B(self):
        return self.emb.B

    @property
    def B_t(self):
        return self.duals[: self.m]

    @property
    def B_n(self):
        return self.duals[self.m :]

    # -- induced nonlinear connection -----------------------------------------

    @cached_property
    def M1a(self):
        return self.emb.restrict(self.space.M1)

    @cached_property
    def M2a(self):
        return self.emb.restrict(self.space.M2)

    @cached_property
    def B0(self) -> np.ndarray:
        v1 = np.array([var(v) for v in self.emb.v1_names], dtype=object)
        return np.tensordot(self.emb.B2, v1, axes=([1], [0]))  # B0[a, beta]

    @cached_property
    def _W1(self):
        return self.B0 + self.M1a.dot(self.B)

    @cached_property
    def _Q(self):
        emb = self.emb
        v1 = np.array([var(v) for v in emb.v1_names], dtype=object)
        v2 = np.array([var(v) for v in emb.v2_names], dtype=object)
        # B3[a, d, g, b] = d B2[a, d, g] / d u^b
        P = const(0.5) * np.einsum("adgb,d,g->ab", emb.B3, v1, v1)
        P = P + np.einsum("adb,d->ab", emb.B2, v2)
        return P + self.M1a.dot(self.B0) + self.M2a.dot(self.B)

    @cached_property
    def Ms1(self):
        return self.B_t.dot(self._W1)

    @cached_property
    def K1(self):
        return self.B_n.dot(self._W1)

    @cached_property
    def Ms2(self):
        return self.B_t.dot(self._Q)

    @cached_property
    def K2(self):
        return self.B_n.dot(self._Q) - self.K1.dot(self.Ms1)

    @cached_property
    def Ns1(self):
        return self.Ms1

    @cached_property
    def Ns2(self):
        return self.Ms2 - self.Ms1.dot(self.Ns1)

    def delta(self, arr: np.ndarray, block: int) -> np.ndarray:
        """Induced adapted-frame derivatives of a symbolic array."""
        return frame_delta(arr, self.names, self.Ns1, self.Ns2, block)


@dataclass
class MovingFrame:
    B: np.ndarray  # n x m tangent frame
    Bn: np.ndarray  # n x (n-m) normal frame
    B_t: np.ndarray  # m x n tangent covectors
    B_n: np.ndarray  # (n-m) x n normal covectors
    g: np.ndarray  # ambient metric at the prolonged point

    def residuals(self) -> dict[str, float]:
        B, Bn, Bt, Bnd, g = self.B, self.Bn, self.B_t, self.B_n, self.g
        m, k = B.shape[1], Bn.shape[1]
        n = B.shape[0]
        h = B.T @ g @ B
        return {
            "orthonormality": max(
                np.abs(B.T @ g @ Bn).max(), np.abs(Bn.T @ g @ Bn - np.eye(k)).max()
            ),
            "duality": max(
                np.abs(Bt @ B - np.eye(m)).max(),
                np.abs(Bnd @ B).max(),
                np.abs(Bt @ Bn).max(),
                np.abs(Bnd @ Bn - np.eye(k)).max(),
            ),
            "completeness": float(np.abs(B @ Bt + Bn @ Bnd - np.eye(n)).max()),
            "lowering": max(np.abs(h @ Bt - B.T @ g).max(), np.abs(Bnd - Bn.T @ g).max()),
        }


@dataclass
class InducedNonlinearConnection:
    M1: np.ndarray
    M2: np.ndarray
    N1: np.ndarray
    N2: np.ndarray
    K1: np.ndarray
    K2: np.ndarray


def prolong(emb: Embedding, q: JetPoint) -> JetPoint:
    ev = Evaluator(q.env())
    B = ev.array(emb.B)
    if np.linalg.matrix_rank(B, tol=1e-10) < emb.m:
        raise RankDeficiencyError(f"rank of dx/du is below {emb.m} at u={q.u.tolist()}")
    x, y1, y2 = emb.prolonged
    return JetPoint(ev.array(x), ev.array(y1), ev.array(y2), "ambient")


def moving_frame(emb: Embedding, q: JetPoint, gauge=None) -> MovingFrame:
    geo = emb.geometry(q, gauge)
    ev = Evaluator(q.env())
    return MovingFrame(
        ev.array(geo.B), ev.array(geo.normals), ev.array(geo.B_t), ev.array(geo.B_n), ev.array(geo.g)
    )


def induced_nonlinear(emb: Embedding, q: JetPoint, gauge=None) -> InducedNonlinearConnection:
    geo = emb.geometry(q, gauge)
    ev = Evaluator(q.env())
    M1 = ev.array(geo.Ms1)
    M2 = ev.array(geo.Ms2)
    N1, N2 = direct_coefficients(M1, M2)
    return InducedNonlinearConnection(M1, M2, N1, N2, ev.array(geo.K1), ev.array(geo.K2))


def restrict_coframe(
    emb: Embedding,
    q: JetPoint,
    induced: InducedNonlinearConnection | None = None,
    gauge=None,
) -> float:
    """Max deviation between the pulled-back ambient adapted cobasis and its
    representation in the moving frame, both in the natural cobasis of the
    submanifold chart.  Pass a modified ``induced`` to probe sensitivity."""
    geo = emb.geometry(q, gauge)
    ev = Evaluator(q.env())
    ind = induced if induced is not None else induced_nonlinear(emb, q, gauge)
    n, m = emb.n, emb.m
    M1a, M2a = ev.array(geo.M1a), ev.array(geo.M2a)
    I, Z = np.eye(n), np.zeros((n, n))
    amb_coframe = np.block([[I, Z, Z], [M1a, I, Z], [M2a, M1a, I]])
    pulled = amb_coframe @ ev.array(emb.jacobian)
    Is, Zs = np.eye(m), np.zeros((m, m))
    sub_coframe = np.block([[Is, Zs, Zs], [ind.M1, Is, Zs], [ind.M2, ind.M1, Is]])
    du, dv1, dv2 = sub_coframe[:m], sub_coframe[m : 2 * m], sub_coframe[2 * m :]
    B, Bn = ev.array(geo.B), ev.array(geo.normals)
    rhs = np.concatenate(
        [
            B @ du,
            B @ dv1 + Bn @ ind.K1 @ du,
            B @ dv2 + Bn @ ind.K1 @ dv1 + Bn @ ind.K2 @ du,
        ]
    )
    return float(np.abs(pulled - rhs).max())


def prolongation_residual(emb: Embedding, q: JetPoint) -> float:
    """Deviation from the structural identities of the prolonged map:
    dx/du = dy1/dv1 = dy2/dv2 and dy1/du = dy2/dv1."""
    ev = Evaluator(q.env())
    x, y1, y2 = emb.prolonged
    u, v1, v2 = emb.u_names, emb.v1_names, emb.v2_names
    g = lambda arr, names: ev.array(sym.gradient(arr, names))
    B = g(x, u)
    parts = [B - g(y1, v1), B - g(y2, v2), g(y1, u) - g(y2, v1)]
    return float(max(np.abs(p).max() for p in parts))


def reparametrize(emb: Embedding, old_in_new: Sequence) -> Embedding:
    """Same submanifold in a new chart; ``old_in_new[k]`` gives the old
    coordinate u_(k+1) as an expression in the new u1..um."""
    phi = sym.sym_array(old_in_new)
    if phi.shape != (emb.m,):
        raise ValueError(f"chart change needs {emb.m} expressions")
    mapping = {name: phi[k] for k, name in enumerate(emb.u_names)}
    return Embedding(emb.space, list(sym.subs(emb.x, mapping)))


def pull_point(old_in_new: Sequence, q: JetPoint, tol: float = 1e-14, maxiter: int = 50):
    """Jet point in the new chart that maps to ``q``, plus the Jacobian
    d(old u)/d(new u) there.  Newton iteration starts from the old values."""
    phi = sym.sym_array(old_in_new)
    m = q.dim
    names = sym.coord_names(m, "sub")[:m]
    J_sym = sym.gradient(phi, names)
    target = q.u
    w = target.copy()
    for _ in range(maxiter):
        ev = Evaluator(dict(zip(names, w)))
        step = np.linalg.solve(ev.array(J_sym), ev.array(phi) - target)
        w = w - step
        if np.abs(step).max() < tol:
            break
    else:
        raise ValueError("chart change inversion did not converge")
    ev = Evaluator(dict(zip(names, w)))
    J = ev.array(J_sym)
    H = ev.array(sym.gradient(J_sym, names))
    v1 = np.linalg.solve(J, q.v1)
    v2 = np.linalg.solve(J, q.v2 - 0.5 * np.einsum("abc,b,c->a", H, v1, v1))
    new = JetPoint(w, v1, v2, "sub")
    back = jet_transform(list(phi), new)
    if np.abs(back.coords - q.coords).max() > 1e-9 * max(1.0, np.abs(q.coords).max()):
        raise ValueError("chart change inversion is inconsistent")
    return new, J
