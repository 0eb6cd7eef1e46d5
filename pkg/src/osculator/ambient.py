"""Geometry of the 2-osculator bundle of a manifold with a fundamental metric.

All coefficient fields are kept symbolic in the chart variables
``x1..xn, y1_1..y1_n, y2_1..y2_n``; the functions at the bottom of the module
evaluate them at a :class:`JetPoint`.

Index convention for connection coefficient arrays: ``coef[a, b, c]`` is the
coefficient with upper index ``a``, lower index ``b`` and derivative
direction ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np

from . import symbolic as sym
from .expr import ONE, ZERO, Evaluator, Expr, const, differentiate, free_variables, var
from .tensor import IndexSlot, MixedDTensor

__all__ = [
    "JetPoint",
    "AmbientSpace",
    "NonlinearConnection",
    "AdaptedFramePair",
    "NineCoefficients",
    "DegenerateMetricError",
    "christoffel",
    "spray_and_dual",
    "direct_coefficients",
    "adapted_frame_pair",
    "jet_transform",
    "canonical_connection",
    "covariant_derivative",
    "berwald_default",
]

BLOCK_NAMES = ("h", "v1", "v2")


class DegenerateMetricError(ValueError):
    pass


@dataclass(frozen=True)
class JetPoint:
    """A point of a 2-osculator bundle: base coordinates and the two jet blocks.

    ``chart`` is ``"ambient"`` (x, y1, y2) or ``"sub"`` (u, v1, v2).
    """

    base: tuple
    first: tuple
    second: tuple
    chart: str = "ambient"

    def __post_init__(self):
        for name in ("base", "first", "second"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not len(self.base) == len(self.first) == len(self.second):
            raise ValueError("jet blocks have different lengths")

    @property
    def dim(self) -> int:
        return len(self.base)

    x = u = property(lambda self: np.array(self.base))
    y1 = v1 = property(lambda self: np.array(self.first))
    y2 = v2 = property(lambda self: np.array(self.second))

    @property
    def coords(self) -> np.ndarray:
        return np.array(self.base + self.first + self.second)

    def env(self) -> dict[str, float]:
        return dict(zip(sym.coord_names(self.dim, self.chart), self.coords))

    @classmethod
    def from_coords(cls, coords: Sequence[float], chart: str = "ambient") -> "JetPoint":
        c = list(coords)
        k = len(c) // 3
        return cls(c[:k], c[k : 2 * k], c[2 * k :], chart)


# ---------------------------------------------------------------------------
# symbolic ambient space
# ---------------------------------------------------------------------------


def berwald_default(space: "AmbientSpace", j: int) -> np.ndarray:
    """Berwald-type ``B[a, b, c] = dN_(j)^a_b / dy_(j)^c`` (an assumption; the
    coefficients are otherwise unspecified)."""
    N = space.N1 if j == 1 else space.N2
    names = space.y1_names if j == 1 else space.y2_names
    return sym.gradient(N, names)


class AmbientSpace:
    """Fundamental metric g_ab(x, y1) on an n-manifold and everything the
    canonical constructions derive from it.

    The three blocks of the prolonged metric all equal ``g``.
    """

    def __init__(self, metric, det_tol: float = 1e-10):
        g = sym.sym_array(metric)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("metric must be a square array of expressions")
        n = g.shape[0]
        for a in range(n):
            for b in range(a + 1, n):
                if g[a, b] is not g[b, a]:
                    raise ValueError(f"metric is not symmetric: g[{a}][{b}] != g[{b}][{a}]")
        self.n = n
        self.g = g
        self.det_tol = det_tol
        names = sym.coord_names(n)
        self.x_names = names[:n]
        self.y1_names = names[n : 2 * n]
        self.y2_names = names[2 * n :]
        allowed = set(self.x_names) | set(self.y1_names)
        for e in g.ravel():
            extra = free_variables(e) - allowed
            if extra:
                raise ValueError(
                    f"metric may depend on x and y1 only; found {sorted(extra)}"
                )

    @property
    def coord_names(self) -> list[str]:
        return self.x_names + self.y1_names + self.y2_names

    @cached_property
    def ginv(self) -> np.ndarray:
        return sym.inverse(self.g)

    @cached_property
    def det(self) -> Expr:
        return sym.det(self.g)

    @cached_property
    def christoffel(self) -> np.ndarray:
        return _christoffel(self.g, self.ginv, lambda arr, c: sym.diff(arr, self.x_names[c]))

    @cached_property
    def spray(self) -> np.ndarray:
        n = self.n
        y = [var(v) for v in self.y1_names]
        gam = self.christoffel
        G = sym.zeros(n)
        for a in range(n):
            total = ZERO
            for b in range(n):
                for c in range(n):
                    if gam[a, b, c] is not ZERO:
                        total = total + gam[a, b, c] * y[b] * y[c]
            G[a] = const(0.5) * total
        return G

    @cached_property
    def M1(self) -> np.ndarray:
        return sym.gradient(self.spray, self.y1_names)

    @cached_property
    def M2(self) -> np.ndarray:
        M1 = self.M1
        gamma_M1 = sym.zeros(M1.shape)
        y1 = [var(v) for v in self.y1_names]
        y2 = [var(v) for v in self.y2_names]
        for c in range(self.n):
            gamma_M1 = gamma_M1 + y1[c] * sym.diff(M1, self.x_names[c])
            gamma_M1 = gamma_M1 + const(2.0) * y2[c] * sym.diff(M1, self.y1_names[c])
        return const(0.5) * (gamma_M1 + M1.dot(M1))

    @cached_property
    def N1(self) -> np.ndarray:
        return self.M1

    @cached_property
    def N2(self) -> np.ndarray:
        return self.M2 - self.M1.dot(self.N1)

    def delta(self, arr: np.ndarray, block: int) -> np.ndarray:
        """Adapted-frame derivatives of every entry; new last index."""
        n = self.n
        d_x = sym.gradient(arr, self.x_names)
        d_1 = sym.gradient(arr, self.y1_names)
        d_2 = sym.gradient(arr, self.y2_names)
        if block == 2:
            return d_2
        if block == 1:
            return d_1 - np.tensordot(d_2, self.N1, axes=([-1], [0]))
        return (
            d_x
            - np.tensordot(d_1, self.N1, axes=([-1], [0]))
            - np.tensordot(d_2, self.N2, axes=([-1], [0]))
        )

    def canonical(self, berwald: Callable | None = None) -> "NineCoefficients":
        """Symbolic canonical metrical N-linear connection."""
        if berwald is None:
            return self._canonical_default
        return self._canonical(berwald)

    @cached_property
    def _canonical_default(self) -> "NineCoefficients":
        return self._canonical(berwald_default)

    def _canonical(self, berwald: Callable) -> "NineCoefficients":
        g, gi = self.g, self.ginv
        dg = [self.delta(g, k) for k in range(3)]  # dg[k][b, d, c] = delta_kc g_bd
        fam = {}
        fam[0, 0] = _christoffel(g, gi, lambda arr, c: dg[0][..., c])
        for j in (1, 2):
            B = berwald(self, j)
            # B[a, b, c] plays the role of B_(jj)^a_cb
            inner = np.empty((self.n,) * 3, dtype=object)  # inner[d, b, c]
            for d in range(self.n):
                for b in range(self.n):
                    for c in range(self.n):
                        total = dg[0][b, d, c]
                        for f in range(self.n):
                            total = total - B[f, b, c] * g[f, d] - B[f, d, c] * g[b, f]
                        inner[d, b, c] = total
            fam[j, 0] = B + const(0.5) * np.tensordot(gi, inner, axes=([1], [0]))
        half_v = {k: const(0.5) * np.tensordot(gi, dg[k], axes=([1], [1])) for k in (1, 2)}
        # half_v[k][a, b, c] = 1/2 g^ad delta_kc g_bd
        for k in (0, 2):
            fam[k, 1] = half_v[1]
        for l in (0, 1):
            fam[l, 2] = half_v[2]
        for i in (1, 2):
            fam[i, i] = _christoffel(g, gi, lambda arr, c, i=i: dg[i][..., c])
        return NineCoefficients(fam, assumption_rows=frozenset({1, 2}))

    def evaluator(self, p: JetPoint) -> Evaluator:
        if p.dim != self.n:
            raise ValueError(f"point has dimension {p.dim}, space has {self.n}")
        ev = Evaluator(p.env())
        d = ev(self.det)
        if abs(d) <= self.det_tol:
            raise DegenerateMetricError(f"|det g| = {abs(d):.3g} at {p.coords.tolist()}")
        return ev

    def reparametrize(self, old_in_new: Sequence) -> "AmbientSpace":
        """The same metric in a new chart, given old coordinates as functions
        of the new ones (both named ``x1..xn``)."""
        psi = sym.sym_array(old_in_new)
        n = self.n
        J = sym.gradient(psi, self.x_names)  # J[c, a] = d x^c / d xnew^a
        y1 = [var(v) for v in self.y1_names]
        mapping = {}
        for c in range(n):
            mapping[self.x_names[c]] = psi[c]
            lin = ZERO
            for a in range(n):
                lin = lin + J[c, a] * y1[a]
            mapping[self.y1_names[c]] = lin
        g_old = sym.subs(self.g, mapping)
        g_new = np.einsum("ca,cd,db->ab", J, g_old, J)
        for a in range(n):
            for b in range(a):
                g_new[a, b] = g_new[b, a]
        return AmbientSpace(g_new, self.det_tol)


def _christoffel(g, gi, deriv) -> np.ndarray:
    """1/2 g^ad (D_b g_dc + D_c g_bd - D_d g_bc) with D given by ``deriv``."""
    n = g.shape[0]
    dg = np.stack([deriv(g, c) for c in range(n)], axis=-1)  # dg[b, d, c] = D_c g_bd
    low = np.empty((n, n, n), dtype=object)  # low[d, b, c]
    for d in range(n):
        for b in range(n):
            for c in range(n):
                low[d, b, c] = dg[d, c, b] + dg[b, d, c] - dg[b, c, d]
    return const(0.5) * np.tensordot(gi, low, axes=([1], [0]))


# ---------------------------------------------------------------------------
# numeric containers
# ---------------------------------------------------------------------------


@dataclass
class NonlinearConnection:
    M1: np.ndarray
    M2: np.ndarray
    N1: np.ndarray
    N2: np.ndarray


@dataclass
class AdaptedFramePair:
    """Columns of ``frame`` are the adapted basis vectors in the natural
    basis; rows of ``coframe`` are the adapted covectors."""

    frame: np.ndarray
    coframe: np.ndarray

    def duality_residual(self) -> float:
        k = self.frame.shape[0]
        return float(np.abs(self.coframe @ self.frame - np.eye(k)).max())


@dataclass
class NineCoefficients:
    """Connection coefficient families keyed by ``(i, k)``: ``k = 0`` is the
    horizontal family L_(i0), ``k = 1, 2`` the vertical families C_(ik).

    Entries are symbolic object arrays or, once evaluated, float arrays.
    ``assumption_rows`` lists the rows ``i`` whose values depend on the
    Berwald-type default.
    """

    families: dict
    assumption_rows: frozenset = field(default_factory=frozenset)

    def __getitem__(self, key):
        return self.families[key]

    def evaluate(self, ev: Evaluator) -> "NineCoefficients":
        return NineCoefficients(
            {k: ev.array(v) for k, v in self.families.items()}, self.assumption_rows
        )

    def map(self, fn) -> "NineCoefficients":
        return NineCoefficients({k: fn(v) for k, v in self.families.items()}, self.assumption_rows)


# ---------------------------------------------------------------------------
# pointwise operations
# ---------------------------------------------------------------------------


def _amb_slots(n, pattern, blocks=(None, None, None)):
    return tuple(IndexSlot("ambient", n, ch == "u", b) for ch, b in zip(pattern, blocks))


def christoffel(space: AmbientSpace, p: JetPoint) -> MixedDTensor:
    ev = space.evaluator(p)
    return MixedDTensor(_amb_slots(space.n, "udd"), ev.array(space.christoffel), tuple(p.coords))


def spray_and_dual(space: AmbientSpace, p: JetPoint):
    """Spray components and the nonlinear connection (dual and direct
    coefficients) at ``p``."""
    ev = space.evaluator(p)
    G = ev.array(space.spray)
    M1 = ev.array(space.M1)
    M2 = ev.array(space.M2)
    N1, N2 = direct_coefficients(M1, M2)
    return G, NonlinearConnection(M1, M2, N1, N2)


def direct_coefficients(M1, M2):
    """Direct coefficients making the adapted basis and cobasis dual."""
    M1 = np.asarray(M1, dtype=float)
    M2 = np.asarray(M2, dtype=float)
    N1 = M1.copy()
    N2 = M2 - M1 @ N1
    return N1, N2


def adapted_frame_pair(N: NonlinearConnection) -> AdaptedFramePair:
    n = N.N1.shape[0]
    I = np.eye(n)
    Z = np.zeros((n, n))
    frame = np.block([[I, Z, Z], [-N.N1, I, Z], [-N.N2, -N.N1, I]])
    coframe = np.block([[I, Z, Z], [N.M1, I, Z], [N.M2, N.M1, I]])
    return AdaptedFramePair(frame, coframe)


def jet_transform(phi: Sequence, p: JetPoint) -> JetPoint:
    """Image of ``p`` under the prolongation of the base map ``phi`` (new
    base coordinates as expressions in the old ones)."""
    names = sym.coord_names(p.dim, p.chart)[: p.dim]
    phi = sym.sym_array(phi)
    ev = Evaluator(p.env())
    J = ev.array(sym.gradient(phi, names))
    if abs(np.linalg.det(J)) < 1e-12:
        raise np.linalg.LinAlgError("singular jacobian of the coordinate change")
    H = ev.array(sym.gradient(sym.gradient(phi, names), names))
    y1, y2 = p.y1, p.y2
    ny1 = J @ y1
    ny2 = 0.5 * np.einsum("abc,b,c->a", H, y1, y1) + J @ y2
    return JetPoint(ev.array(phi), ny1, ny2, p.chart)


def canonical_connection(
    space: AmbientSpace, p: JetPoint, berwald: Callable | None = None
) -> NineCoefficients:
    return space.canonical(berwald).evaluate(space.evaluator(p))


def covariant_derivative(
    space: AmbientSpace,
    T: np.ndarray,
    variance: str,
    p: JetPoint,
    i: int,
    kind: int,
    connection: NineCoefficients | None = None,
) -> np.ndarray:
    """h_i- (kind 0), v1_i- (kind 1) or v2_i- (kind 2) covariant derivative of
    the symbolic field ``T`` at ``p``.

    ``variance`` spells the slots of ``T`` with ``"u"``/``"d"``; the result
    carries one extra trailing down slot.  Every slot is transported with the
    same family ``(i, kind)``.
    """
    T = sym.sym_array(T)
    if len(variance) != T.ndim:
        raise ValueError("variance string does not match tensor rank")
    conn = space.canonical() if connection is None else connection
    ev = space.evaluator(p)
    coef = ev.array(conn[i, kind])
    vals = ev.array(T)
    out = ev.array(space.delta(T, kind))
    return out + _connection_terms(vals, variance, coef)


def _connection_terms(vals: np.ndarray, variance: str, coef: np.ndarray) -> np.ndarray:
    """Sum of +coef per up slot and -coef per down slot (numeric)."""
    r = vals.ndim
    total = np.zeros(vals.shape + (coef.shape[2],))
    for s, ch in enumerate(variance):
        if ch == "u":
            # coef[a, c, d] T^{..c..}
            term = np.tensordot(coef, vals, axes=([1], [s]))  # (a, d, rest...)
            term = np.moveaxis(term, 0, s + 1)  # put a at slot s (after d)
            term = np.moveaxis(term, 0, r)  # move d to the end
        else:
            # -coef[c, b, d] T_{..c..}
            term = -np.tensordot(coef, vals, axes=([0], [s]))  # (b, d, rest...)
            term = np.moveaxis(term, 0, s + 1)
            term = np.moveaxis(term, 0, r)
        total = total + term
    return total
