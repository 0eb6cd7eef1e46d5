"""Ricci identities of the induced tangent connection, deflection identities
and the conditional relations under the special deflection pattern.

Curvature and torsion families are defined operationally: the commutator of
two relative covariant derivatives of a d-vector field X is fitted as an
affine function of the jet (X, X|, X(1)|, X(2)|), and the fitted
coefficients are the families.  The fit is then tested on fresh random
fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .connections import BERWALD_FLAG, DeflectionSet, SubPoint, deflections, random_jet

__all__ = [
    "SHAPES",
    "CommutatorJet",
    "RicciCoefficients",
    "IllConditionedProbeError",
    "first_covariant",
    "second_covariant",
    "commutator_probe",
    "extract_coefficients",
    "verify_ricci",
    "verify_deflection_identities",
    "check_special_deflections",
    "special_conclusions",
    "known_torsion_residuals",
    "antisymmetry_residual",
    "assumption_flags",
]

# shape -> (first derivative kind, second derivative kind, jet terms on the right)
SHAPES = {
    "hh": (0, 0, (0, 1, 2)),
    "hv1": (0, 1, (0, 1, 2)),
    "hv2": (0, 2, (0, 1, 2)),
    "v1v2": (1, 2, (1, 2)),
    "v1v1": (1, 1, (1, 2)),
    "v2v2": (2, 2, (1, 2)),
}

# report labels: curvature family and one torsion label per jet term
LABELS = {
    "hh": ("R(0i)", {0: "T(0)(i)", 1: "R(01)", 2: "R(02)"}),
    "hv1": ("P(1i)", {0: "C(i1)", 1: "P(11)(i)", 2: "P(12)"}),
    "hv2": ("P(2i)", {0: "C(i2)", 1: "P(21)", 2: "P(22)(i)"}),
    "v1v2": ("Q(21)|Q(2i)", {1: "C(i2)", 2: "Q(22)(i)"}),
    "v1v1": ("S(1i)", {1: "S(1)(i)", 2: "R(12)"}),
    "v2v2": ("S(2i)", {1: "S(2)(i)", 2: "R(22)"}),
}

# torsion slots whose value the identities name explicitly: (shape, term) -> tangent family kind
KNOWN_TORSION = {("hv1", 0): 1, ("hv2", 0): 2, ("v1v2", 1): 2}

COND_LIMIT = 1e8


class IllConditionedProbeError(ValueError):
    pass


def first_covariant(sp: SubPoint, jet, i: int, k: int) -> np.ndarray:
    """Y[alpha, beta] = X^alpha covariantly differentiated along frame block k."""
    x0, dX = jet[0], jet[1]
    return dX @ sp.frame_block(k) + np.einsum("g,agb->ab", x0, sp.tangent[i, k])


def second_covariant(sp: SubPoint, jet, i: int, k: int, l: int) -> np.ndarray:
    """W[alpha, beta, gamma]: derivative of kind k (slot beta) followed by a
    derivative of kind l (slot gamma), both with row i."""
    x0, dX, ddX = jet
    Fk, dFk = sp.frame_block(k), sp.dframe_block(k)
    Gk, dGk = sp.tangent[i, k], sp.dtangent[i, k]
    Y = dX @ Fk + np.einsum("g,agb->ab", x0, Gk)
    dY = (
        np.einsum("aIJ,Ib->abJ", ddX, Fk)
        + np.einsum("aI,IbJ->abJ", dX, dFk)
        + np.einsum("gJ,agb->abJ", dX, Gk)
        + np.einsum("g,agbJ->abJ", x0, dGk)
    )
    Gl = sp.tangent[i, l]
    return (
        np.tensordot(dY, sp.frame_block(l), axes=([2], [0]))
        + np.einsum("sb,asc->abc", Y, Gl)
        - np.einsum("as,sbc->abc", Y, Gl)
    )


@dataclass
class CommutatorJet:
    shape: str
    i: int
    lhs: np.ndarray  # [alpha, beta, gamma]
    value: np.ndarray
    derivatives: dict  # term kind -> first covariant derivative [alpha, sigma]


def commutator_probe(sp: SubPoint, jet, shape: str, i: int) -> CommutatorJet:
    k, l, terms = SHAPES[shape]
    lhs = second_covariant(sp, jet, i, k, l)
    lhs = lhs - np.swapaxes(second_covariant(sp, jet, i, l, k), 1, 2)
    ders = {t: first_covariant(sp, jet, i, t) for t in terms}
    return CommutatorJet(shape, i, lhs, np.asarray(jet[0], dtype=float), ders)


@dataclass
class ShapeCoefficients:
    shape: str
    curvature: np.ndarray  # [delta, alpha, beta, gamma]
    torsion: dict  # term -> [sigma, beta, gamma]
    residual: float
    condition: float

    def predict(self, cj: CommutatorJet) -> np.ndarray:
        out = np.einsum("d,dabc->abc", cj.value, self.curvature)
        for t, T in self.torsion.items():
            out = out - np.einsum("sbc,as->abc", T, cj.derivatives[t])
        return out

    def perturbed(self, term: int, index, eps: float) -> "ShapeCoefficients":
        tors = {t: T.copy() for t, T in self.torsion.items()}
        tors[term][index] += eps
        return ShapeCoefficients(self.shape, self.curvature, tors, self.residual, self.condition)


@dataclass
class RicciCoefficients:
    i: int
    shapes: dict  # shape -> ShapeCoefficients
    labels: dict = field(default_factory=lambda: dict(LABELS))

    def __getitem__(self, shape: str) -> ShapeCoefficients:
        return self.shapes[shape]

    def families(self) -> dict:
        """Flat label -> array view, for dumping and tensoriality checks."""
        out = {}
        for shape, sc in self.shapes.items():
            curv, tors = LABELS[shape]
            out[f"{shape}:{curv}"] = sc.curvature
            for t, T in sc.torsion.items():
                out[f"{shape}:{tors[t]}"] = T
        return out


def _design_row(cj: CommutatorJet, m: int, terms) -> np.ndarray:
    """Rows (one per alpha) of the affine model in the unknowns
    [R(delta, alpha), T_t(sigma) for t in terms]."""
    rows = np.zeros((m, m * m + m * len(terms)))
    for a in range(m):
        rows[a, np.arange(m) * m + a] = cj.value
        for n_t, t in enumerate(terms):
            rows[a, m * m + n_t * m : m * m + (n_t + 1) * m] = -cj.derivatives[t][a]
    return rows


def extract_coefficients(
    sp: SubPoint, i: int, rng: np.random.Generator, probes: int | None = None
) -> RicciCoefficients:
    """Least-squares fit of every commutator shape to its affine model."""
    m = sp.m
    probes = 2 * (m + 3) if probes is None else probes
    jets = [random_jet(rng, (m,), 3 * m, 1) for _ in range(probes)]
    shapes = {}
    for shape, (_, _, terms) in SHAPES.items():
        cjs = [commutator_probe(sp, jet, shape, i) for jet in jets]
        A = np.concatenate([_design_row(cj, m, terms) for cj in cjs])
        rhs = np.concatenate([cj.lhs.reshape(m, m * m) for cj in cjs])
        # an underdetermined system has finite 2-norm condition but no unique fit
        cond = float(np.linalg.cond(A)) if A.shape[0] >= A.shape[1] else float("inf")
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise IllConditionedProbeError(f"probe system for {shape} has condition {cond:.3g}")
        sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        resid = float(np.abs(A @ sol - rhs).max())
        sol = sol.reshape(-1, m, m)  # unknown, beta, gamma
        curv = sol[: m * m].reshape(m, m, m, m)  # delta, alpha, beta, gamma
        tors = {t: sol[m * m + n_t * m : m * m + (n_t + 1) * m] for n_t, t in enumerate(terms)}
        shapes[shape] = ShapeCoefficients(shape, curv, tors, resid, cond)
    return RicciCoefficients(i, shapes)


def verify_ricci(
    sp: SubPoint,
    coeffs: RicciCoefficients,
    rng: np.random.Generator,
    trials: int = 50,
    shapes=None,
) -> dict[str, float]:
    """Max residual of the fitted affine model over random degree-2 fields."""
    m = sp.m
    out = {}
    jets = [random_jet(rng, (m,), 3 * m, 2) for _ in range(trials)]
    for shape in shapes or SHAPES:
        sc = coeffs[shape]
        worst = 0.0
        for jet in jets:
            cj = commutator_probe(sp, jet, shape, coeffs.i)
            worst = max(worst, float(np.abs(cj.lhs - sc.predict(cj)).max()))
        out[shape] = worst
    return out


def known_torsion_residuals(sp: SubPoint, coeffs: RicciCoefficients) -> dict[str, float]:
    """Fitted torsion slots that the identities name as tangent coefficients."""
    out = {}
    for (shape, t), kind in KNOWN_TORSION.items():
        out[f"{shape}:{LABELS[shape][1][t]}"] = float(
            np.abs(coeffs[shape].torsion[t] - sp.tangent[coeffs.i, kind]).max()
        )
    return out


def antisymmetry_residual(coeffs: RicciCoefficients) -> float:
    worst = 0.0
    for shape in ("hh", "v1v1", "v2v2"):
        sc = coeffs[shape]
        worst = max(worst, float(np.abs(sc.curvature + np.swapaxes(sc.curvature, 2, 3)).max()))
        for T in sc.torsion.values():
            worst = max(worst, float(np.abs(T + np.swapaxes(T, 1, 2)).max()))
    return worst


def _deflection_terms(defl: DeflectionSet, j: int, i: int) -> dict:
    return {0: defl[f"D{j}", i], 1: defl[f"d{j}1", i], 2: defl[f"d{j}2", i]}


def verify_deflection_identities(
    sp: SubPoint, coeffs: RicciCoefficients, defl: DeflectionSet | None = None
) -> dict[tuple[str, int], float]:
    """Residuals of the deflection identities, keyed (shape, j).

    The left side differentiates the deflection tensors once more; the right
    side contracts the Liouville d-vector with the curvature family and the
    deflections with the torsion families.  Where the identities name a
    tangent coefficient for a torsion slot, that coefficient is used rather
    than the fitted one.
    """
    i = coeffs.i
    defl = deflections(sp) if defl is None else defl
    out = {}
    for j, jet in enumerate(sp.liouville_jets, start=1):
        terms = _deflection_terms(defl, j, i)
        for shape, (k, l, tlist) in SHAPES.items():
            lhs = commutator_probe(sp, jet, shape, i).lhs
            sc = coeffs[shape]
            rhs = np.einsum("d,dabc->abc", jet[0], sc.curvature)
            for t in tlist:
                T = sc.torsion[t]
                if (shape, t) in KNOWN_TORSION:
                    T = sp.tangent[i, KNOWN_TORSION[shape, t]]
                rhs = rhs - np.einsum("sbc,as->abc", T, terms[t])
            out[shape, j] = float(np.abs(lhs - rhs).max())
    return out


def special_conclusions(z: tuple, coeffs: RicciCoefficients) -> dict[tuple[str, int], np.ndarray]:
    """Differences z(j) . curvature - (torsion slot j) for every shape: the
    relations the deflection identities reduce to under the special pattern."""
    out = {}
    for j, zj in enumerate(z, start=1):
        for shape, sc in coeffs.shapes.items():
            lhs = np.einsum("d,dabc->abc", zj, sc.curvature)
            out[shape, j] = lhs - sc.torsion[j]
    return out


@dataclass
class SpecialPatternReport:
    precondition_residual: float
    met: bool
    conclusions: dict  # (shape, j) -> residual; empty when unmet


def check_special_deflections(
    sp: SubPoint,
    coeffs: RicciCoefficients,
    tol: float,
    defl: DeflectionSet | None = None,
) -> SpecialPatternReport:
    """Test the special deflection pattern at the point, together with the
    vanishing of its covariant derivatives (the pattern must hold as fields),
    and if it holds evaluate the reduced relations."""
    i = coeffs.i
    defl = deflections(sp) if defl is None else defl
    pre = defl.matches_special_form(tol, i)
    for jet in sp.liouville_jets:
        for k in range(3):
            for l in range(3):
                pre = max(pre, float(np.abs(second_covariant(sp, jet, i, k, l)).max()))
    if pre > tol:
        return SpecialPatternReport(pre, False, {})
    concl = special_conclusions(sp.liouville, coeffs)
    return SpecialPatternReport(pre, True, {key: float(np.abs(v).max()) for key, v in concl.items()})


def assumption_flags(i: int) -> list[str]:
    return [BERWALD_FLAG] if i > 0 else []
