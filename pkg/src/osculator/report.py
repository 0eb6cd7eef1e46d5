"""Run the verification suite on a scenario and assemble a deterministic
report; dump numeric objects for inspection."""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .ambient import adapted_frame_pair, canonical_connection, covariant_derivative, spray_and_dual
from .connections import (
    BERWALD_FLAG,
    FAMILIES,
    InducedConnections,
    SubPoint,
    coupling_residual,
    deflections,
    deflections_closed_form,
    gauss_residual,
    weingarten_residual,
)
from .identities import (
    LABELS,
    SHAPES,
    IllConditionedProbeError,
    antisymmetry_residual,
    check_special_deflections,
    extract_coefficients,
    known_torsion_residuals,
    verify_deflection_identities,
    verify_ricci,
)
from .scenario import Scenario
from .submanifold import (
    induced_nonlinear,
    moving_frame,
    prolong,
    prolongation_residual,
    pull_point,
    reparametrize,
    restrict_coframe,
)

__all__ = ["Check", "Report", "run", "dump", "SUITE"]

# check id -> (description, tolerance class, per-row)
SUITE = {
    "frame.ambient_duality": ("adapted frame and coframe of the ambient space are dual", "frame", False),
    "frame.induced_duality": ("induced adapted frame and coframe are dual", "frame", False),
    "prolongation.identities": ("structural identities of the prolonged embedding", "frame", False),
    "moving_frame.orthonormality": ("normals are unit and orthogonal to the tangent frame", "frame", False),
    "moving_frame.duality": ("moving frame and its dual pair to the identity", "frame", False),
    "moving_frame.completeness": ("tangent and normal projectors sum to the identity", "frame", False),
    "moving_frame.lowering": ("dual covectors are the metric-lowered frame", "frame", False),
    "moving_frame.gauge": ("orthogonal normal gauge leaves tangent data fixed and rotates normal data", "restriction", False),
    "restriction.coframe": ("ambient coframe restricted to the submanifold splits along the moving frame", "restriction", False),
    "liouville.z2": ("second Liouville d-vector from an independent induced M1", "restriction", False),
    "ambient.metric_compatibility": ("metric is parallel for the canonical connection", "frame", True),
    "coupling.restriction": ("coupling derivative equals the restricted ambient derivative", "restriction", True),
    "tangent.gauss": ("tangent derivative is the projected coupling derivative", "restriction", True),
    "normal.weingarten": ("normal derivative is the projected coupling derivative", "restriction", True),
    "normal.printed_variant": ("vertical normal rows built on the tangent frame (informational)", "restriction", True),
    "deflections.closed_form_z1": ("z1 deflections: definition against closed forms", "restriction", True),
    "deflections.closed_form_z2": ("z2 deflections: definition against closed forms", "restriction", True),
    **{
        f"ricci.extraction.{s}": (f"affine fit of the {s} commutator on probe fields", "identity", True)
        for s in SHAPES
    },
    **{
        f"ricci.affinity.{s}": (f"fitted {s} commutator model on fresh degree-2 fields", "identity", True)
        for s in SHAPES
    },
    "ricci.named_torsion": ("fitted torsion slots equal the named tangent coefficients", "identity", True),
    "ricci.antisymmetry": ("same-kind curvature and torsion families are antisymmetric", "identity", True),
    "ricci.r22": ("second-vertical torsion of the v2v2 commutator vanishes", "identity", True),
    **{
        f"deflection_identities.{s}": (
            f"{s} commutator of the Liouville d-vectors through deflections",
            "identity",
            True,
        )
        for s in SHAPES
    },
    "special_pattern.conclusions": ("reduced relations under the special deflection pattern", "identity", True),
}

CHART_SUITE = {
    "chart.deflections": ("deflections transform as d-tensors under a chart change", "identity", True),
    "chart.ricci": ("curvature and torsion families transform as d-tensors", "identity", True),
    "chart.deflection_identities": ("deflection identities hold in the new chart", "identity", True),
}

STATUSES = ("pass", "fail", "precondition-unmet", "info")


@dataclass
class Check:
    id: str
    point: int
    i: int | None
    residual: float | None
    tol: float
    status: str
    assumptions: list = field(default_factory=list)
    eq: str = ""

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "eq": self.eq,
            "point": self.point,
            "i": self.i,
            "residual": self.residual,
            "tol": self.tol,
            "status": self.status,
            "assumptions": list(self.assumptions),
        }


@dataclass
class Report:
    scenario: str
    seed: int
    checks: list

    @property
    def failed(self) -> list:
        return [c for c in self.checks if c.status == "fail"]

    def summary(self) -> dict:
        return {s: sum(c.status == s for c in self.checks) for s in STATUSES}

    def as_dict(self) -> dict:
        checks = sorted(self.checks, key=lambda c: (c.point, c.id, -1 if c.i is None else c.i))
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "summary": self.summary(),
            "checks": [c.as_dict() for c in checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n"


def _rng(seed: int, point: int, check: str, i) -> np.random.Generator:
    salt = zlib.crc32(check.encode())
    return np.random.default_rng([seed, point, salt, 0 if i is None else i + 1])


def _random_orthogonal(rng: np.random.Generator, k: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.normal(size=(k, k)))
    return Q * np.sign(np.diag(R))


class _Runner:
    def __init__(self, sc: Scenario, tol_override: float | None, seed: int, trials: int):
        self.sc = sc
        self.seed = seed
        self.trials = trials
        self.tols = dict(sc.tolerances)
        if tol_override is not None:
            for key in self.tols:
                if key != "mutation":
                    self.tols[key] = tol_override
        self.space = sc.space()
        self.emb = sc.embedding_obj(self.space)
        self._conns: dict = {}
        self.checks: list[Check] = []
        self.new_emb = reparametrize(self.emb, sc.chart_change) if sc.chart_change else None

    def conns_for(self, emb, q, gauge=None) -> SubPoint:
        geo = emb.geometry(q, gauge)
        ic = self._conns.get(id(geo))
        if ic is None:
            ic = self._conns[id(geo)] = (geo, InducedConnections(geo))
        return ic[1].at(q)

    def add(self, cid, p, i, residual, status=None, assumptions=(), suite=SUITE):
        desc, cls, _ = suite[cid]
        tol = self.tols[cls]
        if residual is not None:
            residual = float(residual)
        if status is None:
            status = "pass" if residual is not None and np.isfinite(residual) and residual <= tol else "fail"
        if residual is not None and not np.isfinite(residual):
            residual = None
        flags = list(assumptions)
        if suite[cid][2] and i is not None and i > 0 and BERWALD_FLAG not in flags:
            flags.append(BERWALD_FLAG)
        self.checks.append(Check(cid, p, i, residual, tol, status, flags, desc))

    def rng(self, p, cid, i=None):
        return _rng(self.seed, p, cid, i)

    def run_point(self, p: int, q):
        emb, space = self.emb, self.space
        amb_p = prolong(emb, q)
        _, N = spray_and_dual(space, amb_p)
        self.add("frame.ambient_duality", p, None, adapted_frame_pair(N).duality_residual())
        sp = self.conns_for(emb, q)
        m = emb.m
        self.add(
            "frame.induced_duality", p, None, np.abs(sp.coframe @ sp.frame - np.eye(3 * m)).max()
        )
        self.add("prolongation.identities", p, None, prolongation_residual(emb, q))
        mf = moving_frame(emb, q)
        for key, val in mf.residuals().items():
            self.add(f"moving_frame.{key}", p, None, val)
        self.add("moving_frame.gauge", p, None, self.gauge_residual(p, q, sp))
        self.add("restriction.coframe", p, None, restrict_coframe(emb, q))
        self.add("liouville.z2", p, None, self.liouville_residual(q, sp, amb_p))

        defl = deflections(sp)
        closed = deflections_closed_form(sp)
        for i in range(3):
            comp = max(
                float(np.abs(covariant_derivative(space, space.g, "dd", amb_p, i, k)).max())
                for k in range(3)
            )
            self.add("ambient.metric_compatibility", p, i, comp)
        cpl = coupling_residual(sp, self.rng(p, "coupling.restriction"), self.trials)
        gau = gauss_residual(sp, self.rng(p, "tangent.gauss"), self.trials)
        wei = weingarten_residual(sp, self.rng(p, "normal.weingarten"), self.trials)
        wpr = weingarten_residual(sp, self.rng(p, "normal.printed_variant"), self.trials, printed=True)
        for i in range(3):
            self.add("coupling.restriction", p, i, cpl[i])
            self.add("tangent.gauss", p, i, gau[i])
            self.add("normal.weingarten", p, i, wei[i])
            self.add("normal.printed_variant", p, i, wpr[i], status="info")
            self.add(
                "deflections.closed_form_z1", p, i, defl.max_diff(closed, ("D1", "d11", "d12"), (i,))
            )
            self.add(
                "deflections.closed_form_z2",
                p,
                i,
                defl.max_diff(closed, ("D2", "d21", "d22"), (i,)),
                assumptions=[BERWALD_FLAG],
            )
            self.ricci_rows(p, i, sp, defl)
        if self.new_emb is not None:
            self.chart_rows(p, q, sp, defl)

    def gauge_residual(self, p, q, sp: SubPoint) -> float:
        emb = self.emb
        k = emb.n - emb.m
        A = _random_orthogonal(self.rng(p, "moving_frame.gauge"), k)
        gp = self.conns_for(emb, q, A)
        res = max(moving_frame(emb, q, A).residuals().values())
        ind0, ind1 = induced_nonlinear(emb, q), induced_nonlinear(emb, q, A)
        res = max(res, np.abs(ind1.K1 - A @ ind0.K1).max(), np.abs(ind1.K2 - A @ ind0.K2).max())
        res = max(res, np.abs(gp.Bn @ gp.K1 - sp.Bn @ sp.K1).max())
        for key in FAMILIES:
            res = max(res, np.abs(gp.tangent[key] - sp.tangent[key]).max())
            rotated = np.einsum("ab,bcd,ec->aed", A, sp.normal[key], A)
            res = max(res, np.abs(gp.normal[key] - rotated).max())
        return float(res)

    def liouville_residual(self, q, sp: SubPoint, amb_p) -> float:
        # M1 recomputed from numeric arrays only
        ev_amb = self.space.evaluator(amb_p)
        M1a = ev_amb.array(self.space.M1)
        B2 = sp._num(self.emb.B2)
        B0 = np.einsum("agb,g->ab", B2, q.v1)
        M1 = sp.B_t @ (B0 + M1a @ sp.B)
        z2 = q.v2 + 0.5 * M1 @ q.v1
        return float(np.abs(z2 - sp.liouville[1]).max())

    def ricci_rows(self, p, i, sp: SubPoint, defl):
        try:
            coeffs = extract_coefficients(sp, i, self.rng(p, "ricci.extraction", i))
        except IllConditionedProbeError:
            for s in SHAPES:
                self.add(f"ricci.extraction.{s}", p, i, float("inf"))
            return None
        for s in SHAPES:
            self.add(f"ricci.extraction.{s}", p, i, coeffs[s].residual)
        aff = verify_ricci(sp, coeffs, self.rng(p, "ricci.affinity", i), self.trials)
        for s in SHAPES:
            self.add(f"ricci.affinity.{s}", p, i, aff[s])
        self.add("ricci.named_torsion", p, i, max(known_torsion_residuals(sp, coeffs).values()))
        self.add("ricci.antisymmetry", p, i, antisymmetry_residual(coeffs))
        self.add("ricci.r22", p, i, np.abs(coeffs["v2v2"].torsion[2]).max())
        ids = verify_deflection_identities(sp, coeffs, defl)
        for s in SHAPES:
            self.add(f"deflection_identities.{s}", p, i, max(ids[s, 1], ids[s, 2]))
        tol = self.tols["identity"]
        special = check_special_deflections(sp, coeffs, tol, defl)
        if special.met:
            self.add("special_pattern.conclusions", p, i, max(special.conclusions.values()))
        else:
            self.add(
                "special_pattern.conclusions",
                p,
                i,
                special.precondition_residual,
                status="precondition-unmet",
            )
        return coeffs

    def chart_rows(self, p, q, sp: SubPoint, defl):
        q2, J = pull_point(self.sc.chart_change, q)
        sp2 = self.conns_for(self.new_emb, q2)
        Ji = np.linalg.inv(J)
        defl2 = deflections(sp2)
        for i in range(3):
            res = 0.0
            for name in defl.NAMES:
                mapped = Ji @ defl[name, i] @ J
                res = max(res, np.abs(mapped - defl2[name, i]).max())
            self.add("chart.deflections", p, i, res, suite=CHART_SUITE)
            c1 = extract_coefficients(sp, i, self.rng(p, "chart.ricci", i))
            c2 = extract_coefficients(sp2, i, self.rng(p, "chart.ricci", i))
            res = 0.0
            for s in SHAPES:
                R = np.einsum("Dd,aA,Bb,Cc,DABC->dabc", J, Ji, J, J, c1[s].curvature)
                res = max(res, np.abs(R - c2[s].curvature).max())
                for t, T in c1[s].torsion.items():
                    T1 = np.einsum("sS,Bb,Cc,SBC->sbc", Ji, J, J, T)
                    res = max(res, np.abs(T1 - c2[s].torsion[t]).max())
            self.add("chart.ricci", p, i, res, suite=CHART_SUITE)
            ids = verify_deflection_identities(sp2, c2, defl2)
            self.add("chart.deflection_identities", p, i, max(ids.values()), suite=CHART_SUITE)


def run(sc: Scenario, tol: float | None = None, seed: int | None = None, trials: int = 50) -> Report:
    seed = sc.seed if seed is None else seed
    runner = _Runner(sc, tol, seed, trials)
    for p, q in enumerate(sc.jet_points()):
        runner.run_point(p, q)
    return Report(sc.name, seed, runner.checks)


# -- dump ------------------------------------------------------------------------

_SLOT_NAMES = {"A": "ambient^", "a": "ambient_", "T": "sub^", "t": "sub_", "N": "normal^", "n": "normal_"}


def _entry(arr, slots: str, source: str, assumptions=()) -> dict:
    arr = np.asarray(arr, dtype=float)
    return {
        "indices": [_SLOT_NAMES[c] for c in slots],
        "shape": list(arr.shape),
        "data": arr.tolist(),
        "source": source,
        "assumptions": list(assumptions),
    }


def dump(sc: Scenario, what: str, point: int) -> dict:
    qs = sc.jet_points()
    if not 0 <= point < len(qs):
        raise IndexError(f"point index {point} out of range (scenario has {len(qs)} points)")
    q = qs[point]
    space = sc.space()
    emb = sc.embedding_obj(space)
    sp = InducedConnections(emb.geometry(q)).at(q)
    amb_p = prolong(emb, q)
    out: dict = {"scenario": sc.name, "point": point, "what": what, "jet": list(q.coords)}
    if what == "frames":
        _, N = spray_and_dual(space, amb_p)
        pair = adapted_frame_pair(N)
        mf = moving_frame(emb, q)
        out["entries"] = {
            "ambient.adapted_frame": _entry(pair.frame, "Aa", "adapted frame (d/dx, d/dy1, d/dy2) columns, blocks of n"),
            "ambient.adapted_coframe": _entry(pair.coframe, "Aa", "adapted coframe rows (dx, dy1, dy2)"),
            "sub.induced_frame": _entry(sp.frame, "Tt", "induced adapted frame columns, blocks of m"),
            "sub.induced_coframe": _entry(sp.coframe, "Tt", "induced adapted coframe rows"),
            "moving_frame.tangent": _entry(mf.B, "At", "tangent frame B = dx/du"),
            "moving_frame.normal": _entry(mf.Bn, "An", "g-orthonormal normal frame"),
            "moving_frame.tangent_dual": _entry(mf.B_t, "Ta", "dual tangent covectors"),
            "moving_frame.normal_dual": _entry(mf.B_n, "Na", "dual normal covectors"),
        }
    elif what == "coefficients":
        amb = canonical_connection(space, amb_p)
        entries = {}
        for (i, k), arr in amb.families.items():
            flag = [BERWALD_FLAG] if i in amb.assumption_rows and k == 0 else []
            entries[f"ambient.({i}{k})"] = _entry(arr, "Aaa", "canonical metrical connection", flag)
        for (i, k), arr in sp.tangent.items():
            flag = [BERWALD_FLAG] if i > 0 and k == 0 else []
            entries[f"tangent.({i}{k})"] = _entry(arr, "Ttt", "induced tangent connection", flag)
        for (i, k), arr in sp.normal.items():
            flag = [BERWALD_FLAG] if i > 0 and k == 0 else []
            entries[f"normal.({i}{k})"] = _entry(arr, "Nnt", "induced normal connection", flag)
        entries["induced.M1"] = _entry(sp.M1, "Tt", "induced nonlinear connection, dual coefficients")
        entries["induced.M2"] = _entry(sp.M2, "Tt", "induced nonlinear connection, dual coefficients")
        entries["induced.N1"] = _entry(sp.N1, "Tt", "induced nonlinear connection, direct coefficients")
        entries["induced.N2"] = _entry(sp.N2, "Tt", "induced nonlinear connection, direct coefficients")
        entries["induced.K1"] = _entry(sp.K1, "Nt", "normal part of the restricted first vertical coframe")
        entries["induced.K2"] = _entry(sp.K2, "Nt", "normal part of the restricted second vertical coframe")
        out["entries"] = entries
    elif what == "deflections":
        defl = deflections(sp)
        out["entries"] = {
            f"{name}.i{i}": _entry(defl[name, i], "Tt", "covariant derivative of a Liouville d-vector", defl.assumptions[name, i])
            for (name, i) in sorted(defl.values)
        }
        z1, z2 = sp.liouville
        out["entries"]["z1"] = _entry(z1, "T", "Liouville d-vector z1 = v1")
        out["entries"]["z2"] = _entry(z2, "T", "Liouville d-vector z2 = v2 + M1 v1 / 2")
    else:
        raise ValueError(f"unknown dump kind {what!r}")
    return out
