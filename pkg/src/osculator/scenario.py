"""Scenario files: JSON description of a metric, an embedding, sample points
and tolerances."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .expr import ParseError, free_variables, parse

__all__ = ["Scenario", "ScenarioError", "DEFAULT_TOLERANCES", "load", "bundled", "bundled_names"]

DEFAULT_TOLERANCES = {
    "frame": 1e-10,  # adapted frames, moving frame relations, metric compatibility
    "restriction": 1e-9,  # coframe restriction and induced-connection relations
    "mutation": 1e-4,  # minimum residual a perturbed K1 must produce
    "identity": 1e-8,  # Ricci fits, deflection identities, chart changes
}

_KEYS = {"name", "description", "n", "m", "metric", "embedding", "points", "chart_change", "seed", "tolerances"}


class ScenarioError(ValueError):
    """Schema or expression error; ``where`` locates it in the file."""

    def __init__(self, message: str, where: str | None = None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


@dataclass(frozen=True)
class Point:
    u: tuple
    v1: tuple
    v2: tuple


@dataclass
class Scenario:
    n: int
    m: int
    metric: list
    embedding: list
    points: list
    seed: int = 0
    chart_change: list | None = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    name: str = ""
    description: str = ""

    def space(self):
        from .ambient import AmbientSpace

        return AmbientSpace(self.metric)

    def embedding_obj(self, space=None):
        from .submanifold import Embedding

        return Embedding(space or self.space(), self.embedding)

    def jet_points(self):
        from .ambient import JetPoint

        return [JetPoint(p.u, p.v1, p.v2, "sub") for p in self.points]


def _expr(text, where: str, allowed: set[str]):
    if not isinstance(text, str):
        if isinstance(text, (int, float)) and not isinstance(text, bool):
            text = repr(text)
        else:
            raise ScenarioError("expected an expression string", where)
    try:
        e = parse(text)
    except ParseError as exc:
        raise ScenarioError(f"{exc} (offset {exc.offset} in {text!r})", where) from None
    extra = free_variables(e) - allowed
    if extra:
        raise ScenarioError(f"unexpected variables {sorted(extra)}", where)
    return e


def _int(data, key):
    v = data.get(key)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ScenarioError("expected an integer", key)
    return v


def _vector(v, dim: int, where: str):
    if not isinstance(v, list) or len(v) != dim:
        raise ScenarioError(f"expected a list of {dim} numbers", where)
    out = []
    for k, x in enumerate(v):
        if not isinstance(x, (int, float)) or isinstance(x, bool):
            raise ScenarioError("expected a number", f"{where}[{k}]")
        out.append(float(x))
    return tuple(out)


def from_dict(data: dict, name: str = "") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("top level must be an object")
    unknown = set(data) - _KEYS
    if unknown:
        raise ScenarioError(f"unknown keys {sorted(unknown)}")
    for key in ("n", "m", "metric", "embedding", "points"):
        if key not in data:
            raise ScenarioError("missing required key", key)
    n, m = _int(data, "n"), _int(data, "m")
    if not 1 < m < n:
        raise ScenarioError(f"submanifold dimension must satisfy 1 < m < n (got m={m}, n={n})", "m")
    amb_vars = {f"x{k}" for k in range(1, n + 1)} | {f"y1_{k}" for k in range(1, n + 1)}
    sub_vars = {f"u{k}" for k in range(1, m + 1)}
    metric = data["metric"]
    if not isinstance(metric, list) or len(metric) != n:
        raise ScenarioError(f"expected {n} rows", "metric")
    rows = []
    for a, row in enumerate(metric):
        if not isinstance(row, list) or len(row) != n:
            raise ScenarioError(f"expected {n} entries", f"metric[{a}]")
        rows.append([_expr(t, f"metric[{a}][{b}]", amb_vars) for b, t in enumerate(row)])
    for a in range(n):
        for b in range(a):
            if rows[a][b] is not rows[b][a]:
                raise ScenarioError("metric must be symmetric", f"metric[{a}][{b}]")
    emb = data["embedding"]
    if not isinstance(emb, list) or len(emb) != n:
        raise ScenarioError(f"expected {n} expressions", "embedding")
    emb = [_expr(t, f"embedding[{a}]", sub_vars) for a, t in enumerate(emb)]
    pts = data["points"]
    if not isinstance(pts, list) or not pts:
        raise ScenarioError("expected a non-empty list", "points")
    points = []
    for k, p in enumerate(pts):
        if not isinstance(p, dict) or set(p) - {"u", "v1", "v2"}:
            raise ScenarioError("expected an object with keys u, v1, v2", f"points[{k}]")
        u = _vector(p.get("u"), m, f"points[{k}].u")
        v1 = _vector(p.get("v1", [0.0] * m), m, f"points[{k}].v1")
        v2 = _vector(p.get("v2", [0.0] * m), m, f"points[{k}].v2")
        points.append(Point(u, v1, v2))
    chart = data.get("chart_change")
    if chart is not None:
        if not isinstance(chart, list) or len(chart) != m:
            raise ScenarioError(f"expected {m} expressions of the new u1..u{m}", "chart_change")
        chart = [_expr(t, f"chart_change[{k}]", sub_vars) for k, t in enumerate(chart)]
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ScenarioError("expected a non-negative integer", "seed")
    tol = dict(DEFAULT_TOLERANCES)
    user_tol = data.get("tolerances", {})
    if not isinstance(user_tol, dict):
        raise ScenarioError("expected an object", "tolerances")
    for key, val in user_tol.items():
        if key not in tol:
            raise ScenarioError(f"unknown tolerance (known: {sorted(tol)})", f"tolerances.{key}")
        if not isinstance(val, (int, float)) or isinstance(val, bool) or not val > 0:
            raise ScenarioError("expected a positive number", f"tolerances.{key}")
        tol[key] = float(val)
    return Scenario(
        n=n,
        m=m,
        metric=rows,
        embedding=emb,
        points=points,
        seed=seed,
        chart_change=chart,
        tolerances=tol,
        name=str(data.get("name", name)),
        description=str(data.get("description", "")),
    )


def load(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", str(path)) from None
    return loads(text, path.stem)


def loads(text: str, name: str = "") -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") from None
    return from_dict(data, name)


def bundled_names() -> list[str]:
    root = resources.files("osculator") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled(name: str) -> Scenario:
    root = resources.files("osculator") / "scenarios"
    return loads((root / f"{name}.json").read_text(), name)
