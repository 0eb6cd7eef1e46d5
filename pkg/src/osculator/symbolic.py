"""Object-ndarray helpers over :class:`~osculator.expr.Expr`."""

from __future__ import annotations

from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .expr import ONE, ZERO, Evaluator, Expr, const, differentiate, parse, substitute

__all__ = [
    "as_expr",
    "sym_array",
    "zeros",
    "identity",
    "det",
    "inverse",
    "diff",
    "subs",
    "gradient",
    "coord_names",
]


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        return parse(x)
    return const(x)


def sym_array(data) -> np.ndarray:
    """Object array of expressions from nested sequences of str/number/Expr."""
    arr = np.array(data, dtype=object)
    flat = [as_expr(x) for x in arr.ravel()]
    out = np.empty(arr.shape, dtype=object)
    out.ravel()[:] = flat
    return out


def zeros(shape) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    out.fill(ZERO)
    return out


def identity(n: int) -> np.ndarray:
    out = zeros((n, n))
    for k in range(n):
        out[k, k] = ONE
    return out


def det(M: np.ndarray) -> Expr:
    return _det_and_minors(M)[0]


def _det_and_minors(M: np.ndarray):
    n = M.shape[0]

    @lru_cache(maxsize=None)
    def minor(rows: tuple, cols: tuple) -> Expr:
        if len(rows) == 1:
            return M[rows[0], cols[0]]
        r0, rest = rows[0], rows[1:]
        total = ZERO
        for k, c in enumerate(cols):
            entry = M[r0, c]
            if entry is ZERO:
                continue
            sub = minor(rest, cols[:k] + cols[k + 1 :])
            term = entry * sub
            total = total - term if k % 2 else total + term
        return total

    full = tuple(range(n))
    return minor(full, full), minor


def inverse(M: np.ndarray) -> np.ndarray:
    """Symbolic inverse by cofactors; shared minors keep the DAG small."""
    n = M.shape[0]
    if n == 1:
        return sym_array([[ONE / M[0, 0]]])
    d, minor = _det_and_minors(M)
    full = tuple(range(n))
    out = zeros((n, n))
    for i in range(n):
        for j in range(n):
            rows = full[:j] + full[j + 1 :]
            cols = full[:i] + full[i + 1 :]
            cof = minor(rows, cols)
            if cof is ZERO:
                continue
            out[i, j] = (cof if (i + j) % 2 == 0 else -cof) / d
    return out


def diff(arr: np.ndarray, name: str) -> np.ndarray:
    out = np.empty(arr.shape, dtype=object)
    out.ravel()[:] = [differentiate(e, name) for e in arr.ravel()]
    return out


def subs(arr: np.ndarray, mapping: Mapping[str, Expr], memo: dict | None = None) -> np.ndarray:
    memo = {} if memo is None else memo
    out = np.empty(arr.shape, dtype=object)
    out.ravel()[:] = [substitute(e, mapping, memo) for e in arr.ravel()]
    return out


def gradient(arr: np.ndarray, names: Sequence[str]) -> np.ndarray:
    """Array of partials with the derivative index appended last."""
    parts = [diff(arr, v) for v in names]
    return np.stack(parts, axis=-1)


def coord_names(dim: int, chart: str = "ambient") -> list[str]:
    """Variable names of a jet chart: base, first and second jet blocks."""
    if chart == "ambient":
        b, f, s = "x", "y1_", "y2_"
    elif chart == "sub":
        b, f, s = "u", "v1_", "v2_"
    else:
        raise ValueError(chart)
    k = range(1, dim + 1)
    return [f"{b}{i}" for i in k] + [f"{f}{i}" for i in k] + [f"{s}{i}" for i in k]


def evaluate(arr: np.ndarray, ev: Evaluator) -> np.ndarray:
    return ev.array(arr)
