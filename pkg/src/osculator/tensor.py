"""Dense mixed d-tensors with typed index slots."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "IndexSlot",
    "MixedDTensor",
    "SlotError",
    "contract",
    "transform",
    "finite_difference",
]

FAMILIES = ("ambient", "sub", "normal")
BLOCKS = ("h", "v1", "v2", None)


class SlotError(ValueError):
    """Illegal index operation (incompatible slots, mismatched points)."""


@dataclass(frozen=True)
class IndexSlot:
    family: str
    dim: int
    up: bool
    block: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown index family {self.family!r}")
        if self.block not in BLOCKS:
            raise ValueError(f"unknown block tag {self.block!r}")

    def __str__(self):
        b = f"[{self.block}]" if self.block else ""
        return f"{self.family}{b}{'^' if self.up else '_'}{self.dim}"


def up(family: str, dim: int, block: str | None = None) -> IndexSlot:
    return IndexSlot(family, dim, True, block)


def down(family: str, dim: int, block: str | None = None) -> IndexSlot:
    return IndexSlot(family, dim, False, block)


@dataclass(frozen=True, eq=False)
class MixedDTensor:
    """Components of a d-tensor at one jet point.

    ``components`` is indexed in slot order; ``point`` is the coordinate tuple
    of the jet point (only used to refuse mixing tensors from different points).
    """

    slots: tuple[IndexSlot, ...]
    components: np.ndarray
    point: tuple[float, ...] | None = None
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        object.__setattr__(self, "slots", tuple(self.slots))
        shape = tuple(s.dim for s in self.slots)
        if comps.shape != shape:
            if comps.size != int(np.prod(shape, dtype=int)):
                raise SlotError(
                    f"{comps.size} components do not fit slots of shape {shape}"
                )
            comps = comps.reshape(shape)
        if not np.all(np.isfinite(comps)):
            raise ValueError("non-finite tensor component")
        comps.setflags(write=False)
        object.__setattr__(self, "components", comps)
        if self.point is not None:
            object.__setattr__(self, "point", tuple(float(p) for p in self.point))

    @property
    def rank(self) -> int:
        return len(self.slots)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.components, dtype=dtype)

    def with_components(self, comps) -> "MixedDTensor":
        return MixedDTensor(self.slots, comps, self.point)

    def __add__(self, other: "MixedDTensor") -> "MixedDTensor":
        _check_same(self, other)
        return self.with_components(self.components + other.components)

    def __sub__(self, other: "MixedDTensor") -> "MixedDTensor":
        _check_same(self, other)
        return self.with_components(self.components - other.components)

    def __mul__(self, a: float) -> "MixedDTensor":
        return self.with_components(a * self.components)

    __rmul__ = __mul__


def _check_same(a: MixedDTensor, b: MixedDTensor):
    if a.slots != b.slots:
        raise SlotError("tensors have different slot structure")
    _check_points(a, b)


def _check_points(a: MixedDTensor, b: MixedDTensor):
    if a.point is not None and b.point is not None and a.point != b.point:
        raise SlotError("tensors are taken at different jet points")


def contract(t1: MixedDTensor, slot1: int, t2: MixedDTensor, slot2: int) -> MixedDTensor:
    """Sum over ``slot1`` of ``t1`` against ``slot2`` of ``t2``.

    The remaining slots are those of ``t1`` followed by those of ``t2``.
    """
    s1, s2 = t1.slots[slot1], t2.slots[slot2]
    if s1.up == s2.up:
        raise SlotError(f"cannot contract two {'up' if s1.up else 'down'} slots")
    if s1.family != s2.family or s1.dim != s2.dim:
        raise SlotError(f"cannot contract {s1} with {s2}")
    if s1.block is not None and s2.block is not None and s1.block != s2.block:
        raise SlotError(f"block mismatch contracting {s1} with {s2}")
    _check_points(t1, t2)
    comps = np.tensordot(t1.components, t2.components, axes=([slot1], [slot2]))
    slots = [s for k, s in enumerate(t1.slots) if k != slot1]
    slots += [s for k, s in enumerate(t2.slots) if k != slot2]
    return MixedDTensor(tuple(slots), comps, t1.point or t2.point)


def transform(t: MixedDTensor, jacobians: Sequence[np.ndarray]) -> MixedDTensor:
    """Change frame slot by slot.

    ``jacobians[k]`` is the matrix J with new_up = J @ old_up for slot k; up
    slots are multiplied by J and down slots by the inverse transpose.
    """
    if len(jacobians) != t.rank:
        raise SlotError(f"need {t.rank} jacobians, got {len(jacobians)}")
    comps = t.components
    for k, (slot, J) in enumerate(zip(t.slots, jacobians)):
        J = np.asarray(J, dtype=float)
        if J.shape != (slot.dim, slot.dim):
            raise SlotError(f"jacobian for slot {k} has shape {J.shape}")
        if abs(np.linalg.det(J)) < 1e-12:
            raise np.linalg.LinAlgError(f"singular jacobian for slot {k}")
        M = J if slot.up else np.linalg.inv(J).T
        comps = np.moveaxis(np.tensordot(M, comps, axes=([1], [k])), 0, k)
    return MixedDTensor(t.slots, comps, None)


def finite_difference(
    f: Callable[[np.ndarray], float], p: Sequence[float], index: int, h: float = 1e-6
) -> float:
    """Central difference of ``f`` along coordinate ``index`` at ``p``.

    Independent oracle for the symbolic derivative path; never used by it.
    """
    if not h > 0:
        raise ValueError("step must be positive")
    p = np.array(p, dtype=float)
    e = np.zeros_like(p)
    e[index] = h
    return (f(p + e) - f(p - e)) / (2 * h)
