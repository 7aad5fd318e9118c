"""Core value types: block types, skeleton positions, assignments, budgets and costs.

Everything here is immutable. An :class:`Assignment` is a partial map from
position index to block type id; unfilled positions act as identity layers.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

from .errors import PositionOccupied


@dataclass(frozen=True)
class BlockType:
    id: int
    expansion_factor: Fraction
    expansion_groups: int = 1
    projection_groups: int = 1
    kernel: int = 3
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "expansion_factor", Fraction(self.expansion_factor))
        if self.id < 1:
            raise ValueError("block id must be >= 1")
        if self.expansion_factor <= 0:
            raise ValueError("expansion_factor must be positive")
        if self.expansion_groups < 1 or self.projection_groups < 1:
            raise ValueError("group counts must be positive")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError("kernel must be an odd positive integer")


@dataclass(frozen=True)
class BlockCatalog:
    types: tuple[BlockType, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "types", tuple(self.types))
        if not self.types:
            raise ValueError("catalog needs at least one block type")
        ids = [t.id for t in self.types]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError(f"block ids must be 1..L in order, got {ids}")

    def __len__(self) -> int:
        return len(self.types)

    def __getitem__(self, block_id: int) -> BlockType:
        if not 1 <= block_id <= len(self.types):
            raise KeyError(block_id)
        return self.types[block_id - 1]


@dataclass(frozen=True)
class Position:
    index: int
    in_channels: int
    out_channels: int
    height: int
    width: int
    stride: int = 1

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError("position index must be >= 0")
        for name in ("in_channels", "out_channels", "height", "width", "stride"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def identity_compatible(self) -> bool:
        return self.in_channels == self.out_channels and self.stride == 1


@dataclass(frozen=True)
class Skeleton:
    positions: tuple[Position, ...]
    fixed_param_overhead: int = 0
    fixed_madds_overhead: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "positions", tuple(self.positions))
        if not self.positions:
            raise ValueError("skeleton needs at least one position")
        for i, p in enumerate(self.positions):
            if p.index != i:
                raise ValueError(f"position {i} carries index {p.index}")
            if not p.identity_compatible:
                raise ValueError(
                    f"position {i} is not identity-compatible (needs C1 == C2 and stride 1)"
                )
        if self.fixed_param_overhead < 0 or self.fixed_madds_overhead < 0:
            raise ValueError("fixed overheads must be nonnegative")

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True, order=True)
class Element:
    """Block type ``block`` placed at ``position``."""

    position: int
    block: int

    def __str__(self) -> str:
        return f"{self.block}_{self.position}"


def ground_set(n_positions: int, n_types: int) -> list[Element]:
    """All L*N elements in canonical (position, type) order."""
    return [Element(n, l) for n in range(n_positions) for l in range(1, n_types + 1)]


@dataclass(frozen=True)
class Assignment:
    """Partial map position -> block type id, stored sorted by position."""

    items: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        items = tuple(sorted((int(p), int(t)) for p, t in self.items))
        positions = [p for p, _ in items]
        if len(set(positions)) != len(positions):
            raise PositionOccupied("an assignment holds at most one type per position")
        object.__setattr__(self, "items", items)

    @classmethod
    def from_mapping(cls, filled: Mapping[int, int]) -> Assignment:
        return cls(tuple(filled.items()))

    @classmethod
    def from_elements(cls, elements: Iterable[Element]) -> Assignment:
        return cls(tuple((e.position, e.block) for e in elements))

    @property
    def filled(self) -> dict[int, int]:
        return dict(self.items)

    def elements(self) -> list[Element]:
        return [Element(p, t) for p, t in self.items]

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[Element]:
        return iter(self.elements())

    def __contains__(self, e: object) -> bool:
        return isinstance(e, Element) and (e.position, e.block) in self.items

    def occupies(self, position: int) -> bool:
        return any(p == position for p, _ in self.items)

    def add(self, e: Element) -> Assignment:
        if self.occupies(e.position):
            raise PositionOccupied(f"position {e.position} is already filled")
        return Assignment(self.items + ((e.position, e.block),))

    def issubset(self, other: Assignment) -> bool:
        return set(self.items) <= set(other.items)

    def key(self) -> str:
        """Canonical string form, used as a cache key."""
        return ",".join(f"{p}:{t}" for p, t in self.items)

    def sequence(self) -> list[int]:
        """Block types of the filled positions in position order."""
        return [t for _, t in self.items]

    def to_json(self) -> dict:
        return {"filled": [{"position": p, "type": t} for p, t in self.items]}

    @classmethod
    def from_json(cls, obj) -> Assignment:
        rows = obj["filled"] if isinstance(obj, dict) else obj
        return cls(tuple((int(r["position"]), int(r["type"])) for r in rows))


def assignment_add(a: Assignment, e: Element) -> Assignment:
    return a.add(e)


@dataclass(frozen=True)
class Cost:
    params: int = 0
    madds: int = 0

    def __post_init__(self) -> None:
        if self.params < 0 or self.madds < 0:
            raise ValueError("costs are nonnegative")

    def __add__(self, other: Cost) -> Cost:
        return Cost(self.params + other.params, self.madds + other.madds)

    def __sub__(self, other: Cost) -> Cost:
        return Cost(self.params - other.params, self.madds - other.madds)

    def to_json(self) -> dict:
        return {"params": self.params, "madds": self.madds}


@dataclass(frozen=True)
class Budget:
    max_params: int
    max_madds: int

    def __post_init__(self) -> None:
        if self.max_params < 0 or self.max_madds < 0:
            raise ValueError("budgets must be nonnegative")

    def admits(self, cost: Cost) -> bool:
        return cost.params <= self.max_params and cost.madds <= self.max_madds

    def to_json(self) -> dict:
        return {"max_params": self.max_params, "max_madds": self.max_madds}


def feasible_elements(a: Assignment, v_all: Iterable[Element], b: Budget, cost_fn) -> list[Element]:
    """Elements on unfilled positions whose addition keeps ``a`` within both budgets.

    ``cost_fn`` is any cost model exposing ``assignment_cost``.
    """
    out = []
    for e in sorted(v_all):
        if a.occupies(e.position):
            continue
        if b.admits(cost_fn.assignment_cost(a.add(e))):
            out.append(e)
    return out


EMPTY = Assignment()
