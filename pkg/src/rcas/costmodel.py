"""Parameter and multiply-add counts for depthwise-separable blocks.

A block is three layers: a grouped 1x1 expansion (C1 -> C1*t, ``g_e`` groups),
a kxk depthwise conv with stride s, and a grouped linear 1x1 projection
(C1*t -> C2, ``g_p`` groups). Only convolution weights are counted; biases and
batch-norm affine parameters are left out. One multiply-accumulate counts as 1.
All arithmetic is integer.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Literal, Mapping

from .domain import Assignment, BlockCatalog, BlockType, Cost, Element, Position, Skeleton
from .errors import CostModelError, GroupMismatch, NonIntegerChannels

LayerKind = Literal["expansion", "depthwise", "projection"]


@dataclass(frozen=True)
class LayerCost:
    layer_kind: LayerKind
    params: int
    madds: int


def expanded_channels(t: BlockType, p: Position) -> int:
    hidden = p.in_channels * Fraction(t.expansion_factor)
    if hidden.denominator != 1:
        raise NonIntegerChannels(
            f"C1*t = {p.in_channels}*{t.expansion_factor} is not an integer", p.index
        )
    return int(hidden)


def layer_costs(t: BlockType, p: Position) -> list[LayerCost]:
    c1, c2, s = p.in_channels, p.out_channels, p.stride
    hidden = expanded_channels(t, p)
    if c1 % t.expansion_groups:
        raise GroupMismatch(f"g_e={t.expansion_groups} does not divide C1={c1}", p.index)
    if hidden % t.expansion_groups:
        raise GroupMismatch(f"g_e={t.expansion_groups} does not divide C1*t={hidden}", p.index)
    if hidden % t.projection_groups:
        raise GroupMismatch(f"g_p={t.projection_groups} does not divide C1*t={hidden}", p.index)
    if c2 % t.projection_groups:
        raise GroupMismatch(f"g_p={t.projection_groups} does not divide C2={c2}", p.index)
    if p.height % s or p.width % s:
        raise GroupMismatch(f"stride {s} does not divide {p.height}x{p.width}", p.index)

    in_area = p.height * p.width
    out_area = (p.height // s) * (p.width // s)
    expansion = (c1 // t.expansion_groups) * hidden
    depthwise = t.kernel * t.kernel * hidden
    projection = (hidden // t.projection_groups) * c2
    return [
        LayerCost("expansion", expansion, expansion * in_area),
        LayerCost("depthwise", depthwise, depthwise * out_area),
        LayerCost("projection", projection, projection * out_area),
    ]


def block_cost(t: BlockType, p: Position) -> Cost:
    layers = layer_costs(t, p)
    return Cost(sum(l.params for l in layers), sum(l.madds for l in layers))


def assignment_cost(a: Assignment, sk: Skeleton, cat: BlockCatalog) -> Cost:
    total = Cost(sk.fixed_param_overhead, sk.fixed_madds_overhead)
    for pos, block in a.items:
        total = total + block_cost(cat[block], sk.positions[pos])
    return total


def element_cost(e: Element, sk: Skeleton, cat: BlockCatalog) -> Cost:
    return block_cost(cat[e.block], sk.positions[e.position])


class CostModel:
    """Modular cost backend: per-element costs plus a fixed overhead.

    Subclasses fill ``_table`` with a cost for every (position, type) pair.
    """

    n_positions: int
    n_types: int
    overhead: Cost
    _table: dict[Element, Cost]

    def element_cost(self, e: Element) -> Cost:
        try:
            return self._table[e]
        except KeyError:
            raise CostModelError(f"no cost for element {e}", e.position) from None

    def assignment_cost(self, a: Assignment) -> Cost:
        total = self.overhead
        for e in a.elements():
            total = total + self.element_cost(e)
        return total

    def ground_set(self) -> list[Element]:
        return sorted(self._table)


class ConvCostModel(CostModel):
    def __init__(self, skeleton: Skeleton, catalog: BlockCatalog):
        self.skeleton = skeleton
        self.catalog = catalog
        self.n_positions = len(skeleton)
        self.n_types = len(catalog)
        self.overhead = Cost(skeleton.fixed_param_overhead, skeleton.fixed_madds_overhead)
        self._table = {
            Element(p.index, t.id): block_cost(t, p)
            for p in skeleton.positions
            for t in catalog.types
        }

    def layer_table(self, a: Assignment) -> list[dict]:
        rows = []
        for pos, block in a.items:
            for layer in layer_costs(self.catalog[block], self.skeleton.positions[pos]):
                rows.append(
                    {
                        "position": pos,
                        "type": block,
                        "layer": layer.layer_kind,
                        "params": layer.params,
                        "madds": layer.madds,
                    }
                )
        return rows


class TableCostModel(CostModel):
    """Explicit per-element costs, bypassing the convolution formulas."""

    def __init__(
        self,
        n_positions: int,
        n_types: int,
        costs: Mapping[Element, Cost] | Iterable[tuple[Element, Cost]],
        overhead: Cost = Cost(),
    ):
        self.n_positions = n_positions
        self.n_types = n_types
        self.overhead = overhead
        table = dict(costs)
        for e in table:
            if not (0 <= e.position < n_positions and 1 <= e.block <= n_types):
                raise CostModelError(f"element {e} outside {n_positions}x{n_types}", e.position)
        missing = [
            (n, l) for n in range(n_positions) for l in range(1, n_types + 1)
            if Element(n, l) not in table
        ]
        if missing:
            raise CostModelError(f"cost table misses elements {missing[:5]}")
        self._table = table
