"""Seeded random problem instances for tests, benchmarks and the bundled configs."""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from .costmodel import CostModel, TableCostModel
from .domain import Budget, Cost, Element, ground_set
from .objective import (
    ConcaveModularOracle,
    CoverageOracle,
    Objective,
    SurrogateAccuracyOracle,
)


@dataclass
class Instance:
    objective: Objective
    costs: CostModel
    budget: Budget
    label: str = ""


def random_table_costs(n_positions: int, n_types: int, rng: random.Random, lo: int = 1, hi: int = 100) -> TableCostModel:
    table = {
        e: Cost(rng.randint(lo, hi), rng.randint(lo, hi)) for e in ground_set(n_positions, n_types)
    }
    return TableCostModel(n_positions, n_types, table)


def random_budget(costs: CostModel, rng: random.Random, lo: float = 0.15, hi: float = 0.8) -> Budget:
    """Budget as a random fraction of the most expensive full assignment, per resource."""
    max_params = max_madds = 0
    for n in range(costs.n_positions):
        row = [costs.element_cost(Element(n, l)) for l in range(1, costs.n_types + 1)]
        max_params += max(c.params for c in row)
        max_madds += max(c.madds for c in row)
    return Budget(
        costs.overhead.params + int(rng.uniform(lo, hi) * max_params),
        costs.overhead.madds + int(rng.uniform(lo, hi) * max_madds),
    )


def random_coverage(
    n_positions: int,
    n_types: int,
    rng: random.Random,
    universe: int | None = None,
    cover_size: tuple[int, int] = (1, 6),
) -> CoverageOracle:
    universe = universe or max(4, 3 * n_positions * n_types // 2)
    # integer weights summing to 2**20: every score and score difference is exact in binary floating point
    cuts = sorted(rng.sample(range(1, 2**20), universe - 1))
    weights = [b - a for a, b in zip([0] + cuts, cuts + [2**20])]
    cover = {
        e: sorted(rng.sample(range(universe), min(universe, rng.randint(*cover_size))))
        for e in ground_set(n_positions, n_types)
    }
    return CoverageOracle(weights, cover)


def random_concave_modular(
    n_positions: int, n_types: int, rng: random.Random, n_features: int = 4, rho: float | None = None
) -> ConcaveModularOracle:
    features = {
        e: [rng.random() if rng.random() < 0.6 else 0.0 for _ in range(n_features)]
        for e in ground_set(n_positions, n_types)
    }
    weights = [rng.uniform(0.5, 1.5) for _ in range(n_features)]
    return ConcaveModularOracle(features, weights, rho if rho is not None else rng.uniform(0.3, 0.8))


def surrogate_for_costs(
    costs: CostModel,
    rng: random.Random,
    kappa: float | None = None,
    sigma: float = 0.0,
    seed: int = 0,
) -> SurrogateAccuracyOracle:
    """Qualities grow with the square root of a block's parameter count, times a random factor."""
    elements = costs.ground_set()
    mean = sum(costs.element_cost(e).params for e in elements) / len(elements) or 1.0
    quality = {
        e: (costs.element_cost(e).params / mean) ** 0.5 * rng.uniform(0.5, 1.5) for e in elements
    }
    if kappa is None:
        kappa = max(1e-9, sum(quality.values()) / costs.n_types / 2)
    return SurrogateAccuracyOracle(quality, kappa, sigma, seed)


class HashOracle(Objective):
    """Arbitrary (non-monotone, non-submodular) set function: a seeded hash of the assignment."""

    def __init__(self, seed: int = 0, **kw):
        super().__init__(**kw)
        self.seed = seed

    def _score(self, a, fid):
        digest = hashlib.sha256(f"{self.seed}|{a.key()}|{fid.level!r}".encode()).digest()
        return int.from_bytes(digest[:8], "big") / 2**64


def coverage_instance(n_positions: int, n_types: int, seed: int, **kw) -> Instance:
    rng = random.Random(seed)
    costs = random_table_costs(n_positions, n_types, rng)
    F = random_coverage(n_positions, n_types, rng, **kw)
    return Instance(F, costs, random_budget(costs, rng), f"coverage-{n_positions}x{n_types}-s{seed}")


def concave_instance(n_positions: int, n_types: int, seed: int, **kw) -> Instance:
    rng = random.Random(seed)
    costs = random_table_costs(n_positions, n_types, rng)
    F = random_concave_modular(n_positions, n_types, rng, **kw)
    return Instance(F, costs, random_budget(costs, rng), f"concave-{n_positions}x{n_types}-s{seed}")


def surrogate_instance(n_positions: int, n_types: int, seed: int, sigma: float = 0.0) -> Instance:
    rng = random.Random(seed)
    costs = random_table_costs(n_positions, n_types, rng)
    F = surrogate_for_costs(costs, rng, sigma=sigma, seed=seed)
    return Instance(F, costs, random_budget(costs, rng), f"surrogate-{n_positions}x{n_types}-s{seed}")


def hash_instance(n_positions: int, n_types: int, seed: int) -> Instance:
    rng = random.Random(seed)
    costs = random_table_costs(n_positions, n_types, rng)
    return Instance(HashOracle(seed), costs, random_budget(costs, rng), f"hash-{n_positions}x{n_types}-s{seed}")


def counterexample_instance() -> Instance:
    """Two blocks at two positions: Param(v1)=1, Param(v2)=100, F modular with F(v1)=3, F(v2)=200.

    The MAdds budget is slack; madds mirror the parameter counts.
    """
    from .objective import ModularOracle

    v1, v2 = Element(0, 1), Element(1, 1)
    costs = TableCostModel(2, 1, {v1: Cost(1, 1), v2: Cost(100, 100)})
    F = ModularOracle({v1: 3.0, v2: 200.0})
    return Instance(F, costs, Budget(100, 10**9), "counterexample")
