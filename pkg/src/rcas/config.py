"""JSON run configuration: parsing, validation, canonical emission, and object construction."""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from .costmodel import ConvCostModel, CostModel, TableCostModel
from .domain import BlockCatalog, BlockType, Budget, Cost, Element, Position, Skeleton
from .errors import ConfigError, CostModelError
from .evaluator import external_eval_session
from .instances import random_concave_modular, random_coverage, random_table_costs, surrogate_for_costs
from .objective import (
    ConcaveModularOracle,
    CoverageOracle,
    Fidelity,
    ModularOracle,
    Objective,
    SurrogateAccuracyOracle,
)
from .search import SearchOptions

OBJECTIVE_KINDS = ("coverage", "concave_modular", "surrogate", "modular", "external")
COST_KINDS = ("conv", "table", "random_table")
MODES = ("uc", "apr", "amr", "rcas")


@dataclass
class RunConfig:
    skeleton: Skeleton
    catalog: BlockCatalog
    budget: Budget
    objective: dict
    costs: dict = field(default_factory=lambda: {"kind": "conv"})
    fidelity: Fidelity = Fidelity(1.0)
    refine_fidelity: Fidelity = Fidelity(1.0)
    seed: int = 0
    mode: str = "rcas"
    engine: SearchOptions = SearchOptions()
    out_dir: str = "out"
    name: str = ""
    brute_cap: int = 2**20
    diagnose: dict = field(default_factory=dict)
    bench: dict = field(default_factory=dict)

    def rng(self, stream: str) -> random.Random:
        return random.Random(f"{self.seed}:{stream}")


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return obj[key]


def _parse_fraction(x) -> Fraction:
    try:
        return Fraction(str(x))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad rational {x!r}") from exc


def parse_catalog(rows: list) -> BlockCatalog:
    types = []
    for i, row in enumerate(rows):
        types.append(
            BlockType(
                id=int(row.get("id", i + 1)),
                expansion_factor=_parse_fraction(_require(row, "expansion_factor", f"catalog[{i}]")),
                expansion_groups=int(row.get("expansion_groups", 1)),
                projection_groups=int(row.get("projection_groups", 1)),
                kernel=int(row.get("kernel", 3)),
                label=str(row.get("label", "")),
            )
        )
    return BlockCatalog(tuple(types))


def _position(index: int, row: dict) -> Position:
    c1 = row.get("in_channels", row.get("channels"))
    c2 = row.get("out_channels", row.get("channels"))
    if c1 is None or c2 is None:
        raise ConfigError(f"skeleton position {index}: give channels or in/out_channels")
    return Position(
        index=index,
        in_channels=int(c1),
        out_channels=int(c2),
        height=int(_require(row, "height", f"position {index}")),
        width=int(row.get("width", row["height"])),
        stride=int(row.get("stride", 1)),
    )


def parse_skeleton(obj: dict) -> Skeleton:
    if ("positions" in obj) == ("stages" in obj):
        raise ConfigError("skeleton: give exactly one of 'positions' or 'stages'")
    rows = []
    if "positions" in obj:
        rows = list(obj["positions"])
    else:
        for stage in obj["stages"]:
            rows += [stage] * int(stage.get("count", 1))
    return Skeleton(
        tuple(_position(i, r) for i, r in enumerate(rows)),
        int(obj.get("fixed_param_overhead", 0)),
        int(obj.get("fixed_madds_overhead", 0)),
    )


def parse_config(obj: dict) -> RunConfig:
    try:
        engine = obj.get("engine", {})
        unknown = set(engine) - {"stop_on_nonpositive_gain", "paper_literal_lazy", "parallel_first_pass", "max_workers"}
        if unknown:
            raise ConfigError(f"engine: unknown flags {sorted(unknown)}")
        budget = _require(obj, "budget", "config")
        cfg = RunConfig(
            skeleton=parse_skeleton(_require(obj, "skeleton", "config")),
            catalog=parse_catalog(_require(obj, "catalog", "config")),
            budget=Budget(int(_require(budget, "max_params", "budget")), int(_require(budget, "max_madds", "budget"))),
            objective=dict(_require(obj, "objective", "config")),
            costs=dict(obj.get("costs", {"kind": "conv"})),
            fidelity=Fidelity(float(obj.get("fidelity", 1.0))),
            refine_fidelity=Fidelity(float(obj.get("refine_fidelity", 1.0))),
            seed=int(obj.get("seed", 0)),
            mode=str(obj.get("mode", "rcas")),
            engine=SearchOptions(**engine),
            out_dir=str(obj.get("out_dir", "out")),
            name=str(obj.get("name", "")),
            brute_cap=int(obj.get("brute_cap", 2**20)),
            diagnose=dict(obj.get("diagnose", {})),
            bench=dict(obj.get("bench", {})),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError("seed must be a u64")
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    if cfg.objective.get("kind") not in OBJECTIVE_KINDS:
        raise ConfigError(f"objective.kind must be one of {OBJECTIVE_KINDS}")
    if cfg.costs.get("kind") not in COST_KINDS:
        raise ConfigError(f"costs.kind must be one of {COST_KINDS}")
    # surfaces divisibility problems before any evaluation
    costs = build_costs(cfg)
    if not cfg.budget.admits(costs.overhead):
        raise ConfigError(f"budget {cfg.budget} cannot cover the fixed overhead {costs.overhead}")
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(obj)


def emit_config(cfg: RunConfig) -> dict:
    """Canonical JSON form; ``parse_config(emit_config(c)) == c``."""
    sk = cfg.skeleton
    engine = {
        "stop_on_nonpositive_gain": cfg.engine.stop_on_nonpositive_gain,
        "paper_literal_lazy": cfg.engine.paper_literal_lazy,
        "parallel_first_pass": cfg.engine.parallel_first_pass,
    }
    if cfg.engine.max_workers is not None:
        engine["max_workers"] = cfg.engine.max_workers
    return {
        "name": cfg.name,
        "seed": cfg.seed,
        "mode": cfg.mode,
        "fidelity": cfg.fidelity.level,
        "refine_fidelity": cfg.refine_fidelity.level,
        "catalog": [
            {
                "id": t.id,
                "expansion_factor": str(t.expansion_factor),
                "expansion_groups": t.expansion_groups,
                "projection_groups": t.projection_groups,
                "kernel": t.kernel,
                "label": t.label,
            }
            for t in cfg.catalog.types
        ],
        "skeleton": {
            "positions": [
                {
                    "in_channels": p.in_channels,
                    "out_channels": p.out_channels,
                    "height": p.height,
                    "width": p.width,
                    "stride": p.stride,
                }
                for p in sk.positions
            ],
            "fixed_param_overhead": sk.fixed_param_overhead,
            "fixed_madds_overhead": sk.fixed_madds_overhead,
        },
        "costs": cfg.costs,
        "budget": cfg.budget.to_json(),
        "objective": cfg.objective,
        "engine": engine,
        "out_dir": cfg.out_dir,
        "brute_cap": cfg.brute_cap,
        "diagnose": cfg.diagnose,
        "bench": cfg.bench,
    }


def _element(row: dict) -> Element:
    return Element(int(row["position"]), int(row["type"]))


def build_costs(cfg: RunConfig) -> CostModel:
    spec = cfg.costs
    n, l = len(cfg.skeleton), len(cfg.catalog)
    try:
        if spec["kind"] == "conv":
            return ConvCostModel(cfg.skeleton, cfg.catalog)
        overhead = Cost(cfg.skeleton.fixed_param_overhead, cfg.skeleton.fixed_madds_overhead)
        if spec["kind"] == "table":
            table = {_element(r): Cost(int(r["params"]), int(r["madds"])) for r in spec["table"]}
            return TableCostModel(n, l, table, overhead)
        model = random_table_costs(n, l, cfg.rng("costs"), int(spec.get("lo", 1)), int(spec.get("hi", 100)))
        return TableCostModel(n, l, {e: model.element_cost(e) for e in model.ground_set()}, overhead)
    except CostModelError as exc:
        raise ConfigError(f"cost model: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"costs: {exc}") from exc


def build_objective(cfg: RunConfig, costs: CostModel | None = None) -> Objective:
    """Construct the objective; ``external`` spawns the evaluator process."""
    spec = cfg.objective
    kind = spec["kind"]
    n, l = len(cfg.skeleton), len(cfg.catalog)
    rng = cfg.rng("objective")
    cache_size = spec.get("cache_size")
    try:
        if kind == "external":
            cmd = spec["cmd"]
            if isinstance(cmd, str) or not cmd:
                raise ConfigError("objective.cmd must be a non-empty list of strings")
            return external_eval_session(cmd, float(spec.get("timeout", 60.0)), cache_size=cache_size)
        if kind == "modular":
            values = {_element(r): float(r["value"]) for r in spec["values"]}
            return ModularOracle(values, float(spec.get("offset", 0.0)), cache_size=cache_size)
        if kind == "coverage":
            if "cover" in spec:
                cover = {_element(r): r["items"] for r in spec["cover"]}
                return CoverageOracle(spec["weights"], cover, cache_size=cache_size)
            size = spec.get("cover_size", [1, 6])
            F = random_coverage(n, l, rng, spec.get("universe"), (int(size[0]), int(size[1])))
            F.cache_size = cache_size
            return F
        if kind == "concave_modular":
            if "features" in spec:
                features = {_element(r): r["values"] for r in spec["features"]}
                return ConcaveModularOracle(features, spec["outer_weights"], float(spec["rho"]), cache_size=cache_size)
            F = random_concave_modular(n, l, rng, int(spec.get("n_features", 4)), spec.get("rho"))
            F.cache_size = cache_size
            return F
        # surrogate
        sigma = float(spec.get("sigma", 0.0))
        if "quality" in spec:
            quality = {_element(r): float(r["value"]) for r in spec["quality"]}
            return SurrogateAccuracyOracle(quality, float(spec["kappa"]), sigma, cfg.seed, cache_size=cache_size)
        F = surrogate_for_costs(costs or build_costs(cfg), rng, spec.get("kappa"), sigma, cfg.seed)
        F.cache_size = cache_size
        return F
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"objective: {exc}") from exc


BUNDLED = Path(__file__).parent / "configs"


def bundled_config(name: str) -> Path:
    path = BUNDLED / (name if name.endswith(".json") else name + ".json")
    if not path.exists():
        raise ConfigError(f"no bundled config {name!r}")
    return path
