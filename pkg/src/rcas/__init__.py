"""Budgeted greedy search over block-type-at-position assignments."""
from .costmodel import ConvCostModel, LayerCost, TableCostModel, assignment_cost, block_cost, element_cost
from .domain import (
    EMPTY,
    Assignment,
    BlockCatalog,
    BlockType,
    Budget,
    Cost,
    Element,
    Position,
    Skeleton,
    assignment_add,
    feasible_elements,
    ground_set,
)
from .evaluator import ExternalObjective, external_eval_session
from .objective import (
    FULL,
    ConcaveModularOracle,
    CoverageOracle,
    EvalRecord,
    Fidelity,
    ModularOracle,
    Objective,
    SurrogateAccuracyOracle,
    TableOracle,
    marginal_gain,
)
from .oracle import brute_force_opt, chain_report, check_submodularity, convex_hull_report
from .search import (
    ALL_MODES,
    CostMode,
    RcasResult,
    SearchOptions,
    SearchResult,
    SearchStats,
    TraceEvent,
    replay_trace,
    run_greedy,
    run_lazy_ceg,
    run_rcas,
)

__version__ = "0.1.0"
