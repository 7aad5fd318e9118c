"""Greedy engines for set-function maximization under parameter and MAdds budgets.

``run_greedy`` is the eager cost-effective greedy, ``run_lazy_ceg`` its lazy
(CELF) counterpart and ``run_rcas`` runs the lazy engine under the three cost
modes and keeps the best result.

Ordering everywhere: larger gain ratio first, ties broken by ascending
(position, block type id).
"""
from __future__ import annotations

import csv
import enum
import heapq
import io
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Literal, Sequence

from .costmodel import CostModel
from .domain import EMPTY, Assignment, Budget, Cost, Element
from .errors import EvaluatorFailure, TraceCorrupt
from .objective import Fidelity, Objective, as_fidelity

log = logging.getLogger(__name__)


class CostMode(str, enum.Enum):
    UNIFORM_COST = "uc"
    PARAM_RATIO = "apr"
    MADDS_RATIO = "amr"

    def unit_cost(self, c: Cost) -> int:
        if self is CostMode.UNIFORM_COST:
            return 1
        if self is CostMode.PARAM_RATIO:
            return c.params
        return c.madds


ALL_MODES = (CostMode.UNIFORM_COST, CostMode.PARAM_RATIO, CostMode.MADDS_RATIO)


@dataclass(frozen=True)
class SearchOptions:
    stop_on_nonpositive_gain: bool = False
    # compare against a freshly recomputed gain of the queue top instead of its stale key
    paper_literal_lazy: bool = False
    parallel_first_pass: bool = False
    max_workers: int | None = None


Action = Literal["evaluate", "accept", "reinsert", "skip_infeasible"]


@dataclass(frozen=True)
class TraceEvent:
    step: int
    action: Action
    element: Element | None
    key_before: float | None
    key_after: float | None
    f_after: float
    params_after: int
    madds_after: int
    evaluations: int


@dataclass(frozen=True)
class SearchStats:
    evaluations: int
    queue_pops: int
    reinserts: int
    phi: float
    wall_time: float
    cache_hits: int = 0

    def to_json(self) -> dict:
        # wall_time is left out so result files stay byte-reproducible
        return {
            "evaluations": self.evaluations,
            "queue_pops": self.queue_pops,
            "reinserts": self.reinserts,
            "cache_hits": self.cache_hits,
            "phi": None if math.isinf(self.phi) else self.phi,
        }


@dataclass(frozen=True)
class SearchResult:
    assignment: Assignment
    value: float
    fidelity: Fidelity
    cost: Cost
    mode: CostMode
    stats: SearchStats
    trace: tuple[TraceEvent, ...] = ()

    def to_json(self) -> dict:
        return {
            "mode": self.mode.value,
            "value": self.value,
            "fidelity": self.fidelity.level,
            "assignment": self.assignment.to_json(),
            "sequence": self.assignment.sequence(),
            "cost": self.cost.to_json(),
            "stats": self.stats.to_json(),
        }


@dataclass(frozen=True)
class RcasResult:
    best: SearchResult
    by_mode: dict[CostMode, SearchResult]
    failures: dict[CostMode, str] = field(default_factory=dict)
    warning: bool = False

    def to_json(self) -> dict:
        out = self.best.to_json()
        out["mode"] = "rcas"
        out["best_mode"] = self.best.mode.value
        out["modes"] = {m.value: r.to_json() for m, r in self.by_mode.items()}
        out["failures"] = {m.value: msg for m, msg in self.failures.items()}
        out["warning"] = self.warning
        return out


def compute_phi(costs: CostModel, budget: Budget, ground: Iterable[Element]) -> float:
    """max over singly-feasible elements of max(B_p / Param(e), B_m / MAdds(e))."""
    phi = 0.0
    for e in ground:
        c = costs.element_cost(e)
        if not budget.admits(costs.overhead + c):
            continue
        for cap, amount in ((budget.max_params, c.params), (budget.max_madds, c.madds)):
            phi = max(phi, math.inf if amount == 0 else cap / amount)
    return phi


def _priority(gain: float, unit: int) -> tuple[float, float]:
    # zero-cost elements rank above everything, among themselves by raw gain
    if unit == 0:
        return (math.inf, gain)
    return (gain / unit, 0.0)


class _Run:
    """Mutable state shared by the eager and lazy engines for one run."""

    def __init__(self, F, costs, budget, mode, fidelity, options, ground):
        self.F = F
        self.costs = costs
        self.budget = budget
        self.mode = CostMode(mode)
        self.fid = as_fidelity(fidelity)
        self.options = options or SearchOptions()
        self.ground = sorted(ground if ground is not None else costs.ground_set())
        self.S = EMPTY
        self.occupied: set[int] = set()
        self.cost = costs.overhead
        if not budget.admits(self.cost):
            raise ValueError(f"budget {budget} cannot cover the fixed overhead {self.cost}")
        self.start_misses = F.misses
        self.start_hits = F.hits
        self.started = time.perf_counter()
        self.trace: list[TraceEvent] = []
        self.pops = 0
        self.reinserts = 0
        self.phi = compute_phi(costs, budget, self.ground)
        self.f_S = F.evaluate(EMPTY, self.fid)

    @property
    def evaluations(self) -> int:
        return self.F.misses - self.start_misses

    def unit(self, e: Element) -> int:
        return self.mode.unit_cost(self.costs.element_cost(e))

    def feasible(self, e: Element) -> bool:
        if e.position in self.occupied:
            return False
        return self.budget.admits(self.cost + self.costs.element_cost(e))

    def gain(self, e: Element) -> tuple[float, float]:
        value = self.F.evaluate(self.S.add(e), self.fid)
        return value, value - self.f_S

    def first_pass(self, elements: list[Element]) -> list[float]:
        sets = [self.S.add(e) for e in elements]
        if self.options.parallel_first_pass and self.F.concurrency_safe and len(sets) > 1:
            with ThreadPoolExecutor(max_workers=self.options.max_workers) as pool:
                return list(pool.map(lambda a: self.F.evaluate(a, self.fid), sets))
        return [self.F.evaluate(a, self.fid) for a in sets]

    def event(self, action: Action, e: Element | None, key_before=None, key_after=None) -> None:
        self.trace.append(
            TraceEvent(
                step=len(self.trace),
                action=action,
                element=e,
                key_before=key_before,
                key_after=key_after,
                f_after=self.f_S,
                params_after=self.cost.params,
                madds_after=self.cost.madds,
                evaluations=self.evaluations,
            )
        )

    def accept(self, e: Element, value: float, key_before, key_after) -> None:
        self.S = self.S.add(e)
        self.occupied.add(e.position)
        self.cost = self.cost + self.costs.element_cost(e)
        self.f_S = value
        assert self.budget.admits(self.cost), "budget breached"
        self.event("accept", e, key_before, key_after)
        log.debug("%s accept %s F=%.6f cost=%s", self.mode.value, e, value, self.cost)

    def result(self) -> SearchResult:
        stats = SearchStats(
            evaluations=self.evaluations,
            queue_pops=self.pops,
            reinserts=self.reinserts,
            phi=self.phi,
            wall_time=time.perf_counter() - self.started,
            cache_hits=self.F.hits - self.start_hits,
        )
        return SearchResult(self.S, self.f_S, self.fid, self.cost, self.mode, stats, tuple(self.trace))


def run_greedy(
    F: Objective,
    costs: CostModel,
    budget: Budget,
    mode: CostMode = CostMode.UNIFORM_COST,
    fidelity: Fidelity | float | None = None,
    *,
    ground: Sequence[Element] | None = None,
    options: SearchOptions | None = None,
) -> SearchResult:
    """Eager greedy: each round rescans every feasible element and adds the best ratio."""
    run = _Run(F, costs, budget, mode, fidelity, options, ground)
    first = True
    while True:
        candidates = [e for e in run.ground if run.feasible(e)]
        if not candidates:
            break
        if first:
            values = run.first_pass(candidates)
            first = False
        else:
            values = [run.F.evaluate(run.S.add(e), run.fid) for e in candidates]
        best = None
        for e, value in zip(candidates, values):
            gain = value - run.f_S
            key = _priority(gain, run.unit(e))
            run.event("evaluate", e, None, key[0])
            if best is None or key > best[0]:
                best = (key, e, value, gain)
        key, e, value, gain = best
        if run.options.stop_on_nonpositive_gain and gain <= 0:
            break
        run.accept(e, value, key[0], key[0])
    return run.result()


def run_lazy_ceg(
    F: Objective,
    costs: CostModel,
    budget: Budget,
    mode: CostMode = CostMode.UNIFORM_COST,
    fidelity: Fidelity | float | None = None,
    *,
    ground: Sequence[Element] | None = None,
    options: SearchOptions | None = None,
) -> SearchResult:
    """Lazy greedy with a priority queue of possibly stale gain ratios.

    Queue entries remember the selection size at which their key was computed.
    A popped entry with a current key is accepted; otherwise its key is
    recomputed and it is accepted if it still ranks ahead of the (stale) top
    of the queue, or pushed back.
    """
    run = _Run(F, costs, budget, mode, fidelity, options, ground)
    # heap entries: (-ratio, -tiebreak, position, type, freshness, value, gain)
    heap: list[tuple] = []
    candidates = [e for e in run.ground if run.feasible(e)]
    for e, value in zip(candidates, run.first_pass(candidates)):
        gain = value - run.f_S
        key = _priority(gain, run.unit(e))
        run.event("evaluate", e, None, key[0])
        heap.append((-key[0], -key[1], e.position, e.block, 0, value, gain))
    heapq.heapify(heap)

    def prune_top() -> None:
        while heap and not run.feasible(Element(heap[0][2], heap[0][3])):
            item = heapq.heappop(heap)
            run.pops += 1
            run.event("skip_infeasible", Element(item[2], item[3]), -item[0], None)

    while heap:
        neg_ratio, neg_tb, pos, block, fresh, value, gain = heapq.heappop(heap)
        run.pops += 1
        e = Element(pos, block)
        stale_key = -neg_ratio
        if not run.feasible(e):
            # costs only grow, so an infeasible element never becomes feasible again
            run.event("skip_infeasible", e, stale_key, None)
            continue
        if fresh != len(run.S):
            value, gain = run.gain(e)
            key = _priority(gain, run.unit(e))
            run.event("evaluate", e, stale_key, key[0])
            prune_top()
            if heap and not _beats_top(run, e, key, heap[0]):
                heapq.heappush(heap, (-key[0], -key[1], pos, block, len(run.S), value, gain))
                run.reinserts += 1
                run.event("reinsert", e, stale_key, key[0])
                continue
            key_after = key[0]
        else:
            key_after = stale_key
        if run.options.stop_on_nonpositive_gain and gain <= 0:
            break
        run.accept(e, value, stale_key, key_after)
    return run.result()


def _beats_top(run: _Run, e: Element, key: tuple[float, float], top: tuple) -> bool:
    if run.options.paper_literal_lazy:
        u = Element(top[2], top[3])
        _, top_gain = run.gain(u)
        return key[0] >= _priority(top_gain, run.unit(u))[0]
    top_key = (-top[0], -top[1])
    # rank ahead of the top under (key desc, position asc, type asc)
    return (key, -e.position, -e.block) > (top_key, -top[2], -top[3])


def run_rcas(
    F: Objective,
    costs: CostModel,
    budget: Budget,
    fidelity: Fidelity | float | None = None,
    refine_fidelity: Fidelity | float | None = 1.0,
    *,
    ground: Sequence[Element] | None = None,
    options: SearchOptions | None = None,
    modes: Sequence[CostMode] = ALL_MODES,
) -> RcasResult:
    """Lazy greedy under each cost mode; the best refined value wins (ties: UC, APR, AMR)."""
    refine = as_fidelity(refine_fidelity)
    by_mode: dict[CostMode, SearchResult] = {}
    failures: dict[CostMode, str] = {}
    last_exc: EvaluatorFailure | None = None
    for mode in modes:
        try:
            result = run_lazy_ceg(F, costs, budget, mode, fidelity, ground=ground, options=options)
            if refine != result.fidelity:
                result = replace(result, value=F.evaluate(result.assignment, refine), fidelity=refine)
        except EvaluatorFailure as exc:
            log.warning("mode %s failed: %s", mode.value, exc)
            failures[mode] = str(exc)
            last_exc = exc
            continue
        by_mode[mode] = result
    if not by_mode:
        assert last_exc is not None
        raise last_exc
    best = None
    for mode in modes:
        r = by_mode.get(mode)
        if r is not None and (best is None or r.value > best.value):
            best = r
    return RcasResult(best, by_mode, failures, warning=bool(failures))


def run_mode(F, costs, budget, mode: str, fidelity=None, refine_fidelity=1.0, *, options=None):
    """Dispatch for the CLI: ``mode`` is one of uc, apr, amr, rcas."""
    if mode == "rcas":
        return run_rcas(F, costs, budget, fidelity, refine_fidelity, options=options)
    return run_rcas(F, costs, budget, fidelity, refine_fidelity, options=options, modes=(CostMode(mode),))


def replay_trace(trace: Iterable[TraceEvent]) -> Assignment:
    a = EMPTY
    last_step = -1
    for ev in trace:
        if ev.step <= last_step:
            raise TraceCorrupt(f"trace steps not increasing at step {ev.step}")
        last_step = ev.step
        if ev.action not in ("evaluate", "accept", "reinsert", "skip_infeasible"):
            raise TraceCorrupt(f"unknown action {ev.action!r} at step {ev.step}")
        if ev.action != "accept":
            continue
        if ev.element is None:
            raise TraceCorrupt(f"accept without element at step {ev.step}")
        if a.occupies(ev.element.position):
            raise TraceCorrupt(f"step {ev.step} refills position {ev.element.position}")
        a = a.add(ev.element)
    return a


TRACE_COLUMNS = [
    "step", "action", "position", "type", "key_before", "key_after",
    "F_after", "params_after", "madds_after", "evaluations",
]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def trace_csv(trace: Iterable[TraceEvent]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for ev in trace:
        w.writerow(
            [
                ev.step, ev.action,
                _fmt(ev.element.position if ev.element else None),
                _fmt(ev.element.block if ev.element else None),
                _fmt(ev.key_before), _fmt(ev.key_after), _fmt(ev.f_after),
                ev.params_after, ev.madds_after, ev.evaluations,
            ]
        )
    return buf.getvalue()


def read_trace_csv(text: str) -> list[TraceEvent]:
    def num(s, cast=float):
        return None if s == "" else cast(s)

    events = []
    for row in csv.DictReader(io.StringIO(text)):
        pos, typ = num(row["position"], int), num(row["type"], int)
        events.append(
            TraceEvent(
                step=int(row["step"]),
                action=row["action"],
                element=None if pos is None else Element(pos, typ),
                key_before=num(row["key_before"]),
                key_after=num(row["key_after"]),
                f_after=float(row["F_after"]),
                params_after=int(row["params_after"]),
                madds_after=int(row["madds_after"]),
                evaluations=int(row["evaluations"]),
            )
        )
    return events
