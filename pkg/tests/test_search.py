import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import coverage_value, naive_greedy
from rcas import (
    Assignment,
    Budget,
    Cost,
    CostMode,
    CoverageOracle,
    Element,
    ModularOracle,
    SearchOptions,
    TableCostModel,
    TableOracle,
    replay_trace,
    run_greedy,
    run_lazy_ceg,
    run_rcas,
)
from rcas.domain import EMPTY, ground_set
from rcas.errors import EvaluatorFailure, TraceCorrupt
from rcas.instances import (
    concave_instance,
    counterexample_instance,
    coverage_instance,
    hash_instance,
    surrogate_instance,
)
from rcas.objective import Objective
from rcas.search import TraceEvent, compute_phi, read_trace_csv, trace_csv

MODES = list(CostMode)


# --- the two-block counterexample -------------------------------------------------


@pytest.mark.parametrize(
    "mode,expected", [(CostMode.UNIFORM_COST, 200.0), (CostMode.PARAM_RATIO, 3.0), (CostMode.MADDS_RATIO, 3.0)]
)
@pytest.mark.parametrize("engine", [run_greedy, run_lazy_ceg])
def test_counterexample_per_mode(engine, mode, expected):
    inst = counterexample_instance()
    r = engine(inst.objective, inst.costs, inst.budget, mode)
    assert r.value == expected


def test_counterexample_rcas_recovers():
    inst = counterexample_instance()
    r = run_rcas(inst.objective, inst.costs, inst.budget)
    assert r.best.value == 200.0
    assert r.best.mode is CostMode.UNIFORM_COST
    assert r.best.assignment == Assignment.from_mapping({1: 1})
    assert r.by_mode[CostMode.PARAM_RATIO].value == 3.0


# --- edge cases --------------------------------------------------------------------


@pytest.mark.parametrize("engine", [run_greedy, run_lazy_ceg])
def test_zero_budget_returns_empty(engine):
    inst = coverage_instance(3, 2, 0)
    r = engine(inst.objective, inst.costs, Budget(0, 0), CostMode.PARAM_RATIO)
    assert r.assignment == EMPTY
    assert r.value == 0.0
    assert r.stats.phi == 0.0


def test_budget_below_overhead_rejected():
    costs = TableCostModel(1, 1, {Element(0, 1): Cost(1, 1)}, overhead=Cost(10, 10))
    with pytest.raises(ValueError):
        run_greedy(ModularOracle({Element(0, 1): 1.0}), costs, Budget(5, 5))


@pytest.mark.parametrize("engine", [run_greedy, run_lazy_ceg])
def test_single_element_ground_set(engine):
    e = Element(0, 1)
    costs = TableCostModel(1, 1, {e: Cost(4, 9)})
    F = ModularOracle({e: 0.5})
    assert engine(F, costs, Budget(4, 9), CostMode.MADDS_RATIO).assignment == Assignment.from_elements([e])
    assert engine(F, costs, Budget(3, 9), CostMode.MADDS_RATIO).assignment == EMPTY


@pytest.mark.parametrize("engine", [run_greedy, run_lazy_ceg])
def test_zero_cost_elements_rank_first(engine):
    free, paid = Element(0, 1), Element(1, 1)
    costs = TableCostModel(2, 1, {free: Cost(0, 0), paid: Cost(1, 1)})
    F = ModularOracle({free: 0.01, paid: 5.0})
    r = engine(F, costs, Budget(1, 1), CostMode.PARAM_RATIO)
    assert r.trace[[ev.action for ev in r.trace].index("accept")].element == free
    assert r.assignment == Assignment.from_elements([free, paid])
    assert r.stats.phi == math.inf


@pytest.mark.parametrize("engine", [run_greedy, run_lazy_ceg])
def test_ties_break_by_position_then_type(engine):
    costs = TableCostModel(2, 2, {e: Cost(1, 1) for e in ground_set(2, 2)})
    F = ModularOracle({e: 1.0 for e in ground_set(2, 2)})
    r = engine(F, costs, Budget(1, 1))
    assert r.assignment == Assignment.from_elements([Element(0, 1)])


@pytest.mark.parametrize("engine", [run_greedy, run_lazy_ceg])
def test_stop_on_nonpositive_gain(engine):
    a, b = Element(0, 1), Element(1, 1)
    costs = TableCostModel(2, 1, {a: Cost(1, 1), b: Cost(1, 1)})
    F = ModularOracle({a: 1.0, b: -1.0})
    full = engine(F, costs, Budget(5, 5))
    stopped = engine(F, costs, Budget(5, 5), options=SearchOptions(stop_on_nonpositive_gain=True))
    assert full.assignment == Assignment.from_elements([a, b])
    assert stopped.assignment == Assignment.from_elements([a])


def test_restricted_ground_set():
    inst = coverage_instance(3, 2, 4)
    ground = [Element(0, 1), Element(2, 2)]
    r = run_lazy_ceg(inst.objective, inst.costs, Budget(10**6, 10**6), ground=ground)
    assert set(r.assignment.elements()) <= set(ground)


# --- oracle replay -----------------------------------------------------------------


def _oracle_greedy(inst, mode, **kw):
    F, costs = inst.objective, inst.costs
    cover = {(e.position, e.block): sorted(items) for e, items in F.cover.items()}
    f = lambda s: coverage_value(F.weights, cover, s)
    cost_of = lambda e: (costs.element_cost(Element(*e)).params, costs.element_cost(Element(*e)).madds)
    unit_of = lambda e: mode.unit_cost(costs.element_cost(Element(*e)))
    return naive_greedy(
        f, cost_of, (costs.overhead.params, costs.overhead.madds),
        (inst.budget.max_params, inst.budget.max_madds), costs.n_positions, costs.n_types, unit_of, **kw,
    )


@pytest.mark.parametrize("seed", range(15))
@pytest.mark.parametrize("mode", MODES)
def test_greedy_matches_naive_oracle(seed, mode):
    inst = coverage_instance(3, 2, seed)
    expected = _oracle_greedy(inst, mode)
    for engine in (run_greedy, run_lazy_ceg):
        r = engine(inst.objective, inst.costs, inst.budget, mode)
        assert frozenset(r.assignment.items) == expected


@pytest.mark.parametrize("seed", range(40))
@pytest.mark.parametrize("mode", MODES)
def test_lazy_equals_eager_small(seed, mode):
    inst = (coverage_instance if seed % 2 else concave_instance)(4, 2, seed)
    eager = run_greedy(inst.objective, inst.costs, inst.budget, mode)
    lazy = run_lazy_ceg(inst.objective, inst.costs, inst.budget, mode)
    assert lazy.assignment == eager.assignment
    assert lazy.value == eager.value


def test_lazy_saves_evaluations():
    inst = coverage_instance(20, 3, 11)
    eager = run_greedy(inst.objective, inst.costs, inst.budget, CostMode.PARAM_RATIO)
    inst2 = coverage_instance(20, 3, 11)
    lazy = run_lazy_ceg(inst2.objective, inst2.costs, inst2.budget, CostMode.PARAM_RATIO)
    assert lazy.assignment == eager.assignment
    assert lazy.stats.evaluations < eager.stats.evaluations


# --- non-submodular objectives -----------------------------------------------------


def _supermodular_instance():
    a, b, c = Element(0, 1), Element(1, 1), Element(2, 1)
    values = {
        (): 0.0,
        ((0, 1),): 0.3,
        ((1, 1),): 0.1,
        ((2, 1),): 0.2,
        ((0, 1), (1, 1)): 0.35,
        ((1, 1), (2, 1)): 0.9,
        ((0, 1), (2, 1)): 0.4,
        ((0, 1), (1, 1), (2, 1)): 0.95,
    }
    F = TableOracle({Assignment(k): v for k, v in values.items()})
    costs = TableCostModel(3, 1, {a: Cost(1, 1), b: Cost(1, 1), c: Cost(1, 1)})
    return F, costs


def test_lazy_on_supermodular_is_feasible_and_traced():
    F, costs = _supermodular_instance()
    r = run_lazy_ceg(F, costs, Budget(2, 2))
    assert r.cost.params <= 2 and r.cost.madds <= 2
    assert replay_trace(r.trace) == r.assignment
    assert [ev.step for ev in r.trace] == list(range(len(r.trace)))
    assert r.value == F.evaluate(r.assignment)


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("engine", [run_greedy, run_lazy_ceg])
def test_hash_objective_terminates_within_budget(seed, engine):
    inst = hash_instance(5, 3, seed)
    r = engine(inst.objective, inst.costs, inst.budget, MODES[seed % 3])
    assert inst.budget.admits(r.cost)
    assert inst.costs.assignment_cost(r.assignment) == r.cost
    assert replay_trace(r.trace) == r.assignment


def test_paper_literal_lazy_feasible():
    for seed in range(10):
        inst = coverage_instance(6, 3, seed)
        r = run_lazy_ceg(
            inst.objective, inst.costs, inst.budget, CostMode.PARAM_RATIO,
            options=SearchOptions(paper_literal_lazy=True),
        )
        assert inst.budget.admits(r.cost)
        assert replay_trace(r.trace) == r.assignment


def test_parallel_first_pass_same_result():
    inst = coverage_instance(8, 3, 3)
    seq = run_lazy_ceg(inst.objective, inst.costs, inst.budget, CostMode.MADDS_RATIO)
    inst = coverage_instance(8, 3, 3)
    par = run_lazy_ceg(
        inst.objective, inst.costs, inst.budget, CostMode.MADDS_RATIO,
        options=SearchOptions(parallel_first_pass=True, max_workers=4),
    )
    assert par.assignment == seq.assignment and par.value == seq.value


# --- properties --------------------------------------------------------------------


@settings(max_examples=60)
@given(
    seed=st.integers(0, 10**6),
    n=st.integers(1, 5),
    l=st.integers(1, 3),
    mode=st.sampled_from(MODES),
    kind=st.sampled_from(["coverage", "surrogate", "hash"]),
    lazy=st.booleans(),
)
def test_budget_never_exceeded(seed, n, l, mode, kind, lazy):
    if kind == "coverage":
        inst = coverage_instance(n, l, seed)
    elif kind == "surrogate":
        inst = surrogate_instance(n, l, seed, sigma=0.05)
    else:
        inst = hash_instance(n, l, seed)
    engine = run_lazy_ceg if lazy else run_greedy
    r = engine(inst.objective, inst.costs, inst.budget, mode, fidelity=0.5)
    assert inst.budget.admits(inst.costs.assignment_cost(r.assignment))
    # partition constraint
    positions = [p for p, _ in r.assignment.items]
    assert len(positions) == len(set(positions))


@settings(max_examples=40)
@given(seed=st.integers(0, 10**6), mode=st.sampled_from(MODES))
def test_trace_is_monotone_for_monotone_objective(seed, mode):
    inst = coverage_instance(5, 3, seed)
    r = run_lazy_ceg(inst.objective, inst.costs, inst.budget, mode)
    accepted = [ev.f_after for ev in r.trace if ev.action == "accept"]
    assert accepted == sorted(accepted)
    costs = [(ev.params_after, ev.madds_after) for ev in r.trace]
    assert costs == sorted(costs)


@pytest.mark.parametrize("engine", [run_greedy, run_lazy_ceg])
def test_deterministic(engine):
    runs = []
    for _ in range(3):
        inst = surrogate_instance(6, 3, 9, sigma=0.05)
        r = engine(inst.objective, inst.costs, inst.budget, CostMode.PARAM_RATIO, fidelity=0.4)
        runs.append((r.assignment, r.value, trace_csv(r.trace)))
    assert runs[0] == runs[1] == runs[2]


def test_evaluation_count_bounded_by_phi():
    # each accepted element costs at least min cost, so rounds <= phi; eager evaluates <= |V| per round
    inst = coverage_instance(6, 3, 2)
    r = run_greedy(inst.objective, inst.costs, inst.budget, CostMode.PARAM_RATIO)
    rounds = len(r.assignment) + 1
    assert rounds <= r.stats.phi + 1
    assert r.stats.evaluations <= 1 + rounds * 18


def test_phi_matches_definition():
    costs = TableCostModel(2, 1, {Element(0, 1): Cost(10, 50), Element(1, 1): Cost(40, 5)})
    assert compute_phi(costs, Budget(100, 100), costs.ground_set()) == 20.0
    # elements that cannot fit alone do not count
    assert compute_phi(costs, Budget(20, 100), costs.ground_set()) == 2.0


# --- RCAS ---------------------------------------------------------------------------


class _CallLimited(Objective):
    """Uncached objective that starts failing after a fixed number of evaluations."""

    def __init__(self, inner, limit):
        super().__init__(cache_size=0)
        self.inner = inner
        self.limit = limit
        self.n_calls = 0

    def _score(self, a, fid):
        self.n_calls += 1
        if self.n_calls > self.limit:
            raise EvaluatorFailure("worker crashed")
        return self.inner.evaluate(a, fid)


def test_rcas_tolerates_failed_mode(caplog):
    inst = coverage_instance(3, 2, 5)
    probe = _CallLimited(inst.objective, 10**9)
    alone = run_lazy_ceg(probe, inst.costs, inst.budget, CostMode.MADDS_RATIO)
    F = _CallLimited(inst.objective, probe.n_calls)
    r = run_rcas(F, inst.costs, inst.budget, modes=[CostMode.MADDS_RATIO, CostMode.PARAM_RATIO])
    assert r.warning
    assert list(r.failures) == [CostMode.PARAM_RATIO]
    assert r.best.mode is CostMode.MADDS_RATIO
    assert r.best.assignment == alone.assignment
    assert r.to_json()["failures"] == {"apr": "worker crashed"}
    assert "failed" in caplog.text


def test_rcas_all_modes_fail():
    inst = coverage_instance(3, 2, 5)
    with pytest.raises(EvaluatorFailure):
        run_rcas(_CallLimited(inst.objective, 0), inst.costs, inst.budget)


def test_rcas_ties_prefer_uniform_cost():
    inst = coverage_instance(3, 2, 1)
    r = run_rcas(inst.objective, inst.costs, Budget(10**6, 10**6))
    values = {m: res.value for m, res in r.by_mode.items()}
    top = max(values.values())
    first = next(m for m in MODES if values[m] == top)
    assert r.best.mode is first


def test_rcas_refines_at_higher_fidelity():
    inst = surrogate_instance(4, 3, 5, sigma=0.1)
    r = run_rcas(inst.objective, inst.costs, inst.budget, fidelity=0.2, refine_fidelity=1.0)
    for res in r.by_mode.values():
        assert res.fidelity.level == 1.0
        assert res.value == inst.objective.evaluate(res.assignment, 1.0)


def test_rcas_at_least_each_mode():
    for seed in range(10):
        inst = concave_instance(4, 3, seed)
        r = run_rcas(inst.objective, inst.costs, inst.budget)
        for mode in MODES:
            single = run_lazy_ceg(inst.objective, inst.costs, inst.budget, mode)
            assert r.best.value >= single.value


# --- traces ---------------------------------------------------------------------------


def _ev(step, action, element, f=0.0):
    return TraceEvent(step, action, element, None, None, f, 0, 0, 0)


def test_replay_rejects_refill():
    trace = [_ev(0, "accept", Element(0, 1)), _ev(1, "accept", Element(0, 2))]
    with pytest.raises(TraceCorrupt):
        replay_trace(trace)


def test_replay_rejects_unordered_steps():
    with pytest.raises(TraceCorrupt):
        replay_trace([_ev(1, "evaluate", Element(0, 1)), _ev(0, "accept", Element(0, 1))])


def test_replay_rejects_unknown_action():
    with pytest.raises(TraceCorrupt):
        replay_trace([_ev(0, "explode", Element(0, 1))])


def test_replay_ignores_non_accept_events():
    trace = [_ev(0, "evaluate", Element(0, 1)), _ev(1, "reinsert", Element(0, 2)), _ev(2, "accept", Element(1, 1))]
    assert replay_trace(trace) == Assignment.from_elements([Element(1, 1)])


@pytest.mark.parametrize("engine", [run_greedy, run_lazy_ceg])
def test_trace_csv_round_trip(engine):
    inst = surrogate_instance(5, 3, 8, sigma=0.03)
    r = engine(inst.objective, inst.costs, inst.budget, CostMode.MADDS_RATIO, fidelity=0.7)
    text = trace_csv(r.trace)
    assert read_trace_csv(text) == list(r.trace)
    assert replay_trace(read_trace_csv(text)) == r.assignment
    assert text.splitlines()[0] == "step,action,position,type,key_before,key_after,F_after,params_after,madds_after,evaluations"


def test_trace_evaluation_counter_matches_stats():
    inst = coverage_instance(6, 2, 6)
    r = run_lazy_ceg(inst.objective, inst.costs, inst.budget, CostMode.PARAM_RATIO)
    assert r.trace[-1].evaluations == r.stats.evaluations
    assert r.stats.reinserts == sum(ev.action == "reinsert" for ev in r.trace)


def test_cache_shared_across_modes_counts_hits():
    inst = coverage_instance(4, 2, 3)
    run_lazy_ceg(inst.objective, inst.costs, inst.budget, CostMode.UNIFORM_COST)
    second = run_lazy_ceg(inst.objective, inst.costs, inst.budget, CostMode.UNIFORM_COST)
    assert second.stats.evaluations == 0
    assert second.stats.cache_hits > 0


def test_coverage_objective_explicit():
    a, b, c = Element(0, 1), Element(1, 1), Element(1, 2)
    F = CoverageOracle([1, 1, 2], {a: [0], b: [0, 1], c: [2]})
    costs = TableCostModel(2, 2, {a: Cost(1, 1), Element(0, 2): Cost(9, 9), b: Cost(1, 1), c: Cost(3, 3)})
    r = run_greedy(F, costs, Budget(4, 4), CostMode.PARAM_RATIO)
    # ratios: a 0.5, b 1.0, c 0.5/3; b first, then a adds nothing new but still fits
    assert r.assignment == Assignment.from_elements([a, b])
    assert r.trace[-1].f_after == 0.5
