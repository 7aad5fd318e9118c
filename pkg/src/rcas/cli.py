"""Command-line entry point: ``rcas {search,cost,brute,diagnose,bench} --config PATH``.

Exit codes: 0 success, 1 configuration error, 2 evaluator failure, 3 internal
invariant breach. Output files are written only after a run succeeds, each via
a temporary file and an atomic rename.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import instances as inst
from .config import RunConfig, build_costs, build_objective, load_config
from .costmodel import ConvCostModel
from .domain import Assignment
from .errors import ConfigError, EvaluatorFailure, InstanceTooLarge, RcasError
from .objective import Fidelity
from .oracle import brute_force_opt, check_submodularity, convex_hull_report
from .search import ALL_MODES, CostMode, RcasResult, replay_trace, run_greedy, run_lazy_ceg, run_mode, trace_csv

log = logging.getLogger("rcas")

EXIT_OK, EXIT_CONFIG, EXIT_EVALUATOR, EXIT_INTERNAL = 0, 1, 2, 3


class InvariantBreach(RcasError):
    pass


def write_outputs(out_dir: Path, files: dict[str, str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, out_dir / name)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _verify(result: RcasResult, F, costs, budget) -> None:
    for mode, r in result.by_mode.items():
        if not budget.admits(r.cost) or costs.assignment_cost(r.assignment) != r.cost:
            raise InvariantBreach(f"{mode.value}: cost {r.cost} breaks budget {budget}")
        if replay_trace(r.trace) != r.assignment:
            raise InvariantBreach(f"{mode.value}: trace replay disagrees with result")
        if F.evaluate(r.assignment, r.fidelity) != r.value:
            raise InvariantBreach(f"{mode.value}: stored value differs from a fresh evaluation")


def summary_table(result: RcasResult) -> str:
    head = f"{'mode':<5} {'value':>10} {'params':>12} {'madds':>14} {'evals':>7} {'pops':>7} {'reins':>6} {'phi':>10} {'wall_s':>8}"
    lines = [head]
    for mode, r in result.by_mode.items():
        mark = "*" if r is result.best else " "
        lines.append(
            f"{mode.value:<4}{mark} {r.value:>10.6g} {r.cost.params:>12} {r.cost.madds:>14} "
            f"{r.stats.evaluations:>7} {r.stats.queue_pops:>7} {r.stats.reinserts:>6} "
            f"{r.stats.phi:>10.4g} {r.stats.wall_time:>8.3f}"
        )
    for mode, msg in result.failures.items():
        lines.append(f"{mode.value:<5} FAILED: {msg}")
    return "\n".join(lines)


def cmd_search(cfg: RunConfig, out: Path, mode: str) -> int:
    costs = build_costs(cfg)
    F = build_objective(cfg, costs)
    try:
        result = run_mode(F, costs, cfg.budget, mode, cfg.fidelity, cfg.refine_fidelity, options=cfg.engine)
        _verify(result, F, costs, cfg.budget)
    finally:
        F.close()
    payload = result.to_json()
    payload["mode"] = mode
    payload["config"] = cfg.name
    payload["budget"] = cfg.budget.to_json()
    files = {"result.json": dumps(payload)}
    for m, r in result.by_mode.items():
        files[f"trace_{m.value}.csv"] = trace_csv(r.trace)
    write_outputs(out, files)
    print(summary_table(result))
    print(f"best: {result.best.mode.value} value={result.best.value!r} sequence={result.best.assignment.sequence()}")
    if result.warning:
        print("warning: some modes failed; result is the best surviving mode", file=sys.stderr)
    return EXIT_OK


def cmd_cost(cfg: RunConfig, out: Path, assignment_path: str | None) -> int:
    costs = build_costs(cfg)
    report: dict = {"overhead": costs.overhead.to_json(), "budget": cfg.budget.to_json()}
    if assignment_path is None:
        report["elements"] = [
            {"position": e.position, "type": e.block, **costs.element_cost(e).to_json()}
            for e in costs.ground_set()
        ]
    else:
        try:
            a = Assignment.from_json(json.loads(Path(assignment_path).read_text(encoding="utf-8")))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"cannot read assignment {assignment_path}: {exc}") from exc
        for p, t in a.items:
            if not (0 <= p < costs.n_positions and 1 <= t <= costs.n_types):
                raise ConfigError(f"assignment position {p} / type {t} outside the {costs.n_positions}x{costs.n_types} space")
        report["assignment"] = a.to_json()
        report["positions"] = [
            {"position": e.position, "type": e.block, **costs.element_cost(e).to_json()} for e in a.elements()
        ]
        report["layers"] = costs.layer_table(a) if isinstance(costs, ConvCostModel) else []
        total = costs.assignment_cost(a)
        report["total"] = total.to_json()
        report["within_budget"] = cfg.budget.admits(total)
    text = dumps(report)
    write_outputs(out, {"cost.json": text})
    print(text, end="")
    return EXIT_OK


def cmd_brute(cfg: RunConfig, out: Path) -> int:
    costs = build_costs(cfg)
    size = (costs.n_types + 1) ** costs.n_positions
    if size > cfg.brute_cap:
        raise InstanceTooLarge(f"{size} assignments exceeds brute_cap {cfg.brute_cap}")
    F = build_objective(cfg, costs)
    try:
        a, value = brute_force_opt(F, costs, cfg.budget, cfg.fidelity, cfg.brute_cap)
    finally:
        F.close()
    payload = {
        "assignment": a.to_json(),
        "sequence": a.sequence(),
        "value": value,
        "cost": costs.assignment_cost(a).to_json(),
        "enumerated": size,
        "evaluations": F.misses,
    }
    text = dumps(payload)
    write_outputs(out, {"brute.json": text})
    print(text, end="")
    return EXIT_OK


def cmd_diagnose(cfg: RunConfig, out: Path) -> int:
    costs = build_costs(cfg)
    F = build_objective(cfg, costs)
    opts = cfg.diagnose
    hull_cost = opts.get("hull_cost", "params")
    if hull_cost not in ("params", "madds"):
        raise ConfigError("diagnose.hull_cost must be params or madds")
    try:
        run_mode(F, costs, cfg.budget, "rcas", cfg.fidelity, cfg.refine_fidelity, options=cfg.engine)
        logged = [r for r in F.log if r.fidelity == cfg.fidelity]
        points = [(getattr(costs.assignment_cost(r.assignment), hull_cost), r.value) for r in logged]
        hull = convex_hull_report(points)
        report = check_submodularity(
            F,
            costs.ground_set(),
            samples=int(opts.get("samples", 500)),
            seed=cfg.seed,
            fidelity=cfg.fidelity,
            exhaustive=opts.get("exhaustive"),
            tolerance=float(opts.get("tolerance", 0.0)),
        )
    finally:
        F.close()
    write_outputs(
        out,
        {
            "violations.json": dumps(report.to_json()),
            "hull.json": dumps(hull.to_json()),
            "hull_gaps.csv": hull.gaps_csv(),
        },
    )
    on_hull = sum(p.on_hull for p in hull.points)
    print(f"triples checked: {report.triples} ({'exhaustive' if report.exhaustive else 'sampled'})")
    print(f"monotonicity violations: {report.monotone_violations} (rate {report.monotone_rate:.4f})")
    print(f"diminishing-returns violations: {report.dr_violations} (rate {report.dr_rate:.4f})")
    print(f"hull: {on_hull}/{len(hull.points)} evaluated points on the upper hull, max gap {max(p.gap for p in hull.points):.6g}")
    return EXIT_OK


BENCH_KINDS = {
    "coverage": inst.coverage_instance,
    "concave_modular": inst.concave_instance,
    "surrogate": inst.surrogate_instance,
}


def cmd_bench(cfg: RunConfig, out: Path) -> int:
    spec = cfg.bench
    kind = spec.get("kind", "coverage")
    if kind not in BENCH_KINDS:
        raise ConfigError(f"bench.kind must be one of {sorted(BENCH_KINDS)}")
    n_inst = int(spec.get("instances", 20))
    n_pos = int(spec.get("positions", len(cfg.skeleton)))
    n_types = int(spec.get("types", len(cfg.catalog)))
    modes = [CostMode(m) for m in spec.get("modes", [m.value for m in ALL_MODES])]
    cols = [
        "instance", "label", "mode", "ground_size", "phi", "eager_evaluations", "lazy_evaluations",
        "eager_wall_time", "lazy_wall_time", "eager_value", "lazy_value", "same_assignment",
    ]
    rows = [",".join(cols)]
    fewer = total = 0
    for i in range(n_inst):
        seed = cfg.seed + i
        for mode in modes:
            a = BENCH_KINDS[kind](n_pos, n_types, seed)
            b = BENCH_KINDS[kind](n_pos, n_types, seed)
            eager = run_greedy(a.objective, a.costs, a.budget, mode, cfg.fidelity, options=cfg.engine)
            lazy = run_lazy_ceg(b.objective, b.costs, b.budget, mode, cfg.fidelity, options=cfg.engine)
            total += 1
            fewer += lazy.stats.evaluations < eager.stats.evaluations
            rows.append(
                ",".join(
                    str(x) for x in (
                        i, a.label, mode.value, n_pos * n_types, repr(eager.stats.phi),
                        eager.stats.evaluations, lazy.stats.evaluations,
                        f"{eager.stats.wall_time:.6f}", f"{lazy.stats.wall_time:.6f}",
                        repr(eager.value), repr(lazy.value), int(eager.assignment == lazy.assignment),
                    )
                )
            )
    write_outputs(out, {"bench.csv": "\n".join(rows) + "\n"})
    print("\n".join(rows))
    print(f"lazy strictly fewer evaluations on {fewer}/{total} runs")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rcas", description="Budgeted greedy block-assignment search.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("search", "run RCAS (or one cost mode) and write result.json plus traces"),
        ("cost", "print parameter and MAdds counts"),
        ("brute", "exhaustive optimum for small instances"),
        ("diagnose", "submodularity and convex-hull diagnostics"),
        ("bench", "eager vs lazy evaluation counts over seeded instances"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON run config (or bundled:NAME)")
        p.add_argument("--out", help="output directory (overrides config out_dir)")
        p.add_argument("--seed", type=int, help="overrides config seed")
        p.add_argument("--fidelity", type=float, help="overrides config fidelity")
        p.add_argument("--mode", choices=["uc", "apr", "amr", "rcas"], help="cost mode for search")
        if name == "cost":
            p.add_argument("--assignment", help='assignment JSON {"filled":[{"position":0,"type":1}]}')
    return ap


def _resolve(path: str) -> str:
    if path.startswith("bundled:"):
        from .config import bundled_config

        return str(bundled_config(path.split(":", 1)[1]))
    return path


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = os.environ.get("RCAS_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(_resolve(args.config))
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.fidelity is not None:
            changes["fidelity"] = Fidelity(args.fidelity)
        if changes:
            cfg = dataclasses.replace(cfg, **changes)
        out = Path(args.out or cfg.out_dir)
        if args.command == "search":
            return cmd_search(cfg, out, args.mode or cfg.mode)
        if args.command == "cost":
            return cmd_cost(cfg, out, args.assignment)
        if args.command == "brute":
            return cmd_brute(cfg, out)
        if args.command == "diagnose":
            return cmd_diagnose(cfg, out)
        return cmd_bench(cfg, out)
    except (ConfigError, InstanceTooLarge) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EvaluatorFailure as exc:
        print(f"evaluator failure: {exc}", file=sys.stderr)
        if exc.payload is not None:
            print(f"payload: {exc.payload!r}", file=sys.stderr)
        return EXIT_EVALUATOR
    except (RcasError, AssertionError) as exc:
        print(f"internal invariant breach: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
