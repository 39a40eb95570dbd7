"""Command-line entry point.

Exit codes: 0 ok, 1 validation failure, 2 usage or malformed input,
3 budget exhausted before optimality was proven.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .allocation import (allocation_from_dict, allocation_to_dict, check_allocation,
                         greedy_allocation)
from .bench import (DEFAULT_SIZES, BenchConfig, bench_compare, opt_traces, rows_to_csv, rows_to_table,
                    traces_to_csv)
from .exact import OPTIMAL, Budget, solve_allocation_exact, solve_scheduling_exact
from .gantt import render_train_location, render_train_time
from .generate import desk_instance, generate
from .heuristic import HeuristicParams, run_heuristic
from .model import (FormatError, StructureError, instance_from_dict, instance_to_dict, load_json,
                    schedule_from_dict, schedule_to_dict, validate_instance, validate_schedule)
from .timing import InfeasibleSchedule

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


class InputError(Exception):
    pass


def _common(suppress: bool) -> argparse.ArgumentParser:
    """Global flags; accepted before or after the subcommand."""
    p = argparse.ArgumentParser(add_help=False)
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--budget-seconds", type=float, default=d(60.0))
    p.add_argument("--budget-nodes", type=int, default=d(None))
    p.add_argument("--objective", choices=("departure", "arrival", "travel"), default=d("travel"))
    p.add_argument("--population", type=int, default=d(30))
    p.add_argument("--rho", type=float, default=d(0.2))
    p.add_argument("--alpha", type=float, default=d(0.4))
    p.add_argument("--iterations", type=int, default=d(200))
    p.add_argument("--no-opt", action="store_true", default=d(False))
    p.add_argument("--format", choices=("svg", "text"), default=d(None))
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="singletrack", parents=[_common(False)],
                                     description="Single-track corridor timetabling and freight allocation.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = [_common(True)]

    p = sub.add_parser("generate", parents=common, help="write a random instance")
    p.add_argument("--segments", type=int, default=3)
    p.add_argument("--departing", type=int, default=3)
    p.add_argument("--returning", type=int, default=2)
    p.add_argument("--freights", type=int, default=5)
    p.add_argument("--desk", action="store_true", help="write the fixed three-segment desk instance")
    p.add_argument("-o", "--output", default="instance.json")

    p = sub.add_parser("solve-exact", parents=common, help="branch-and-bound schedule")
    p.add_argument("instance")
    p.add_argument("-o", "--output", default="schedule.json")
    p.add_argument("--report", default="report.json")

    p = sub.add_parser("solve-heuristic", parents=common, help="population heuristic")
    p.add_argument("instance")
    p.add_argument("-o", "--output", default="solution.json")
    p.add_argument("--trace", default="trace.csv")
    p.add_argument("--allocation-weight", type=float, default=1.0)

    p = sub.add_parser("allocate", parents=common, help="assign freight for a fixed schedule")
    p.add_argument("instance")
    p.add_argument("schedule")
    p.add_argument("-o", "--output", default="allocation.json")
    p.add_argument("--method", choices=("auto", "enumerate", "bnb", "greedy"), default="auto")

    p = sub.add_parser("validate", parents=common, help="report violated constraints")
    p.add_argument("instance")
    p.add_argument("schedule", nargs="?")
    p.add_argument("--allocation")
    p.add_argument("--strict", action="store_true", help="also flag relaxed trains that could be filled")
    p.add_argument("--arrival-headway", action="store_true")

    p = sub.add_parser("gantt", parents=common, help="draw a schedule")
    p.add_argument("instance")
    p.add_argument("schedule")
    p.add_argument("--view", choices=("time", "location"), default="time")
    p.add_argument("-o", "--output")

    p = sub.add_parser("bench", parents=common, help="exact versus heuristic table")
    p.add_argument("--sizes", default=",".join(map(str, DEFAULT_SIZES)))
    p.add_argument("--seeds", default="0")
    p.add_argument("--segments", type=int, default=3)
    p.add_argument("--freights", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--csv", default="bench.csv")
    p.add_argument("--traces", help="also write the 60-train convergence traces here")
    p.add_argument("--trace-size", type=int, default=60)
    return parser


def _int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"{flag}: expected comma-separated integers, got {text!r}") from None


def _load_instance(path):
    inst = instance_from_dict(load_json(path))
    defects = validate_instance(inst)
    if defects:
        lines = "; ".join(f"{d.kind} at {d.where}: {d.detail}" for d in defects[:10])
        raise InputError(f"{path}: invalid instance: {lines}")
    return inst


def _load_schedule(inst, path):
    return schedule_from_dict(inst, load_json(path))


def _write(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _dump(doc, path) -> None:
    _write(json.dumps(doc, indent=2) + "\n", path)


def _budget(args) -> Budget:
    return Budget(nodes=args.budget_nodes, seconds=args.budget_seconds)


def _params(args, **extra) -> HeuristicParams:
    return HeuristicParams(population=args.population, rho=args.rho, alpha=args.alpha,
                           iterations=args.iterations, seed=args.seed, opt_enabled=not args.no_opt, **extra)


def cmd_generate(args) -> int:
    inst = desk_instance() if args.desk else generate(args.segments, args.departing, args.returning,
                                                      args.freights, args.seed)
    _dump(instance_to_dict(inst), args.output)
    return EXIT_OK


def cmd_solve_exact(args) -> int:
    inst = _load_instance(args.instance)
    report = solve_scheduling_exact(inst, args.objective, _budget(args))
    if report.schedule is not None:
        _dump(schedule_to_dict(inst, report.schedule), args.output)
    _dump(report.to_dict(), args.report)
    print(f"{report.status}: lower {report.lower_bound:.6g} upper {report.upper_bound:.6g} "
          f"nodes {report.nodes_explored} cpu {report.cpu_seconds:.1f}s", file=sys.stderr)
    return EXIT_OK if report.status == OPTIMAL else EXIT_BUDGET


def cmd_solve_heuristic(args) -> int:
    inst = _load_instance(args.instance)
    result = run_heuristic(inst, _params(args, allocation_weight=args.allocation_weight))
    best = result.best
    doc = {
        "fitness": best.fitness,
        "seq_dep": [inst.trains[i].id for i in best.seq_dep],
        "seq_ret": [inst.trains[i].id for i in best.seq_ret],
        "schedule": schedule_to_dict(inst, best.sched),
        "allocation": allocation_to_dict(best.alloc),
    }
    _dump(doc, args.output)
    if args.trace:
        result.write_trace(args.trace)
    return EXIT_OK


def cmd_allocate(args) -> int:
    inst = _load_instance(args.instance)
    sched = _load_schedule(inst, args.schedule)
    problems = validate_schedule(inst, sched)
    if problems:
        for v in problems:
            print(v, file=sys.stderr)
        return EXIT_INVALID
    if args.method == "greedy":
        alloc = greedy_allocation(inst, sched)
    else:
        alloc, _ = solve_allocation_exact(inst, sched, _budget(args), method=args.method)
    _dump(allocation_to_dict(alloc), args.output)
    return EXIT_OK


def cmd_validate(args) -> int:
    inst = instance_from_dict(load_json(args.instance))
    found = [f"{d.kind} at {d.where}: {d.detail}" for d in validate_instance(inst)]
    if not found and args.schedule:
        sched = _load_schedule(inst, args.schedule)
        found += [str(v) for v in validate_schedule(inst, sched, arrival_headway=args.arrival_headway)]
        if args.allocation:
            alloc = allocation_from_dict(load_json(args.allocation))
            found += [f"{v.constraint} freight={v.freight} train={v.train} slack={v.slack:.6g}"
                      for v in check_allocation(inst, sched, alloc, strict=args.strict)]
    for line in found:
        print(line)
    if found:
        print(f"{len(found)} violation(s)", file=sys.stderr)
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def cmd_gantt(args) -> int:
    inst = _load_instance(args.instance)
    sched = _load_schedule(inst, args.schedule)
    fmt = args.format or ("text" if args.output in (None, "-") or str(args.output).endswith(".txt") else "svg")
    render = render_train_time if args.view == "time" else render_train_location
    try:
        doc = render(inst, sched, fmt)
    except InfeasibleSchedule as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    _write(doc, args.output)
    return EXIT_OK


def cmd_bench(args) -> int:
    sizes = _int_list(args.sizes, "--sizes")
    seeds = _int_list(args.seeds, "--seeds")
    heur = HeuristicParams(population=args.population, rho=args.rho, alpha=args.alpha,
                           iterations=args.iterations, opt_enabled=not args.no_opt, allocation_weight=0.0)
    cfg = BenchConfig(args.segments, args.freights, args.budget_seconds, args.budget_nodes, heur)
    rows = bench_compare(sizes, seeds, cfg, jobs=args.jobs)
    _write(rows_to_csv(rows), args.csv)
    sys.stdout.write(rows_to_table(rows))
    if args.traces:
        with_opt, without = opt_traces(args.trace_size, seeds[0], heur, args.segments, args.freights)
        _write(traces_to_csv(with_opt, without), args.traces)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "solve-exact": cmd_solve_exact,
    "solve-heuristic": cmd_solve_heuristic,
    "allocate": cmd_allocate,
    "validate": cmd_validate,
    "gantt": cmd_gantt,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (FormatError, InputError, StructureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
