"""Exact versus heuristic comparison over instance sizes, plus OPT convergence traces."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .exact import Budget, solve_scheduling_exact
from .generate import generate
from .heuristic import HeuristicParams, run_heuristic

COLUMNS = ("trains", "h_cpu", "h_gap", "h_fitness", "e_cpu", "e_gap", "e_lower", "e_upper")
DEFAULT_SIZES = (6, 20, 40, 60, 80, 100)
MISSING = "-"


@dataclass(frozen=True)
class BenchConfig:
    n_segments: int = 3
    n_freights: int = 10
    exact_seconds: float | None = 60.0
    exact_nodes: int | None = None
    heuristic: HeuristicParams = HeuristicParams(population=10, iterations=10, allocation_weight=0.0)


def split_trains(size: int) -> tuple[int, int]:
    """Departing and returning counts for a total of ``size`` trains."""
    ret = size // 3
    return size - ret, ret


def _cell(args) -> dict:
    size, seed, cfg = args
    n_dep, n_ret = split_trains(size)
    inst = generate(cfg.n_segments, n_dep, n_ret, cfg.n_freights, seed)
    row = {"trains": size, "seed": seed}
    try:
        h = run_heuristic(inst, replace(cfg.heuristic, seed=seed))
        row["h_cpu"], row["h_fitness"] = h.cpu_seconds, h.best.fitness
    except Exception as exc:  # a failed cell must not stop the sweep
        row["h_cpu"] = row["h_fitness"] = MISSING
        row["h_error"] = repr(exc)
    skip = cfg.exact_seconds == 0 or cfg.exact_nodes == 0
    if skip:
        row.update(e_cpu=MISSING, e_gap=MISSING, e_lower=MISSING, e_upper=MISSING, e_status=MISSING)
    else:
        try:
            e = solve_scheduling_exact(inst, "travel", Budget(cfg.exact_nodes, cfg.exact_seconds))
            gap = e.gap
            row.update(e_cpu=e.cpu_seconds, e_gap=gap if math.isfinite(gap) else MISSING,
                       e_lower=e.lower_bound, e_upper=e.upper_bound, e_status=e.status)
        except Exception as exc:
            row.update(e_cpu=MISSING, e_gap=MISSING, e_lower=MISSING, e_upper=MISSING, e_status=MISSING)
            row["e_error"] = repr(exc)
    row["h_gap"] = heuristic_gap(row["h_fitness"], row["e_lower"])
    return row


def heuristic_gap(fitness, lower):
    if MISSING in (fitness, lower) or lower <= 0:
        return MISSING
    return (fitness - lower) / lower


def bench_compare(sizes=DEFAULT_SIZES, seeds=(0,), config: BenchConfig | None = None, jobs: int = 1) -> list[dict]:
    """One row per (size, seed)."""
    cfg = config or BenchConfig()
    cells = [(size, seed, cfg) for size in sizes for seed in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_cell, cells))
    return [_cell(c) for c in cells]


def _fmt(value, digits: int = 3) -> str:
    if value == MISSING:
        return MISSING
    if isinstance(value, int):
        return str(value)
    return f"{value:.{digits}f}"


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow([row[c] if row[c] == MISSING or c == "trains" else repr(float(row[c])) for c in COLUMNS])
    return buf.getvalue()


def rows_to_table(rows) -> str:
    """Aligned text table; CPU columns in seconds, gaps as fractions."""
    head = ("trains", "h_cpu[s]", "h_gap", "h_fitness", "e_cpu[s]", "e_gap", "e_lower", "e_upper")
    body = []
    for row in rows:
        body.append((str(row["trains"]), _fmt(row["h_cpu"], 1), _fmt(row["h_gap"]), _fmt(row["h_fitness"]),
                     _fmt(row["e_cpu"], 1), _fmt(row["e_gap"]), _fmt(row["e_lower"]), _fmt(row["e_upper"])))
    widths = [max(len(h), *(len(r[k]) for r in body)) if body else len(h) for k, h in enumerate(head)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(head, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in body]
    return "\n".join(lines) + "\n"


def opt_traces(size: int = 60, seed: int = 0, params: HeuristicParams | None = None,
               n_segments: int = 3, n_freights: int = 10):
    """Convergence traces of the same run with and without the swap pass."""
    params = params or BenchConfig().heuristic
    n_dep, n_ret = split_trains(size)
    inst = generate(n_segments, n_dep, n_ret, n_freights, seed)
    with_opt = run_heuristic(inst, replace(params, seed=seed, opt_enabled=True))
    without = run_heuristic(inst, replace(params, seed=seed, opt_enabled=False))
    return with_opt, without


def traces_to_csv(with_opt, without) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "best_with_opt", "best_without_opt"])
    for (it, a, _), (_, b, _) in zip(with_opt.trace, without.trace):
        w.writerow([it, repr(a), repr(b)])
    return buf.getvalue()
