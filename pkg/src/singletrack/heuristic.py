"""Population heuristic that sequences trains and allocates freight jointly.

A solution is a pair of train sequences, one per direction.  A sequence
fixes the same-direction order on every segment; opposing conflicts are
settled while decoding.  Each iteration pulls every solution toward a
randomly chosen good one by moving its worst-delayed trains to where the
reference has them, then optionally polishes it with adjacent swaps.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from functools import cached_property

import numpy as np

from .allocation import Allocation, allocation_objective, greedy_allocation
from .model import Instance, ObjectiveKind, Ordering, Schedule, TOL, objective_value
from .timing import base_arcs, decision_arcs, longest_paths, schedule_from_times


@dataclass(frozen=True)
class HeuristicParams:
    population: int = 30
    rho: float = 0.2
    alpha: float = 0.4
    iterations: int = 200
    seed: int = 0
    opt_enabled: bool = True
    allocation_weight: float = 1.0
    meet_search_pairs: int = 16

    def __post_init__(self):
        if self.population < 1:
            raise ValueError("population must be at least 1")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if int(self.rho * self.population) < 1:
            raise ValueError("rho * population must be at least 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.allocation_weight < 0:
            raise ValueError("allocation_weight must be non-negative")


@dataclass
class Solution:
    """Sequences hold train indices."""
    seq_dep: tuple[int, ...]
    seq_ret: tuple[int, ...]
    earliest: dict[str, float]
    alloc: Allocation
    sched: Schedule
    fitness: float
    segment_orders: list[list[int]] = field(repr=False, default_factory=list)
    inst: Instance | None = field(repr=False, default=None)

    @cached_property
    def ordering(self) -> Ordering:
        return Ordering.from_segment_orders(self.inst, self.segment_orders)


@dataclass
class HeuristicResult:
    best: Solution
    trace: list[tuple[int, float, float]]
    cpu_seconds: float = 0.0

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "best_fitness", "mean_fitness"])
            for it, best, mean in self.trace:
                w.writerow([it, repr(best), repr(mean)])


# --- construction -----------------------------------------------------------------

def train_score(train, freights) -> float:
    """Sum of weight times priority over the train's freight, per unit capacity."""
    freights = list(freights)
    if not freights or not train.departing:
        return 0.0
    if train.capacity <= 0:
        raise ValueError(f"train {train.id} has no capacity but carries freight")
    return sum(f.weight * f.priority for f in freights) / train.capacity


def selection_probabilities(k: int) -> np.ndarray:
    """Linear ranking weights; rank 1 (lowest score) is the most likely."""
    if k < 1:
        raise ValueError("k must be at least 1")
    ranks = np.arange(1, k + 1)
    return 2.0 * (k - ranks + 1) / (k * (k + 1))


def monte_carlo_select(probs, rng: np.random.Generator) -> int:
    probs = np.asarray(probs, dtype=float)
    if probs.size == 0:
        raise ValueError("empty probability vector")
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("probabilities must sum to 1")
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(idx, probs.size - 1)


def tentative_allocation(inst: Instance) -> dict[int, list]:
    """Earliest release first, each onto the first departing train with room."""
    room = {i: inst.trains[i].capacity for i in inst.departing}
    held = {i: [] for i in range(inst.n_trains)}
    for f in sorted(inst.freights, key=lambda f: (f.release, f.id)):
        for i in inst.departing:
            if f.weight <= room[i] + TOL:
                room[i] -= f.weight
                held[i].append(f)
                break
    return held


def _ranked_draw(pool: list[int], rng) -> list[int]:
    pool = list(pool)
    out = []
    while pool:
        k = monte_carlo_select(selection_probabilities(len(pool)), rng)
        out.append(pool.pop(k))
    return out


def construct_solution(inst: Instance, rng: np.random.Generator, params: HeuristicParams,
                       evaluator: "Evaluator | None" = None) -> Solution:
    held = tentative_allocation(inst)
    score = {i: train_score(inst.trains[i], held[i]) for i in range(inst.n_trains)}
    dep = sorted(inst.departing, key=lambda i: (score[i], i))
    ret = sorted(inst.returning, key=lambda i: (score[i], i))
    seq_dep = tuple(_ranked_draw(dep, rng))
    seq_ret = tuple(_ranked_draw(ret, rng))
    evaluator = evaluator or Evaluator(inst, params.allocation_weight, params.meet_search_pairs)
    return evaluator(seq_dep, seq_ret)


# --- decoding ---------------------------------------------------------------------

def simulate(inst: Instance, seq_dep, seq_ret):
    """Schedule both sequences segment by segment.

    Returns the schedule and, per physical segment, the order in which
    trains used it.  The times equal the earliest times of that ordering.
    """
    n = inst.n
    mr, stop, phys = inst.min_run.tolist(), inst.stop.tolist(), inst.phys.tolist()
    prio, st = inst.priority.tolist(), list(inst.safety)
    T = inst.n_trains
    dep = [[0.0] * n for _ in range(T)]
    arr = [[0.0] * n for _ in range(T)]
    nxt = [0] * T
    ready = [0.0] * T
    last_dep = [[-math.inf] * n, [-math.inf] * n]   # per direction, per physical segment
    clear = [[0.0] * n, [0.0] * n]                  # latest arrival on segment, per direction
    orders = [[] for _ in range(n)]
    seqs = (list(seq_dep), list(seq_ret))
    head = [0, 0]
    remaining = T * n

    def est(i, d):
        s = phys[i][nxt[i]]
        return max(ready[i], last_dep[d][s] + st[s], clear[1 - d][s])

    while remaining:
        cands = []
        for d in (0, 1):
            seq = seqs[d]
            while head[d] < len(seq) and nxt[seq[head[d]]] >= n:
                head[d] += 1
            prev = n
            for pos in range(head[d], len(seq)):
                i = seq[pos]
                k = nxt[i]
                if k < prev:
                    cands.append((est(i, d), d, pos, i))
                prev = k
                if k == 0:
                    break
        e, d, _, i = min(cands)
        s = phys[i][nxt[i]]
        rival = next((c for c in cands if c[1] != d and phys[c[3]][nxt[c[3]]] == s), None)
        if rival is not None:
            eo, do, _, o = rival
            wait_o = (prio[o] if nxt[o] > 0 else 0.0) * (max(eo, e + mr[i][nxt[i]]) - eo)
            wait_i = (prio[i] if nxt[i] > 0 else 0.0) * (max(e, eo + mr[o][nxt[o]]) - e)
            if wait_i < wait_o - TOL:
                e, d, i = eo, do, o
        k = nxt[i]
        a = e + mr[i][k]
        dep[i][k] = e
        arr[i][k] = a
        last_dep[d][s] = e
        clear[d][s] = max(clear[d][s], a)
        orders[s].append(i)
        ready[i] = a + (stop[i][k + 1] if k + 1 < n else 0.0)
        nxt[i] = k + 1
        remaining -= 1
    return Schedule(np.array(dep).reshape(T, n), np.array(arr).reshape(T, n)), orders


def _meeting_points(inst: Instance, orders) -> dict:
    """Per opposing pair, how many physical segments the departing train clears first."""
    pos = [{i: p for p, i in enumerate(order)} for order in orders]
    return {(t, r): sum(pos[s][t] < pos[s][r] for s in range(inst.n))
            for t in inst.departing for r in inst.returning}


def _meet_arcs(inst: Instance, t: int, r: int, m: int) -> list:
    arcs = []
    for s in range(inst.n):
        arcs += decision_arcs(inst, "gamma", (s, t, r), s < m)
    return arcs


def refine_meetings(inst: Instance, seq_dep, seq_ret, orders, max_passes: int = 3):
    """Move opposing meetings one pair at a time while the travel objective drops.

    Every trial is an exact longest-path propagation; infeasible trials are
    skipped.  Returns the improved schedule and per-segment orders.
    """
    fixed = base_arcs(inst)
    same = sequence_ordering(inst, seq_dep, seq_ret)
    for family, table in (("alpha", same.alpha), ("beta", same.beta)):
        for key, value in table.items():
            fixed += decision_arcs(inst, family, key, value)
    meet = _meeting_points(inst, orders)
    pair_arcs = {p: _meet_arcs(inst, *p, m) for p, m in meet.items()}
    n_nodes = 1 + 2 * inst.n_trains * inst.n

    def evaluate():
        arcs = list(fixed)
        for a in pair_arcs.values():
            arcs.extend(a)
        dist, _, cycle = longest_paths(n_nodes, arcs, want_cycle=False)
        if cycle is not None:
            return math.inf, None
        sched = schedule_from_times(inst, dist)
        return objective_value(inst, sched, ObjectiveKind.WEIGHTED_TRAVEL_TIME), sched

    best, sched = evaluate()
    for _ in range(max_passes):
        improved = False
        for pair in sorted(meet, key=lambda p: (seq_dep.index(p[0]), seq_ret.index(p[1]))):
            current = meet[pair]
            for m in range(inst.n + 1):
                if m == current:
                    continue
                pair_arcs[pair] = _meet_arcs(inst, *pair, m)
                value, trial = evaluate()
                if value < best - TOL:
                    best, sched, current, improved = value, trial, m, True
            meet[pair] = current
            pair_arcs[pair] = _meet_arcs(inst, *pair, current)
        if not improved:
            break
    return sched, _orders_from_schedule(inst, seq_dep, seq_ret, sched)


def sequence_ordering(inst: Instance, seq_dep, seq_ret) -> Ordering:
    """Partial ordering with only the same-direction pairs, as the sequences fix them."""
    tables = {}
    for seq, family in ((seq_dep, "alpha"), (seq_ret, "beta")):
        table = tables.setdefault(family, {})
        for a_pos, a in enumerate(seq):
            for b in seq[a_pos + 1:]:
                for s in range(inst.n):
                    table[(s, min(a, b), max(a, b))] = a < b
    return Ordering(tables["alpha"], tables["beta"], {})


def decode(inst: Instance, seq_dep, seq_ret, meet_search_pairs: int = 16, meet_search_nodes: int = 3000):
    """Schedule and per-segment orders for a pair of sequences.

    Small instances settle opposing pairs by local moves and then by a
    bounded exact search over the opposing decisions alone.
    """
    sched, orders = simulate(inst, seq_dep, seq_ret)
    if not 0 < len(seq_dep) * len(seq_ret) <= meet_search_pairs:
        return sched, orders
    seq_dep, seq_ret = tuple(seq_dep), tuple(seq_ret)
    sched, orders = refine_meetings(inst, seq_dep, seq_ret, orders)
    if meet_search_nodes > 0:
        from .exact import Budget, solve_scheduling_exact

        report = solve_scheduling_exact(inst, ObjectiveKind.WEIGHTED_TRAVEL_TIME, Budget(nodes=meet_search_nodes),
                                        fixed=sequence_ordering(inst, seq_dep, seq_ret),
                                        incumbent=Ordering.from_segment_orders(inst, orders))
        if report.schedule is not None and report.upper_bound < objective_value(
                inst, sched, ObjectiveKind.WEIGHTED_TRAVEL_TIME) - TOL:
            sched = report.schedule
            orders = _orders_from_schedule(inst, seq_dep, seq_ret, sched)
    return sched, orders


def _orders_from_schedule(inst, seq_dep, seq_ret, sched):
    rank = {i: p for seq in (seq_dep, seq_ret) for p, i in enumerate(seq)}
    where = [{int(s): k for k, s in enumerate(inst.phys[i])} for i in range(inst.n_trains)]
    return [sorted(range(inst.n_trains), key=lambda i: (sched.dep[i, where[i][s]], rank[i]))
            for s in range(inst.n)]


def decode_sequences(inst: Instance, seq_dep, seq_ret, meet_search_pairs: int = 16) -> Ordering:
    """Complete ordering: sequences fix same-direction pairs, decoding fixes opposing pairs."""
    _, orders = decode(inst, seq_dep, seq_ret, meet_search_pairs)
    return Ordering.from_segment_orders(inst, orders)


class Evaluator:
    """Decodes sequences into solutions, memoised per sequence pair."""

    def __init__(self, inst: Instance, allocation_weight: float = 1.0, meet_search_pairs: int = 16):
        self.inst = inst
        self.weight = allocation_weight
        self.meet_search_pairs = meet_search_pairs
        self.cache: dict = {}
        self.decodes = 0

    def __call__(self, seq_dep, seq_ret) -> Solution:
        key = (tuple(seq_dep), tuple(seq_ret))
        sol = self.cache.get(key)
        if sol is None:
            sol = self._decode(*key)
            self.cache[key] = sol
        return sol

    def _decode(self, seq_dep, seq_ret) -> Solution:
        inst = self.inst
        self.decodes += 1
        sched, orders = decode(inst, seq_dep, seq_ret, self.meet_search_pairs)
        sched.objective = objective_value(inst, sched, ObjectiveKind.WEIGHTED_TRAVEL_TIME)
        alloc = greedy_allocation(inst, sched)
        earliest = {t.id: float(sched.arr[i, -1]) for i, t in enumerate(inst.trains)}
        sol = Solution(seq_dep, seq_ret, earliest, alloc, sched, 0.0, orders, inst)
        sol.fitness = fitness(inst, sol, self.weight)
        return sol


def fitness(inst: Instance, sol: Solution, allocation_weight: float = 1.0) -> float:
    travel = objective_value(inst, sol.sched, ObjectiveKind.WEIGHTED_TRAVEL_TIME)
    if allocation_weight == 0 or not inst.freights:
        return travel
    return travel + allocation_weight * allocation_objective(inst.freights, sol.alloc)


# --- improvement ------------------------------------------------------------------

def correction_count(phi_best: float, phi_worst: float, phi_i: float, alpha: float, train_count: int) -> int:
    """How many trains to move toward the reference; worse solutions move more."""
    if not phi_best - TOL <= phi_i <= phi_worst + TOL:
        raise ValueError("phi_i must lie between phi_best and phi_worst")
    cap = max(train_count - 1, 0)
    if abs(phi_i - phi_worst) <= TOL:
        return cap
    raw = alpha * (phi_best - phi_worst) / (phi_i - phi_worst)
    nu = int(Decimal(repr(float(raw))).quantize(Decimal(1), rounding=ROUND_HALF_UP))
    return min(max(nu, 0), cap)


def train_delays(inst: Instance, sched: Schedule) -> np.ndarray:
    travel = sched.arr[:, -1] - sched.dep[:, 0]
    return inst.priority * (travel - inst.free_run)


def select_worst_trains(inst: Instance, sol: Solution, nu: int) -> set[int]:
    """Indices of the ``nu`` trains that lose the most weighted time to interaction."""
    if nu <= 0:
        return set()
    delay = train_delays(inst, sol.sched)
    ranked = sorted(range(inst.n_trains), key=lambda i: (-delay[i], inst.trains[i].id))
    return set(ranked[:nu])


def reorder_toward_reference(seq, ref_seq, selected) -> list:
    """Move the selected items to where the reference has them.

    Selected items leave ``seq``; in reference order each goes back directly
    in front of the first item that follows it in the reference and is
    already placed, or to the end if there is none.
    """
    seq = list(seq)
    selected = set(selected)
    missing = selected - set(seq)
    if missing:
        raise ValueError(f"selected items not in sequence: {sorted(missing, key=str)}")
    if sorted(map(str, seq)) != sorted(map(str, ref_seq)):
        raise ValueError("sequence and reference are not permutations of each other")
    out = [x for x in seq if x not in selected]
    placed = set(out)
    ref = list(ref_seq)
    for pos, x in enumerate(ref):
        if x not in selected:
            continue
        anchor = next((y for y in ref[pos + 1:] if y in placed), None)
        if anchor is None:
            out.append(x)
        else:
            out.insert(out.index(anchor), x)
        placed.add(x)
    return out


def opt_pass(inst: Instance, sol: Solution, evaluator: Evaluator) -> Solution:
    """Adjacent swaps, kept only when they lower the fitness."""
    best = sol
    for which in ("dep", "ret"):
        for p in range(len(getattr(best, "seq_" + which)) - 1):
            seq = list(getattr(best, "seq_" + which))
            seq[p], seq[p + 1] = seq[p + 1], seq[p]
            if which == "dep":
                cand = evaluator(tuple(seq), best.seq_ret)
            else:
                cand = evaluator(best.seq_dep, tuple(seq))
            if cand.fitness < best.fitness - TOL:
                best = cand
    return best


def run_heuristic(inst: Instance, params: HeuristicParams | None = None,
                  time_limit: float | None = None) -> HeuristicResult:
    """Best solution found and the per-iteration trace (iteration, best, mean)."""
    params = params or HeuristicParams()
    start = time.perf_counter()
    evaluator = Evaluator(inst, params.allocation_weight, params.meet_search_pairs)
    pop = [construct_solution(inst, np.random.default_rng([params.seed, i, 0]), params, evaluator)
           for i in range(params.population)]
    n_top = int(params.rho * params.population)
    best = min(pop, key=lambda s: s.fitness)
    trace = []
    for it in range(1, params.iterations + 1):
        phis = [s.fitness for s in pop]
        rank = sorted(range(len(pop)), key=lambda k: (phis[k], k))
        phi_best, phi_worst = phis[rank[0]], phis[rank[-1]]
        top = [pop[k] for k in rank[:n_top]]
        new_pop = []
        for k, sol in enumerate(pop):
            rng = np.random.default_rng([params.seed, k, it])
            ref = top[int(rng.integers(len(top)))]
            nu = correction_count(phi_best, phi_worst, sol.fitness, params.alpha, inst.n_trains)
            chosen = select_worst_trains(inst, sol, nu)
            seq_dep = reorder_toward_reference(sol.seq_dep, ref.seq_dep, chosen & set(sol.seq_dep))
            seq_ret = reorder_toward_reference(sol.seq_ret, ref.seq_ret, chosen & set(sol.seq_ret))
            cand = evaluator(tuple(seq_dep), tuple(seq_ret))
            if params.opt_enabled:
                cand = opt_pass(inst, cand, evaluator)
            new_pop.append(cand)
        pop = new_pop
        it_best = min(pop, key=lambda s: s.fitness)
        if it_best.fitness < best.fitness - TOL:
            best = it_best
        trace.append((it, best.fitness, float(np.mean([s.fitness for s in pop]))))
        if time_limit is not None and time.perf_counter() - start >= time_limit:
            break
    return HeuristicResult(best, trace, time.perf_counter() - start)
