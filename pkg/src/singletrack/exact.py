"""Branch-and-bound over the pairwise precedence decisions, and exact allocation.

Disjunctions are branched, never relaxed with big-M.  Each node fixes a
prefix of a static decision list; its times are the longest paths of the
partial constraint graph.

Bounds.  For total departure / total arrival the partial earliest times are
monotone in the arc set, so their objective bounds every completion.  For
weighted travel time that is false (an extra arc can delay a train's start
and shorten its trip), so each train is bounded by longest paths that
start at its first departure, or at the events that can release it once
every decision touching that departure is fixed.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .allocation import Allocation, cost_matrix, make_allocation, max_fill, allocation_objective
from .model import Instance, ObjectiveKind, Ordering, Schedule, TOL, objective_value
from .timing import (ORIGIN, arr_node, base_arcs, decision_arcs, dep_node, longest_paths,
                     schedule_from_times, solve_fixed_order, tighten_departures)

DIVE_LIMIT = 400   # decisions; larger searches start from the default ordering only

OPTIMAL = "Optimal"
BUDGET_EXHAUSTED = "BudgetExhausted"


@dataclass
class Budget:
    nodes: int | None = None
    seconds: float | None = None


@dataclass
class SolveReport:
    schedule: Schedule | None
    ordering: Ordering | None
    lower_bound: float
    upper_bound: float
    nodes_explored: int
    cpu_seconds: float
    status: str
    objective: ObjectiveKind = ObjectiveKind.WEIGHTED_TRAVEL_TIME
    trace: list = field(default_factory=list)

    @property
    def gap(self) -> float:
        return relative_gap(self.upper_bound, self.lower_bound)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "objective": self.objective.value,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "gap": self.gap if math.isfinite(self.gap) else None,
            "nodes_explored": self.nodes_explored,
            "cpu_seconds": round(self.cpu_seconds, 1),
        }


@dataclass
class BnBNode:
    """A partial ordering together with its bound and the number of fixed decisions."""
    partial: Ordering
    bound: float = -math.inf
    depth: int = 0


def relative_gap(upper: float, lower: float) -> float:
    if not math.isfinite(upper):
        return math.inf
    if lower <= 0:
        return 0.0 if upper <= lower + TOL else math.inf
    return (upper - lower) / lower


@dataclass(frozen=True)
class _Decision:
    family: str
    key: tuple
    arcs: tuple  # (arcs if value False, arcs if value True)


def decision_list(inst: Instance, arrival_headway: bool = False) -> list[_Decision]:
    """Opposing pairs first, busiest physical segment first; then same-direction pairs."""
    n = inst.n
    load = [sum(inst.min_run[i, k] for i in range(inst.n_trains) for k in range(n) if inst.phys[i, k] == s)
            for s in range(n)]
    segs = sorted(range(n), key=lambda s: (-load[s], s))
    out = []

    def add(family, key):
        arcs = tuple(tuple(decision_arcs(inst, family, key, v, arrival_headway)) for v in (False, True))
        out.append(_Decision(family, key, arcs))

    for s in segs:
        for t in inst.departing:
            for r in inst.returning:
                add("gamma", (s, t, r))
    for s in segs:
        for family, group in (("alpha", inst.departing), ("beta", inst.returning)):
            for ia, a in enumerate(group):
                for b in group[ia + 1:]:
                    add(family, (s, a, b))
    return out


def _first_touch(inst: Instance, decisions: list[_Decision]) -> list[int]:
    """Per train, how many leading decisions must be fixed before every arc
    into its first departure is known."""
    need = [0] * inst.n_trains
    for d, dec in enumerate(decisions):
        s, a, b = dec.key
        for i in (a, b):
            if inst.phys[i, 0] == s:
                need[i] = d + 1
    return need


def _travel_bound(inst: Instance, n_nodes: int, arcs, dist, order, determined) -> float:
    """Valid lower bound on weighted travel time for every completion."""
    if order is None:
        return float(np.dot(inst.priority, inst.free_run))
    out = [[] for _ in range(n_nodes)]
    into = [[] for _ in range(n_nodes)]
    for u, v, w, _ in arcs:
        out[u].append((v, w))
        into[v].append((u, w))
    total = 0.0
    neg = -math.inf
    for i in range(inst.n_trains):
        target = arr_node(inst, i, inst.n - 1)
        start = dep_node(inst, i, 0)
        reach = [neg] * n_nodes
        reach[target] = 0.0
        for u in reversed(order):
            best = reach[u]
            for v, w in out[u]:
                rv = reach[v]
                if rv != neg and rv + w > best:
                    best = rv + w
            reach[u] = best
        b = reach[start]
        if determined[i]:
            alt = dist[target]
            for u, w in into[start]:
                if u != ORIGIN:
                    alt = min(alt, reach[u] - w)
            b = max(b, alt)
        total += inst.priority[i] * max(b, inst.free_run[i])
    return total


def _node_bound(inst, kind, n_nodes, arcs, dist, order, determined) -> float:
    if kind is ObjectiveKind.TOTAL_DEPARTURE:
        return sum(dist[dep_node(inst, i, 0)] for i in range(inst.n_trains))
    if kind is ObjectiveKind.TOTAL_ARRIVAL:
        return sum(dist[arr_node(inst, i, inst.n - 1)] for i in range(inst.n_trains))
    return _travel_bound(inst, n_nodes, arcs, dist, order, determined)


def scheduling_lower_bound(inst: Instance, partial: Ordering | BnBNode,
                           kind: ObjectiveKind | str = ObjectiveKind.WEIGHTED_TRAVEL_TIME) -> float:
    """Bound on the objective of every completion of a partial ordering.

    A complete ordering gets its own objective.
    """
    kind = ObjectiveKind(kind)
    if isinstance(partial, BnBNode):
        partial = partial.partial
    if not partial.missing(inst):
        out = solve_fixed_order(inst, partial, kind)
        return out.schedule.objective if out.feasible else math.inf
    arcs = base_arcs(inst)
    fixed = set()
    for family, table in (("alpha", partial.alpha), ("beta", partial.beta), ("gamma", partial.gamma)):
        for key, value in table.items():
            arcs += decision_arcs(inst, family, key, value)
            fixed.add((family, key))
    n_nodes = 1 + 2 * inst.n_trains * inst.n
    dist, order, cycle = longest_paths(n_nodes, arcs, want_cycle=False)
    if cycle is not None:
        return math.inf
    determined = [True] * inst.n_trains
    for dec in decision_list(inst):
        if (dec.family, dec.key) not in fixed:
            s, a, b = dec.key
            for i in (a, b):
                if inst.phys[i, 0] == s:
                    determined[i] = False
    free = 0.0
    if kind is ObjectiveKind.WEIGHTED_TRAVEL_TIME:
        free = float(np.dot(inst.priority, inst.free_run))
    elif kind is ObjectiveKind.TOTAL_ARRIVAL:
        free = float(np.sum(inst.free_run))
    return max(free, _node_bound(inst, kind, n_nodes, arcs, dist, order, determined))


def _tables(ordering: Ordering | None) -> dict:
    if ordering is None:
        return {"alpha": {}, "beta": {}, "gamma": {}}
    return {"alpha": ordering.alpha, "beta": ordering.beta, "gamma": ordering.gamma}


def ordering_from_values(decisions: list[_Decision], values) -> Ordering:
    tables = {"alpha": {}, "beta": {}, "gamma": {}}
    for dec, v in zip(decisions, values):
        tables[dec.family][dec.key] = bool(v)
    return Ordering(tables["alpha"], tables["beta"], tables["gamma"])


class _Search:
    def __init__(self, inst, kind, budget, arrival_headway, fixed=None, incumbent=None):
        self.inst = inst
        self.kind = kind
        self.budget = budget
        self.arrival_headway = arrival_headway
        self.base = base_arcs(inst)
        self.decisions = []
        tables = _tables(fixed)
        self.fixed = tables
        for dec in decision_list(inst, arrival_headway):
            value = tables[dec.family].get(dec.key)
            if value is None:
                self.decisions.append(dec)
            else:
                self.base.extend(dec.arcs[bool(value)])
        self.touch = _first_touch(inst, self.decisions)
        self.incumbent = incumbent
        self.n_nodes = 1 + 2 * inst.n_trains * inst.n
        self.nodes = 0
        self.start = time.perf_counter()
        self.best_value = math.inf
        self.best_values = None
        self.best_schedule = None
        self.trace = []

    def out_of_budget(self) -> bool:
        b = self.budget
        if b.nodes is not None and self.nodes >= b.nodes:
            return True
        return b.seconds is not None and time.perf_counter() - self.start >= b.seconds

    def evaluate(self, values):
        """(bound or leaf objective, schedule at leaves); None when infeasible."""
        self.nodes += 1
        arcs = list(self.base)
        for dec, v in zip(self.decisions, values):
            arcs.extend(dec.arcs[v])
        dist, order, cycle = longest_paths(self.n_nodes, arcs, want_cycle=False)
        if cycle is not None:
            return None
        depth = len(values)
        if depth == len(self.decisions):
            sched = schedule_from_times(self.inst, dist)
            if self.kind is ObjectiveKind.WEIGHTED_TRAVEL_TIME and self.arrival_headway:
                sched = tighten_departures(self.inst, sched)
            sched.objective = objective_value(self.inst, sched, self.kind)
            return sched.objective, sched
        if self.kind is ObjectiveKind.WEIGHTED_TRAVEL_TIME and self.arrival_headway:
            return float(np.dot(self.inst.priority, self.inst.free_run)), None
        determined = [depth >= need for need in self.touch]
        return _node_bound(self.inst, self.kind, self.n_nodes, arcs, dist, order, determined), None

    def offer(self, value, values, sched):
        if value < self.best_value - TOL:
            self.best_value = value
            self.best_values = tuple(values)
            self.best_schedule = sched
            self.trace.append((self.nodes, value))

    def default_values(self):
        """Departing trains ahead of returning ones everywhere, index order within a direction."""
        return tuple(1 for _ in self.decisions)

    def incumbent_values(self):
        tables = _tables(self.incumbent)
        values = tuple(tables[dec.family].get(dec.key) for dec in self.decisions)
        return None if any(v is None for v in values) else tuple(int(bool(v)) for v in values)

    def run(self) -> SolveReport:
        inst, kind = self.inst, self.kind
        root_free = float(np.dot(inst.priority, inst.free_run)) if kind is ObjectiveKind.WEIGHTED_TRAVEL_TIME else 0.0
        root = self.evaluate(())
        if root is None:
            return self.report(math.inf, BUDGET_EXHAUSTED)
        root_bound = max(root_free, root[0])
        if not self.decisions:
            value, sched = root
            self.offer(value, (), sched)
            return self.report(value, OPTIMAL)

        for start in (self.incumbent_values() if self.incumbent else None, self.default_values()):
            if start is None:
                continue
            seed = self.evaluate(start)
            if seed is not None:
                self.offer(seed[0], start, seed[1])
        if len(self.decisions) <= DIVE_LIMIT:
            self.dive()

        counter = itertools.count()
        heap = [(root_bound, 0, next(counter), ())]
        while heap:
            bound, _, _, values = heap[0]
            if bound >= self.best_value - TOL:
                heap = []
                break
            if self.out_of_budget():
                break
            heapq.heappop(heap)
            for v in (1, 0):
                child = values + (v,)
                res = self.evaluate(child)
                if res is None:
                    continue
                value, sched = res
                value = max(value, bound)
                if sched is not None:
                    self.offer(sched.objective, child, sched)
                elif value < self.best_value - TOL:
                    heapq.heappush(heap, (value, -len(child), next(counter), child))
                if self.out_of_budget():
                    break
        if heap:
            lower = min(heap[0][0], self.best_value)
            return self.report(lower, BUDGET_EXHAUSTED)
        return self.report(self.best_value, OPTIMAL)

    def dive(self):
        """Follow the child with the smaller bound down to a leaf."""
        values = ()
        while len(values) < len(self.decisions) and not self.out_of_budget():
            best = None
            for v in (1, 0):
                res = self.evaluate(values + (v,))
                if res is not None and (best is None or res[0] < best[0] - TOL):
                    best = (res[0], v, res[1])
            if best is None:
                return
            values += (best[1],)
            if best[2] is not None:
                self.offer(best[2].objective, values, best[2])

    def report(self, lower, status) -> SolveReport:
        ordering = None
        if self.best_values is not None:
            ordering = ordering_from_values(self.decisions, self.best_values)
            for family, table in self.fixed.items():
                getattr(ordering, family).update({k: bool(v) for k, v in table.items()})
        if status == OPTIMAL and not math.isfinite(self.best_value):
            status = BUDGET_EXHAUSTED
        return SolveReport(self.best_schedule, ordering, float(lower), float(self.best_value),
                           self.nodes, time.perf_counter() - self.start, status, self.kind, self.trace)


def solve_scheduling_exact(inst: Instance, kind: ObjectiveKind | str = ObjectiveKind.WEIGHTED_TRAVEL_TIME,
                           budget: Budget | None = None, *, arrival_headway: bool = False,
                           fixed: Ordering | None = None, incumbent: Ordering | None = None) -> SolveReport:
    """Optimal ordering and schedule, or the best found when the budget runs out.

    ``fixed`` pins some pair decisions (the search covers the rest);
    ``incumbent`` is a complete ordering used as the starting upper bound.
    """
    search = _Search(inst, ObjectiveKind(kind), budget or Budget(), arrival_headway, fixed, incumbent)
    return search.run()


# --- allocation ---------------------------------------------------------------

ENUMERATION_LIMIT = 4096


def solve_allocation_exact(inst: Instance, sched: Schedule, budget: Budget | None = None,
                           method: str = "auto") -> tuple[Allocation, float]:
    """Optimal assignment of freight to departing trains for a fixed schedule.

    ``method`` is ``"enumerate"``, ``"bnb"`` or ``"auto"`` (enumerate when
    the assignment space has at most ``ENUMERATION_LIMIT`` points).
    """
    budget = budget or Budget()
    J = len(inst.freights)
    if J == 0:
        alloc = make_allocation(inst, sched, {})
        return alloc, 0.0
    cost = cost_matrix(inst, sched)
    eligible = np.isfinite(cost)
    weights = [f.weight for f in inst.freights]
    options = [[i for i in inst.departing if eligible[j, i]] for j in range(J)]
    space = math.prod(len(o) + 1 for o in options)
    if method == "auto":
        method = "enumerate" if space <= ENUMERATION_LIMIT else "bnb"

    def feasible(assign):
        loads = {i: 0.0 for i in inst.departing}
        for j, i in enumerate(assign):
            if i is not None:
                loads[i] += weights[j]
        for i in inst.departing:
            t = inst.trains[i]
            floor = inst.capacity_floor * t.capacity
            if loads[i] > t.capacity + TOL:
                return False
            if loads[i] < floor - TOL:
                pool = [weights[j] for j in range(J)
                        if assign[j] == i or (assign[j] is None and eligible[j, i])]
                if max_fill(pool, t.capacity) >= floor - TOL:
                    return False
        return True

    def value(assign):
        return sum(cost[j, i] for j, i in enumerate(assign) if i is not None)

    best, best_value = None, math.inf
    if method == "enumerate":
        for assign in itertools.product(*[o + [None] for o in options]):
            v = value(assign)
            if v < best_value - TOL and feasible(assign):
                best, best_value = assign, v
    else:
        order = sorted(range(J), key=lambda j: (-weights[j], j))
        rest_min = [0.0] * (J + 1)
        for pos in range(J - 1, -1, -1):
            j = order[pos]
            cheapest = min([cost[j, i] for i in options[j]], default=0.0)
            rest_min[pos] = rest_min[pos + 1] + min(0.0, cheapest)
        assign = [None] * J
        loads = {i: 0.0 for i in inst.departing}
        nodes = 0
        start = time.perf_counter()

        def dfs(pos, acc):
            nonlocal best, best_value, nodes
            nodes += 1
            if budget.nodes is not None and nodes > budget.nodes:
                return
            if budget.seconds is not None and time.perf_counter() - start > budget.seconds:
                return
            if acc + rest_min[pos] >= best_value - TOL:
                return
            if pos == J:
                if feasible(assign):
                    best, best_value = tuple(assign), acc
                return
            j = order[pos]
            choices = sorted(options[j], key=lambda i: (cost[j, i], i)) + [None]
            for i in choices:
                if i is None:
                    assign[j] = None
                    dfs(pos + 1, acc)
                    continue
                if loads[i] + weights[j] > inst.trains[i].capacity + TOL:
                    continue
                assign[j] = i
                loads[i] += weights[j]
                dfs(pos + 1, acc + cost[j, i])
                loads[i] -= weights[j]
                assign[j] = None

        dfs(0, 0.0)
    if best is None:
        from .allocation import greedy_allocation
        alloc = greedy_allocation(inst, sched)
        return alloc, allocation_objective(inst.freights, alloc)
    mapping = {inst.freights[j].id: (None if i is None else inst.trains[i].id) for j, i in enumerate(best)}
    alloc = make_allocation(inst, sched, mapping)
    return alloc, allocation_objective(inst.freights, alloc)
