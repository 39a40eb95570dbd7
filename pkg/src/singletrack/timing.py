"""Event timing for a fixed ordering.

Once every precedence decision is fixed the scheduling model is a system of
difference constraints ``t(v) - t(u) >= w``; its least solution is a longest
path from a time origin.  A positive cycle means the ordering is infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .model import Instance, ObjectiveKind, Ordering, Schedule, TOL, objective_value, validate_schedule

ORIGIN = 0


class Arc(NamedTuple):
    src: int
    dst: int
    bound: float
    kind: str


def dep_node(inst: Instance, i: int, k: int) -> int:
    return 1 + 2 * (i * inst.n + k)


def arr_node(inst: Instance, i: int, k: int) -> int:
    return 2 + 2 * (i * inst.n + k)


@dataclass
class DifferenceConstraintSet:
    n_trains: int
    n_segments: int
    arcs: list[Arc]

    @property
    def n_nodes(self) -> int:
        return 1 + 2 * self.n_trains * self.n_segments


@dataclass
class TimingOutcome:
    schedule: Schedule | None = None
    cycle: list[Arc] | None = None

    @property
    def feasible(self) -> bool:
        return self.schedule is not None


class IncompleteOrdering(ValueError):
    pass


class InfeasibleSchedule(ValueError):
    pass


def base_arcs(inst: Instance) -> list[Arc]:
    """Origin, run-time and station arcs; these do not depend on the ordering."""
    arcs = []
    n = inst.n
    mr, stop = inst.min_run, inst.stop
    for i in range(inst.n_trains):
        arcs.append(Arc(ORIGIN, dep_node(inst, i, 0), 0.0, "origin"))
        for k in range(n):
            arcs.append(Arc(dep_node(inst, i, k), arr_node(inst, i, k), float(mr[i, k]), "run"))
            if k + 1 < n:
                arcs.append(Arc(arr_node(inst, i, k), dep_node(inst, i, k + 1), float(stop[i, k + 1]), "station"))
    return arcs


def decision_arcs(inst: Instance, family: str, key: tuple, value: bool,
                  arrival_headway: bool = False) -> list[Arc]:
    """Arcs added by fixing one pair decision."""
    s, a, b = key
    n = inst.n
    if family == "gamma":
        t, r = a, b
        if value:
            return [Arc(arr_node(inst, t, s), dep_node(inst, r, n - 1 - s), 0.0, "collision")]
        return [Arc(arr_node(inst, r, n - 1 - s), dep_node(inst, t, s), 0.0, "collision")]
    k = s if family == "alpha" else n - 1 - s
    first, second = (a, b) if value else (b, a)
    st = inst.safety[s]
    arcs = [Arc(dep_node(inst, first, k), dep_node(inst, second, k), st, "headway")]
    if arrival_headway:
        arcs.append(Arc(arr_node(inst, first, k), arr_node(inst, second, k), st, "arrival_headway"))
    return arcs


def build_constraint_graph(inst: Instance, ordering: Ordering, *,
                           arrival_headway: bool = False) -> DifferenceConstraintSet:
    missing = ordering.missing(inst)
    if missing:
        raise IncompleteOrdering(f"{len(missing)} undecided pairs, first {missing[0]}")
    arcs = base_arcs(inst)
    for family, table in (("alpha", ordering.alpha), ("beta", ordering.beta), ("gamma", ordering.gamma)):
        for key, value in table.items():
            arcs += decision_arcs(inst, family, key, value, arrival_headway)
    return DifferenceConstraintSet(inst.n_trains, inst.n, arcs)


def longest_paths(n_nodes: int, arcs: Sequence[Arc], want_cycle: bool = True):
    """Least solution of ``t(dst) - t(src) >= bound`` with all ``t >= 0``.

    Returns ``(times, order, cycle)``.  ``order`` is a topological order when
    the graph is acyclic (else None); ``cycle`` is a positive-cycle witness
    when the system is infeasible (else None).
    """
    out = [[] for _ in range(n_nodes)]
    indeg = [0] * n_nodes
    for idx, (u, v, w, _) in enumerate(arcs):
        out[u].append(idx)
        indeg[v] += 1
    dist = [0.0] * n_nodes
    stack = [v for v in range(n_nodes) if indeg[v] == 0]
    order = []
    while stack:
        u = stack.pop()
        order.append(u)
        du = dist[u]
        for idx in out[u]:
            _, v, w, _ = arcs[idx]
            if du + w > dist[v]:
                dist[v] = du + w
            indeg[v] -= 1
            if indeg[v] == 0:
                stack.append(v)
    if len(order) == n_nodes:
        return dist, order, None

    # Cyclic remainder: Bellman-Ford on the unprocessed part decides between
    # harmless zero-weight cycles and a positive one.
    left = [v for v in range(n_nodes) if indeg[v] > 0]
    in_left = set(left)
    sub = [idx for v in left for idx in out[v] if arcs[idx][1] in in_left]
    pred = {}
    last = None
    for _ in range(len(left)):
        last = None
        for idx in sub:
            u, v, w, _ = arcs[idx]
            if dist[u] + w > dist[v] + TOL:
                dist[v] = dist[u] + w
                pred[v] = idx
                last = v
        if last is None:
            return dist, None, None
    if not want_cycle:
        return dist, None, []
    v = last
    for _ in range(len(left)):
        v = arcs[pred[v]][0]
    cycle, u = [], v
    while True:
        idx = pred[u]
        cycle.append(arcs[idx])
        u = arcs[idx][0]
        if u == v:
            break
    cycle.reverse()
    return dist, None, cycle


def schedule_from_times(inst: Instance, times) -> Schedule:
    t = np.asarray(times, dtype=float)[1:].reshape(inst.n_trains, inst.n, 2)
    return Schedule(t[:, :, 0].copy(), t[:, :, 1].copy())


def earliest_times(g: DifferenceConstraintSet) -> TimingOutcome:
    times, _, cycle = longest_paths(g.n_nodes, g.arcs)
    if cycle is not None:
        return TimingOutcome(cycle=cycle)
    t = np.asarray(times, dtype=float)[1:].reshape(g.n_trains, g.n_segments, 2)
    return TimingOutcome(schedule=Schedule(t[:, :, 0].copy(), t[:, :, 1].copy()))


def tighten_departures(inst: Instance, sched: Schedule) -> Schedule:
    """Push every departure as late as possible while arrivals stay put.

    Upper limits on a departure come from its own run time and from the
    headway owed to the next same-direction train on that segment, so one
    backward sweep per segment in descending departure order suffices.
    """
    if validate_schedule(inst, sched):
        raise InfeasibleSchedule("tighten_departures needs a feasible schedule")
    latest = sched.arr - inst.min_run
    out = sched.copy()
    for group in (inst.departing, inst.returning):
        if not group:
            continue
        g = np.array(group)
        for k in range(inst.n):
            st = inst.safety[inst.phys[g[0], k]]
            order = g[np.lexsort((g, sched.dep[g, k]))]
            limit = np.inf
            for i in order[::-1]:
                value = min(latest[i, k], limit)
                out.dep[i, k] = max(value, sched.dep[i, k])
                limit = out.dep[i, k] - st
    out.objective = objective_value(inst, out, ObjectiveKind.WEIGHTED_TRAVEL_TIME)
    return out


def solve_fixed_order(inst: Instance, ordering: Ordering,
                      kind: ObjectiveKind | str = ObjectiveKind.WEIGHTED_TRAVEL_TIME, *,
                      arrival_headway: bool = False) -> TimingOutcome:
    kind = ObjectiveKind(kind)
    g = build_constraint_graph(inst, ordering, arrival_headway=arrival_headway)
    outcome = earliest_times(g)
    if not outcome.feasible:
        return outcome
    sched = outcome.schedule
    if kind is ObjectiveKind.WEIGHTED_TRAVEL_TIME:
        sched = tighten_departures(inst, sched)
    sched.objective = objective_value(inst, sched, kind)
    return TimingOutcome(schedule=sched)
