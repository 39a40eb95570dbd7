"""Independent reference implementations used only by the tests.

They share no code with the package beyond the data types and the
fixed-order timing solve that the brute-force search composes with.
"""

import itertools
import math

from singletrack.model import Ordering
from singletrack.timing import solve_fixed_order


def ordering_keys(inst):
    """Every pair decision of an instance, as (family, key)."""
    keys = []
    dep, ret = inst.departing, inst.returning
    for s in range(inst.n):
        keys += [("alpha", (s, a, b)) for a, b in itertools.combinations(dep, 2)]
        keys += [("beta", (s, a, b)) for a, b in itertools.combinations(ret, 2)]
        keys += [("gamma", (s, t, r)) for t in dep for r in ret]
    return keys


def all_orderings(inst):
    keys = ordering_keys(inst)
    for bits in itertools.product((False, True), repeat=len(keys)):
        tables = {"alpha": {}, "beta": {}, "gamma": {}}
        for (family, key), v in zip(keys, bits):
            tables[family][key] = v
        yield Ordering(tables["alpha"], tables["beta"], tables["gamma"])


def brute_force_schedule(inst, kind):
    """Best objective over every complete ordering, and how many were feasible."""
    best, feasible = math.inf, 0
    for ordering in all_orderings(inst):
        out = solve_fixed_order(inst, ordering, kind)
        if out.feasible:
            feasible += 1
            best = min(best, out.schedule.objective)
    return best, feasible


def naive_earliest(n_nodes, arcs):
    """Plain Bellman-Ford from an all-zero start; None on a positive cycle."""
    t = [0.0] * n_nodes
    for _ in range(n_nodes + 1):
        changed = False
        for u, v, w, _ in arcs:
            if t[u] + w > t[v] + 1e-12:
                t[v] = t[u] + w
                changed = True
        if not changed:
            return t
    return None


def _best_subset(weights, cap):
    best = 0.0
    for r in range(len(weights) + 1):
        for combo in itertools.combinations(weights, r):
            s = sum(combo)
            if s <= cap + 1e-9:
                best = max(best, s)
    return best


def brute_force_allocation(inst, sched):
    """Minimum allocation objective over every assignment, with its assignment."""
    trains = list(inst.departing)
    freights = list(inst.freights)

    def ok_for(f, i):
        t = inst.trains[i]
        return f.weight <= t.capacity + 1e-9 and sched.dep[i, 0] >= f.release + t.load[0] - 1e-9

    best, best_assign = math.inf, None
    for choice in itertools.product([None] + trains, repeat=len(freights)):
        if any(i is not None and not ok_for(f, i) for f, i in zip(freights, choice)):
            continue
        feasible = True
        for i in trains:
            t = inst.trains[i]
            load = sum(f.weight for f, c in zip(freights, choice) if c == i)
            if load > t.capacity + 1e-9:
                feasible = False
                break
            floor = inst.capacity_floor * t.capacity
            if load < floor - 1e-9:
                pool = [f.weight for f, c in zip(freights, choice)
                        if c == i or (c is None and ok_for(f, i))]
                if _best_subset(pool, t.capacity) >= floor - 1e-9:
                    feasible = False
                    break
        if not feasible:
            continue
        value = sum(f.priority * (sched.arr[c, -1] - f.due) - f.priority
                    for f, c in zip(freights, choice) if c is not None)
        if value < best - 1e-12:
            best, best_assign = value, choice
    return best, best_assign
