"""Freight-to-train allocation: tardiness, objective and feasibility.

Only departing trains carry freight.  A train may fall short of the capacity
floor only when its ``relax`` flag is set; :func:`relax_justified` tells
whether that is legitimate, i.e. the train could not reach the floor from its
own freight plus whatever freight is still unassigned and eligible for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .model import FormatError, Instance, Schedule, StructureError, TOL


@dataclass
class Allocation:
    assign: dict[str, str | None]
    relax: dict[str, bool] = field(default_factory=dict)
    wr: dict[str, float] = field(default_factory=dict)
    tardi: dict[str, float] = field(default_factory=dict)

    def trains_used(self) -> set[str]:
        return {t for t in self.assign.values() if t is not None}


@dataclass(frozen=True)
class AllocationViolation:
    constraint: str
    freight: str | None
    train: str | None
    slack: float


def tardiness(wr: float, due: float, clamp: bool = False) -> float:
    late = wr - due
    return max(0.0, late) if clamp else late


def allocation_objective(freights, alloc: Allocation) -> float:
    """Weighted tardiness of assigned freight minus the weight assigned."""
    total = 0.0
    for f in freights:
        if alloc.assign.get(f.id) is not None:
            total += f.priority * alloc.tardi[f.id] - f.priority
    return total


def derive_arrivals(inst: Instance, sched: Schedule, alloc: Allocation, clamp: bool = False) -> Allocation:
    wr, tardi = {}, {}
    due = {f.id: f.due for f in inst.freights}
    for fid, tid in alloc.assign.items():
        if tid is None:
            continue
        if tid not in inst.train_index:
            raise StructureError(f"freight {fid} assigned to unknown train {tid}")
        if fid not in due:
            raise StructureError(f"unknown freight {fid}")
        wr[fid] = float(sched.arr[inst.train_index[tid], -1])
        tardi[fid] = tardiness(wr[fid], due[fid], clamp)
    return Allocation(dict(alloc.assign), dict(alloc.relax), wr, tardi)


def train_loads(inst: Instance, assign: dict[str, str | None]) -> dict[str, float]:
    weight = {f.id: f.weight for f in inst.freights}
    loads = {inst.trains[i].id: 0.0 for i in inst.departing}
    for fid, tid in assign.items():
        if tid is not None:
            loads[tid] = loads.get(tid, 0.0) + weight[fid]
    return loads


def eligible(inst: Instance, sched: Schedule, freight, train_idx: int) -> bool:
    """Weight fits the train and the train leaves after release plus loading."""
    t = inst.trains[train_idx]
    return (t.departing and freight.weight <= t.capacity + TOL
            and sched.dep[train_idx, 0] >= freight.release + t.load[0] - TOL)


def max_fill(weights, capacity: float) -> float:
    """Largest subset sum of ``weights`` not exceeding ``capacity``."""
    sums = {0.0}
    for w in weights:
        sums |= {s + w for s in sums if s + w <= capacity + TOL}
    return max(sums)


def relax_justified(inst: Instance, sched: Schedule, assign: dict[str, str | None], train_id: str) -> bool:
    i = inst.train_index[train_id]
    t = inst.trains[i]
    pool = [f.weight for f in inst.freights
            if assign.get(f.id) == train_id or (assign.get(f.id) is None and eligible(inst, sched, f, i))]
    return max_fill(pool, t.capacity) < inst.capacity_floor * t.capacity - TOL


def make_allocation(inst: Instance, sched: Schedule, assign: dict[str, str | None]) -> Allocation:
    """Complete an assignment: relax flags from loads, then arrivals and tardiness."""
    assign = {f.id: assign.get(f.id) for f in inst.freights}
    loads = train_loads(inst, assign)
    relax = {}
    for i in inst.departing:
        t = inst.trains[i]
        relax[t.id] = loads[t.id] < inst.capacity_floor * t.capacity - TOL
    return derive_arrivals(inst, sched, Allocation(assign, relax))


def check_allocation(inst: Instance, sched: Schedule, alloc: Allocation, *, strict: bool = False) -> list[AllocationViolation]:
    """Violated allocation constraints.

    ``strict`` also reports relax flags that are set although the train
    could still be filled to the floor.
    """
    out: list[AllocationViolation] = []
    freights = {f.id: f for f in inst.freights}
    for fid, tid in alloc.assign.items():
        if fid not in freights:
            out.append(AllocationViolation("UnknownFreight", fid, tid, 0.0))
            continue
        if isinstance(tid, (list, tuple)):
            out.append(AllocationViolation("MultipleAssignment", fid, None, float(1 - len(tid))))
            continue
        if tid is None:
            continue
        if tid not in inst.train_index or not inst.trains[inst.train_index[tid]].departing:
            out.append(AllocationViolation("UnknownTrain", fid, tid, 0.0))
            continue
        i = inst.train_index[tid]
        f = freights[fid]
        slack = sched.dep[i, 0] - (f.release + inst.trains[i].load[0])
        if slack < -TOL:
            out.append(AllocationViolation("Release", fid, tid, float(slack)))
        expect = float(sched.arr[i, -1])
        if fid not in alloc.wr or abs(alloc.wr[fid] - expect) > TOL:
            got = alloc.wr.get(fid, float("nan"))
            out.append(AllocationViolation("ArrivalMismatch", fid, tid, float(got - expect)))
    if out and any(v.constraint in ("UnknownFreight", "MultipleAssignment", "UnknownTrain") for v in out):
        return out
    loads = train_loads(inst, alloc.assign)
    for i in inst.departing:
        t = inst.trains[i]
        load = loads[t.id]
        if load > t.capacity + TOL:
            out.append(AllocationViolation("CapacityExceeded", None, t.id, float(t.capacity - load)))
        floor = inst.capacity_floor * t.capacity
        if load < floor - TOL:
            if not alloc.relax.get(t.id, False):
                out.append(AllocationViolation("CapacityFloor", None, t.id, float(load - floor)))
            elif strict and not relax_justified(inst, sched, alloc.assign, t.id):
                out.append(AllocationViolation("UnjustifiedRelax", None, t.id, float(load - floor)))
    return out


def cost_matrix(inst: Instance, sched: Schedule) -> np.ndarray:
    """``cost[j, i]``: objective contribution of freight j on train i (inf if ineligible)."""
    cost = np.full((len(inst.freights), inst.n_trains), np.inf)
    if not inst.freights or not inst.departing:
        return cost
    dep = np.array(inst.departing)
    w = np.array([f.weight for f in inst.freights])[:, None]
    rel = np.array([f.release for f in inst.freights])[:, None]
    pri = np.array([f.priority for f in inst.freights])[:, None]
    due = np.array([f.due for f in inst.freights])[:, None]
    cap = np.array([inst.trains[i].capacity for i in dep])[None, :]
    load0 = np.array([inst.trains[i].load[0] for i in dep])[None, :]
    ok = (w <= cap + TOL) & (sched.dep[dep, 0][None, :] >= rel + load0 - TOL)
    value = pri * (sched.arr[dep, -1][None, :] - due - 1.0)
    cost[:, dep] = np.where(ok, value, np.inf)
    return cost


_MAX_SUBSET_ITEMS = 14


@lru_cache(maxsize=None)
def _subset_bits(m: int) -> np.ndarray:
    return ((np.arange(1 << m)[:, None] >> np.arange(m)) & 1).astype(float)


def _cheapest_fill(weights: np.ndarray, costs: np.ndarray, lo: float, hi: float):
    """Indices of the cheapest subset with ``lo <= total weight <= hi``, or None."""
    m = len(weights)
    if m == 0:
        return None
    if m <= _MAX_SUBSET_ITEMS:
        bits = _subset_bits(m)
        total = bits @ weights
        price = bits @ costs
        ok = (total >= lo - TOL) & (total <= hi + TOL)
        if not ok.any():
            return None
        best = np.flatnonzero(ok)[np.argmin(price[ok])]
        return [int(k) for k in np.flatnonzero(bits[best])]
    chosen, total = [], 0.0
    for k in np.lexsort((-weights, costs / weights)):
        if total + weights[k] <= hi + TOL:
            chosen.append(int(k))
            total += weights[k]
            if total >= lo - TOL:
                return chosen
    return None


def greedy_allocation(inst: Instance, sched: Schedule) -> Allocation:
    """Fast feasible allocation used inside the heuristic.

    Trains are served in order of final arrival; each takes the cheapest
    subset of still-unassigned eligible freight that reaches its floor.
    Remaining freight whose assignment lowers the objective is then placed
    wherever it fits.
    """
    cost = cost_matrix(inst, sched)
    weights = np.array([f.weight for f in inst.freights], dtype=float)
    free = np.ones(len(inst.freights), dtype=bool)
    load = {i: 0.0 for i in inst.departing}
    assign: dict[str, str | None] = {f.id: None for f in inst.freights}
    if not inst.freights:
        return make_allocation(inst, sched, assign)
    for i in sorted(inst.departing, key=lambda i: (sched.arr[i, -1], i)):
        t = inst.trains[i]
        floor = inst.capacity_floor * t.capacity
        if floor <= TOL:
            continue
        cand = np.flatnonzero(free & np.isfinite(cost[:, i]))
        pick = _cheapest_fill(weights[cand], cost[cand, i], floor, t.capacity)
        if pick is None:
            continue
        for k in pick:
            j = cand[k]
            free[j] = False
            assign[inst.freights[j].id] = t.id
            load[i] += weights[j]
    for j in np.flatnonzero(free):
        best, best_cost = None, 0.0
        for i in inst.departing:
            c = cost[j, i]
            if c < best_cost - TOL and load[i] + weights[j] <= inst.trains[i].capacity + TOL:
                best, best_cost = i, c
        if best is not None:
            assign[inst.freights[j].id] = inst.trains[best].id
            load[best] += weights[j]
    return make_allocation(inst, sched, assign)


def assignment_matrix(inst: Instance, alloc: Allocation) -> np.ndarray:
    """0/1 matrix with one row per departing train and one column per freight."""
    rows = {inst.trains[i].id: r for r, i in enumerate(inst.departing)}
    x = np.zeros((len(inst.departing), len(inst.freights)), dtype=int)
    for j, f in enumerate(inst.freights):
        tid = alloc.assign.get(f.id)
        if tid is not None:
            x[rows[tid], j] = 1
    return x


def allocation_to_dict(alloc: Allocation) -> dict:
    return {"assign": dict(alloc.assign), "relax": dict(alloc.relax),
            "wr": dict(alloc.wr), "tardi": dict(alloc.tardi)}


def allocation_from_dict(doc: dict) -> Allocation:
    if not isinstance(doc, dict) or "assign" not in doc:
        raise FormatError("allocation: missing field 'assign'")
    assign = doc["assign"]
    if not isinstance(assign, dict):
        raise FormatError("allocation.assign: expected an object")
    for fid, tid in assign.items():
        if tid is not None and not isinstance(tid, (str, list)):
            raise FormatError(f"allocation.assign.{fid}: expected a train id or null")
    relax = doc.get("relax", {})
    wr = {k: float(v) for k, v in doc.get("wr", {}).items()}
    tardi = {k: float(v) for k, v in doc.get("tardi", {}).items()}
    return Allocation(dict(assign), {k: bool(v) for k, v in relax.items()}, wr, tardi)

