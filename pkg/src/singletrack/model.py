"""Domain types for a single-track corridor and the schedule validator.

Indexing conventions used throughout the package:

* segments are traversed in *traversal order*; index ``k`` (0-based) is the
  k-th segment a train runs over.  Departing trains run physical segments
  ``0..n-1`` in that order, returning trains run them ``n-1..0``.
* station arrays of a train have length ``n + 1`` and are also in traversal
  order: index 0 is the train's origin, index ``n`` its destination, and the
  station between traversals ``k`` and ``k + 1`` is index ``k + 1``.
* ``safety`` is indexed by physical segment (0-based).
* trains are referred to by their position in ``Instance.trains``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Sequence

import numpy as np

TOL = 1e-9


class Direction(str, enum.Enum):
    DEPARTING = "dep"
    RETURNING = "ret"


class ObjectiveKind(str, enum.Enum):
    TOTAL_DEPARTURE = "departure"
    TOTAL_ARRIVAL = "arrival"
    WEIGHTED_TRAVEL_TIME = "travel"


class StructureError(ValueError):
    """A schedule or allocation does not cover the instance it refers to."""


def physical_segment(direction: Direction | str, k: int, n: int) -> int:
    """Map a direction-relative segment name to the physical segment.

    Both ``k`` and the result are 1-based, matching the ``pdK`` / ``pdrK``
    naming: segment 1 is ``pd1`` for departing trains and ``pdrN`` for
    returning ones.
    """
    if not 1 <= k <= n:
        raise ValueError(f"segment index {k} outside 1..{n}")
    if Direction(direction) is Direction.DEPARTING:
        return k
    return n + 1 - k


@dataclass(frozen=True)
class Train:
    id: str
    direction: Direction
    priority: float
    capacity: float
    min_run: tuple[float, ...]
    load: tuple[float, ...]
    unload: tuple[float, ...]
    dwell: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        for name in ("min_run", "load", "unload", "dwell"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    @property
    def departing(self) -> bool:
        return self.direction is Direction.DEPARTING

    def stop_time(self, station: int) -> float:
        """Mandatory stop at a station given in traversal order."""
        return self.unload[station] + self.load[station] + self.dwell[station]

    def free_run(self) -> float:
        """Travel time with no interaction: runs plus intermediate stops."""
        n = len(self.min_run)
        return sum(self.min_run) + sum(self.stop_time(s) for s in range(1, n))


@dataclass(frozen=True)
class Freight:
    id: str
    priority: float
    weight: float
    due: float
    release: float


@dataclass(frozen=True)
class Instance:
    n: int
    trains: tuple[Train, ...]
    freights: tuple[Freight, ...]
    safety: tuple[float, ...]
    big_m: float
    capacity_floor: float = 0.6

    def __post_init__(self):
        object.__setattr__(self, "trains", tuple(self.trains))
        object.__setattr__(self, "freights", tuple(self.freights))
        object.__setattr__(self, "safety", tuple(float(v) for v in self.safety))

    @property
    def n_trains(self) -> int:
        return len(self.trains)

    @cached_property
    def departing(self) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.trains) if t.departing)

    @cached_property
    def returning(self) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.trains) if not t.departing)

    @cached_property
    def train_index(self) -> dict[str, int]:
        return {t.id: i for i, t in enumerate(self.trains)}

    @cached_property
    def phys(self) -> np.ndarray:
        """``phys[i, k]``: physical segment (0-based) of train i's k-th traversal."""
        k = np.arange(self.n)
        rows = [k if t.departing else self.n - 1 - k for t in self.trains]
        return np.array(rows, dtype=int).reshape(len(self.trains), self.n)

    @cached_property
    def min_run(self) -> np.ndarray:
        return np.array([t.min_run for t in self.trains], dtype=float).reshape(-1, self.n)

    @cached_property
    def stop(self) -> np.ndarray:
        """``stop[i, s]``: mandatory stop of train i at traversal-order station s."""
        rows = [[t.stop_time(s) for s in range(self.n + 1)] for t in self.trains]
        return np.array(rows, dtype=float).reshape(-1, self.n + 1)

    @cached_property
    def priority(self) -> np.ndarray:
        return np.array([t.priority for t in self.trains], dtype=float)

    @cached_property
    def free_run(self) -> np.ndarray:
        return np.array([t.free_run() for t in self.trains], dtype=float)

    def horizon(self) -> float:
        """Crude upper estimate of any event time in a compact schedule."""
        total = 0.0
        for t in self.trains:
            total += sum(t.min_run) + sum(t.load) + sum(t.unload) + sum(t.dwell)
        return total + len(self.trains) * sum(self.safety)


@dataclass(frozen=True)
class Defect:
    kind: str
    where: str
    detail: str = ""


def validate_instance(inst: Instance) -> list[Defect]:
    """Every violated type invariant of ``inst``; empty means valid."""
    out: list[Defect] = []
    n = inst.n
    if not isinstance(n, (int, np.integer)) or n < 1:
        return [Defect("BadSegmentCount", "n", f"n={n!r}")]

    def check_times(values, length, where):
        if len(values) != length:
            out.append(Defect("WrongLength", where, f"expected {length}, got {len(values)}"))
        for idx, v in enumerate(values):
            if not math.isfinite(v):
                out.append(Defect("NonFiniteTime", f"{where}[{idx}]", repr(v)))
            elif v < 0:
                out.append(Defect("NegativeTime", f"{where}[{idx}]", repr(v)))

    check_times(inst.safety, n, "safety")
    seen: set[str] = set()
    for t in inst.trains:
        if t.id in seen:
            out.append(Defect("DuplicateId", f"train {t.id}"))
        seen.add(t.id)
        if not (0 < t.priority <= 1) or not math.isfinite(t.priority):
            out.append(Defect("BadPriority", f"train {t.id}", repr(t.priority)))
        if not math.isfinite(t.capacity) or t.capacity < 0:
            out.append(Defect("BadCapacity", f"train {t.id}", repr(t.capacity)))
        check_times(t.min_run, n, f"train {t.id}.min_run")
        for name in ("load", "unload", "dwell"):
            check_times(getattr(t, name), n + 1, f"train {t.id}.{name}")
    seen = set()
    for f in inst.freights:
        if f.id in seen:
            out.append(Defect("DuplicateId", f"freight {f.id}"))
        seen.add(f.id)
        if not f.priority > 0:
            out.append(Defect("BadPriority", f"freight {f.id}", repr(f.priority)))
        if not f.weight > 0:
            out.append(Defect("BadWeight", f"freight {f.id}", repr(f.weight)))
        if not f.due >= 0:
            out.append(Defect("NegativeTime", f"freight {f.id}.due", repr(f.due)))
        if not f.release >= 0:
            out.append(Defect("NegativeTime", f"freight {f.id}.release", repr(f.release)))
    if not 0 <= inst.capacity_floor <= 1:
        out.append(Defect("BadCapacityFloor", "capacity_floor", repr(inst.capacity_floor)))
    if inst.freights and not any(t.departing for t in inst.trains):
        out.append(Defect("NoDepartingTrain", "trains", "freight present but nothing to carry it"))
    shapes_ok = not any(d.kind == "WrongLength" for d in out)
    if shapes_ok and not any(d.kind in ("NonFiniteTime",) for d in out):
        horizon = inst.horizon()
        if not inst.big_m >= 10 * horizon or not math.isfinite(inst.big_m):
            out.append(Defect("BigMTooSmall", "big_m", f"big_m={inst.big_m} < 10 x horizon {horizon:g}"))
    return out


@dataclass(frozen=True)
class Ordering:
    """Fixed precedence decisions.

    ``alpha[(s, a, b)]`` (departing trains ``a < b`` by index, physical
    segment ``s``) is True when ``a`` departs ``s`` first; ``beta`` is the same
    for returning pairs.  ``gamma[(s, t, r)]`` is True when departing ``t``
    clears ``s`` before returning ``r`` enters it.
    """

    alpha: dict = field(default_factory=dict)
    beta: dict = field(default_factory=dict)
    gamma: dict = field(default_factory=dict)

    @classmethod
    def from_segment_orders(cls, inst: Instance, orders: Sequence[Sequence[int]]) -> "Ordering":
        """Build the ordering implied by one total order of trains per physical segment."""
        alpha, beta, gamma = {}, {}, {}
        for s, order in enumerate(orders):
            pos = {t: p for p, t in enumerate(order)}
            for ia, a in enumerate(inst.departing):
                for b in inst.departing[ia + 1:]:
                    alpha[(s, a, b)] = pos[a] < pos[b]
                for r in inst.returning:
                    gamma[(s, a, r)] = pos[a] < pos[r]
            for ia, a in enumerate(inst.returning):
                for b in inst.returning[ia + 1:]:
                    beta[(s, a, b)] = pos[a] < pos[b]
        return cls(alpha, beta, gamma)

    def missing(self, inst: Instance) -> list[tuple]:
        keys = []
        for s in range(inst.n):
            for ia, a in enumerate(inst.departing):
                keys += [("alpha", s, a, b) for b in inst.departing[ia + 1:] if (s, a, b) not in self.alpha]
                keys += [("gamma", s, a, r) for r in inst.returning if (s, a, r) not in self.gamma]
            for ia, a in enumerate(inst.returning):
                keys += [("beta", s, a, b) for b in inst.returning[ia + 1:] if (s, a, b) not in self.beta]
        return keys


@dataclass
class Schedule:
    """Event times; ``dep[i, k]`` / ``arr[i, k]`` for train i, traversal k."""

    dep: np.ndarray
    arr: np.ndarray
    objective: float = float("nan")

    def copy(self) -> "Schedule":
        return Schedule(self.dep.copy(), self.arr.copy(), self.objective)

    def first_departure(self) -> np.ndarray:
        return self.dep[:, 0]

    def last_arrival(self) -> np.ndarray:
        return self.arr[:, -1]


@dataclass(frozen=True)
class Violation:
    constraint: str
    trains: tuple
    segment: int
    slack: float

    def __str__(self):
        names = ",".join(str(t) for t in self.trains)
        return f"{self.constraint}[{names}] segment {self.segment}: slack {self.slack:+.6g}"


def check_schedule_shape(inst: Instance, sched: Schedule) -> None:
    shape = (inst.n_trains, inst.n)
    for name in ("dep", "arr"):
        a = np.asarray(getattr(sched, name))
        if a.shape != shape:
            raise StructureError(f"{name} has shape {a.shape}, expected {shape}")
        if not np.all(np.isfinite(a)):
            i, k = np.argwhere(~np.isfinite(a))[0]
            raise StructureError(f"missing {name} time for train {inst.trains[i].id} traversal {k}")


def validate_schedule(inst: Instance, sched: Schedule, *, arrival_headway: bool = False,
                      tol: float = TOL) -> list[Violation]:
    """Every broken scheduling constraint, one record each.

    Families: ``RunTime``, ``StationStop``, ``Headway``, ``Collision`` and
    ``NegativeTime``.  Segments in records are physical, 0-based.
    """
    check_schedule_shape(inst, sched)
    dep, arr = np.asarray(sched.dep, float), np.asarray(sched.arr, float)
    ids = [t.id for t in inst.trains]
    phys = inst.phys
    out: list[Violation] = []

    for i, k in np.argwhere((dep < -tol) | (arr < -tol)):
        out.append(Violation("NegativeTime", (ids[i],), int(phys[i, k]), float(min(dep[i, k], arr[i, k]))))

    slack = arr - dep - inst.min_run
    for i, k in np.argwhere(slack < -tol):
        out.append(Violation("RunTime", (ids[i],), int(phys[i, k]), float(slack[i, k])))

    if inst.n > 1:
        slack = dep[:, 1:] - arr[:, :-1] - inst.stop[:, 1:-1]
        for i, k in np.argwhere(slack < -tol):
            out.append(Violation("StationStop", (ids[i],), int(phys[i, k + 1]), float(slack[i, k])))

    for group in (inst.departing, inst.returning):
        for ia, a in enumerate(group):
            for b in group[ia + 1:]:
                for k in range(inst.n):
                    st = inst.safety[phys[a, k]]
                    gap = abs(dep[a, k] - dep[b, k]) - st
                    if gap < -tol:
                        out.append(Violation("Headway", (ids[a], ids[b]), int(phys[a, k]), float(gap)))
                    if arrival_headway:
                        gap = abs(arr[a, k] - arr[b, k]) - st
                        if gap < -tol:
                            out.append(Violation("ArrivalHeadway", (ids[a], ids[b]), int(phys[a, k]), float(gap)))

    n = inst.n
    for t in inst.departing:
        for r in inst.returning:
            for s in range(n):
                kr = n - 1 - s
                gap = max(dep[r, kr] - arr[t, s], dep[t, s] - arr[r, kr])
                if gap < -tol:
                    out.append(Violation("Collision", (ids[t], ids[r]), s, float(gap)))
    return out


def objective_value(inst: Instance, sched: Schedule, kind: ObjectiveKind | str) -> float:
    kind = ObjectiveKind(kind)
    if kind is ObjectiveKind.TOTAL_DEPARTURE:
        return float(np.sum(sched.dep[:, 0]))
    if kind is ObjectiveKind.TOTAL_ARRIVAL:
        return float(np.sum(sched.arr[:, -1]))
    return float(np.dot(inst.priority, sched.arr[:, -1] - sched.dep[:, 0]))


# --- JSON --------------------------------------------------------------------

class FormatError(ValueError):
    """Malformed input document; the message names the offending field."""


def _need(obj: dict, key: str, where: str) -> Any:
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected an object")
    if key not in obj:
        raise FormatError(f"{where}: missing field '{key}'")
    return obj[key]


def _num(value, where) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _nums(value, where) -> list[float]:
    if not isinstance(value, list):
        raise FormatError(f"{where}: expected an array")
    return [_num(v, f"{where}[{i}]") for i, v in enumerate(value)]


def instance_to_dict(inst: Instance) -> dict:
    return {
        "n": inst.n,
        "safety": list(inst.safety),
        "big_m": inst.big_m,
        "capacity_floor": inst.capacity_floor,
        "trains": [
            {
                "id": t.id,
                "direction": t.direction.value,
                "priority": t.priority,
                "capacity": t.capacity,
                "min_run": list(t.min_run),
                "load": list(t.load),
                "unload": list(t.unload),
                "dwell": list(t.dwell),
            }
            for t in inst.trains
        ],
        "freights": [
            {"id": f.id, "priority": f.priority, "weight": f.weight, "due": f.due, "release": f.release}
            for f in inst.freights
        ],
    }


def instance_from_dict(doc: dict) -> Instance:
    n = _need(doc, "n", "instance")
    if isinstance(n, bool) or not isinstance(n, int):
        raise FormatError(f"instance.n: expected an integer, got {n!r}")
    trains = []
    for i, t in enumerate(_need(doc, "trains", "instance")):
        where = f"trains[{i}]"
        direction = _need(t, "direction", where)
        if direction not in ("dep", "ret"):
            raise FormatError(f"{where}.direction: expected 'dep' or 'ret', got {direction!r}")
        trains.append(Train(
            id=str(_need(t, "id", where)),
            direction=Direction(direction),
            priority=_num(_need(t, "priority", where), f"{where}.priority"),
            capacity=_num(t.get("capacity", 0.0), f"{where}.capacity"),
            min_run=tuple(_nums(_need(t, "min_run", where), f"{where}.min_run")),
            load=tuple(_nums(_need(t, "load", where), f"{where}.load")),
            unload=tuple(_nums(_need(t, "unload", where), f"{where}.unload")),
            dwell=tuple(_nums(_need(t, "dwell", where), f"{where}.dwell")),
        ))
    freights = []
    for i, f in enumerate(doc.get("freights", [])):
        where = f"freights[{i}]"
        freights.append(Freight(
            id=str(_need(f, "id", where)),
            priority=_num(_need(f, "priority", where), f"{where}.priority"),
            weight=_num(_need(f, "weight", where), f"{where}.weight"),
            due=_num(_need(f, "due", where), f"{where}.due"),
            release=_num(_need(f, "release", where), f"{where}.release"),
        ))
    return Instance(
        n=n,
        trains=tuple(trains),
        freights=tuple(freights),
        safety=tuple(_nums(_need(doc, "safety", "instance"), "instance.safety")),
        big_m=_num(_need(doc, "big_m", "instance"), "instance.big_m"),
        capacity_floor=_num(doc.get("capacity_floor", 0.6), "instance.capacity_floor"),
    )


def schedule_to_dict(inst: Instance, sched: Schedule) -> dict:
    return {
        "objective": None if math.isnan(sched.objective) else sched.objective,
        "trains": {
            t.id: {"dep": [float(v) for v in sched.dep[i]], "arr": [float(v) for v in sched.arr[i]]}
            for i, t in enumerate(inst.trains)
        },
    }


def schedule_from_dict(inst: Instance, doc: dict) -> Schedule:
    trains = _need(doc, "trains", "schedule")
    if not isinstance(trains, dict):
        raise FormatError("schedule.trains: expected an object keyed by train id")
    dep = np.full((inst.n_trains, inst.n), np.nan)
    arr = np.full((inst.n_trains, inst.n), np.nan)
    for tid, times in trains.items():
        if tid not in inst.train_index:
            raise FormatError(f"schedule.trains.{tid}: unknown train")
        i = inst.train_index[tid]
        for name, target in (("dep", dep), ("arr", arr)):
            vals = _nums(_need(times, name, f"schedule.trains.{tid}"), f"schedule.trains.{tid}.{name}")
            if len(vals) != inst.n:
                raise FormatError(f"schedule.trains.{tid}.{name}: expected {inst.n} values, got {len(vals)}")
            target[i] = vals
    obj = doc.get("objective")
    return Schedule(dep, arr, float("nan") if obj is None else float(obj))


def load_json(path) -> Any:
    """Read JSON, turning decode errors into :class:`FormatError` with line/column."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def dump_json(obj: Any, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


def iter_pairs(group: Iterable[int]):
    group = list(group)
    for ia, a in enumerate(group):
        for b in group[ia + 1:]:
            yield a, b
