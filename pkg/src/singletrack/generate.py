"""Random and fixed test instances."""

from __future__ import annotations

import math

import numpy as np

from .model import Direction, Freight, Instance, Ordering, Schedule, Train

DUE_DATE = 10.0
STATION_TIME = (0.0, 4.0)
SAFETY_TIME = (0.0, 4.0)
MIN_RUN = (0.5, 4.0)
RELEASE = (0.0, 5.0)
FREIGHT_WEIGHT = (10.0, 50.0)
TRAIN_CAPACITY = (60.0, 120.0)


def _unit_open_closed(rng, size=None):
    # Uniform on (0, 1]
    return 1.0 - rng.random(size)


def generate(n_segments: int, n_departing: int, n_returning: int, n_freights: int, seed: int) -> Instance:
    """Seeded random corridor instance; every draw is uniform on its range."""
    if n_segments < 1 or min(n_departing, n_returning, n_freights) < 0:
        raise ValueError("counts must be non-negative and n_segments >= 1")
    rng = np.random.default_rng(seed)
    n = n_segments
    trains = []
    for direction, count, prefix in ((Direction.DEPARTING, n_departing, "t"),
                                     (Direction.RETURNING, n_returning, "r")):
        for k in range(count):
            priority = float(_unit_open_closed(rng))
            min_run = rng.uniform(*MIN_RUN, n)
            load, unload, dwell = (rng.uniform(*STATION_TIME, n + 1) for _ in range(3))
            capacity = float(rng.uniform(*TRAIN_CAPACITY)) if direction is Direction.DEPARTING else 0.0
            trains.append(Train(f"{prefix}{k + 1}", direction, priority, capacity,
                                tuple(min_run), tuple(load), tuple(unload), tuple(dwell)))
    safety = tuple(rng.uniform(*SAFETY_TIME, n))
    freights = []
    for j in range(n_freights):
        freights.append(Freight(
            id=f"j{j + 1}",
            priority=float(_unit_open_closed(rng)),
            weight=float(rng.uniform(*FREIGHT_WEIGHT)),
            due=DUE_DATE,
            release=float(rng.uniform(*RELEASE)),
        ))
    inst = Instance(n, tuple(trains), tuple(freights), safety, big_m=1.0)
    return Instance(n, inst.trains, inst.freights, safety, big_m=float(math.ceil(10 * inst.horizon() + 1)))


def desk_instance() -> Instance:
    """Three departing and two returning trains on three segments, five freights.

    Under :func:`desk_ordering` the returning trains are held at the station
    between their first and second segment until ``t3`` clears segment 2
    (``t3`` runs ``pd2`` from 11.5 to 13.5), and the trains reach the end
    station at 12, 18.5 and 23.5.  The freight data make the optimal
    allocation put j1-j3 on t2, j4 on t1 and j5 on t3.
    """
    def train(tid, direction, priority, capacity, min_run, stops, load0=0.0):
        # stops: (load, unload, dwell) at the two intermediate stations
        load = [load0] + [s[0] for s in stops] + [0.0]
        unload = [0.0] + [s[1] for s in stops] + [1.0]
        dwell = [0.0] + [s[2] for s in stops] + [0.0]
        return Train(tid, direction, priority, capacity, tuple(min_run), tuple(load), tuple(unload), tuple(dwell))

    dep, ret = Direction.DEPARTING, Direction.RETURNING
    trains = (
        train("t1", dep, 1.0, 100.0, (2.0, 2.5, 3.0), ((1.0, 1.0, 1.0), (0.5, 0.5, 0.5))),
        train("t2", dep, 0.9, 75.0, (3.0, 3.0, 6.5), ((1.0, 1.0, 0.5), (0.5, 1.0, 0.5))),
        train("t3", dep, 0.8, 95.0, (3.5, 2.0, 8.0), ((2.0, 1.5, 1.5), (1.0, 0.5, 0.5))),
        train("r1", ret, 0.5, 0.0, (3.0, 2.0, 2.5), ((0.5, 0.5, 0.0), (0.5, 0.5, 0.0))),
        train("r2", ret, 0.4, 0.0, (4.0, 2.5, 2.0), ((0.5, 0.5, 0.0), (0.5, 0.5, 0.0))),
    )
    freights = (
        Freight("j1", 1.0, 20.0, DUE_DATE, 1.0),
        Freight("j2", 1.0, 20.0, DUE_DATE, 1.0),
        Freight("j3", 1.0, 20.0, DUE_DATE, 1.0),
        Freight("j4", 1.0, 97.0, DUE_DATE, 0.0),
        Freight("j5", 1.0, 90.0, DUE_DATE, 2.5),
    )
    return Instance(3, trains, freights, (1.5, 2.0, 1.0), big_m=10_000.0)


def desk_ordering(inst: Instance | None = None) -> Ordering:
    """Trains in index order; departing trains take segments 1 and 2 first,
    returning trains take segment 3 first."""
    inst = inst or desk_instance()
    dep, ret = list(inst.departing), list(inst.returning)
    orders = [dep + ret, dep + ret, ret + dep]
    return Ordering.from_segment_orders(inst, orders)


def desk_schedule() -> Schedule:
    from .timing import solve_fixed_order

    inst = desk_instance()
    return solve_fixed_order(inst, desk_ordering(inst)).schedule
