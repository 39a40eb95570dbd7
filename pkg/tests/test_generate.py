import math
import time

import numpy as np
import pytest

from singletrack.generate import (DUE_DATE, FREIGHT_WEIGHT, MIN_RUN, RELEASE, SAFETY_TIME, STATION_TIME,
                                  TRAIN_CAPACITY, desk_instance, generate)
from singletrack.model import instance_to_dict, validate_instance


def test_deterministic_per_seed():
    a = instance_to_dict(generate(3, 3, 2, 5, 42))
    b = instance_to_dict(generate(3, 3, 2, 5, 42))
    assert a == b
    assert instance_to_dict(generate(3, 3, 2, 5, 43)) != a


def test_minimal_instance():
    inst = generate(1, 1, 0, 0, 7)
    assert inst.n == 1 and inst.n_trains == 1 and inst.freights == ()
    assert validate_instance(inst) == []


def test_rejects_bad_counts():
    with pytest.raises(ValueError):
        generate(0, 1, 1, 1, 0)
    with pytest.raises(ValueError):
        generate(2, -1, 1, 1, 0)


def test_large_instance_is_fast_and_valid():
    start = time.perf_counter()
    inst = generate(3, 60, 20, 10, 5)
    assert time.perf_counter() - start < 1.0
    assert inst.n_trains == 80 and len(inst.departing) == 60
    assert validate_instance(inst) == []


def _check_uniform(values, lo, hi, open_low=False):
    values = np.asarray(values, dtype=float)
    assert values.min() >= lo and values.max() <= hi
    if open_low:
        assert values.min() > lo
    sigma = (hi - lo) / math.sqrt(12) / math.sqrt(values.size)
    assert abs(values.mean() - (lo + hi) / 2) <= 3 * sigma


def test_sampled_values_follow_their_ranges():
    inst = generate(1, 10_000, 0, 10_000, 11)
    trains, freights = inst.trains, inst.freights
    _check_uniform([t.priority for t in trains], 0.0, 1.0, open_low=True)
    _check_uniform([t.min_run[0] for t in trains], *MIN_RUN)
    _check_uniform([t.load[0] for t in trains], *STATION_TIME)
    _check_uniform([t.unload[1] for t in trains], *STATION_TIME)
    _check_uniform([t.dwell[1] for t in trains], *STATION_TIME)
    _check_uniform([t.capacity for t in trains], *TRAIN_CAPACITY)
    _check_uniform([f.priority for f in freights], 0.0, 1.0, open_low=True)
    _check_uniform([f.weight for f in freights], *FREIGHT_WEIGHT)
    _check_uniform([f.release for f in freights], *RELEASE)
    assert all(f.due == DUE_DATE for f in freights)
    many = [generate(4, 1, 0, 0, s).safety for s in range(2500)]
    _check_uniform(np.ravel(many), *SAFETY_TIME)


def test_generated_instances_validate():
    for seed in range(30):
        assert validate_instance(generate(3, 4, 3, 6, seed)) == []


def test_desk_instance_shape():
    inst = desk_instance()
    assert inst.n == 3 and len(inst.departing) == 3 and len(inst.returning) == 2
    assert len(inst.freights) == 5 and validate_instance(inst) == []
