import math

import numpy as np
import pytest

from oracles import all_orderings, brute_force_allocation, brute_force_schedule, ordering_keys
from singletrack.allocation import allocation_objective, assignment_matrix, check_allocation
from singletrack.exact import (BUDGET_EXHAUSTED, OPTIMAL, BnBNode, Budget, solve_allocation_exact,
                               solve_scheduling_exact, scheduling_lower_bound)
from singletrack.generate import desk_instance, desk_schedule, generate
from singletrack.heuristic import simulate
from singletrack.model import Direction, Freight, Instance, Ordering, Train, validate_schedule
from singletrack.timing import solve_fixed_order


def plain(tid, mr, direction=Direction.DEPARTING, priority=1.0):
    n = len(mr)
    z = (0.0,) * (n + 1)
    return Train(tid, direction, priority, 100.0, tuple(mr), z, z, z)


def test_single_train_is_free_run_in_one_node():
    t = plain("t", (2.0, 3.0))
    inst = Instance(2, (t,), (), (1.0, 1.0), 1e6)
    rep = solve_scheduling_exact(inst)
    assert rep.status == OPTIMAL and rep.nodes_explored == 1
    assert rep.upper_bound == pytest.approx(5.0)


def test_two_identical_trains_total_departure():
    inst = Instance(1, (plain("a", (2.0,)), plain("b", (2.0,))), (), (1.0,), 1e6)
    rep = solve_scheduling_exact(inst, "departure")
    assert rep.status == OPTIMAL and rep.upper_bound == 1.0
    assert sorted(rep.schedule.dep[:, 0]) == [0.0, 1.0]


@pytest.mark.parametrize("kind", ["travel", "departure", "arrival"])
def test_matches_enumeration(kind):
    for seed in range(4):
        for d, r, n in [(2, 1, 3), (1, 2, 3), (3, 2, 1), (2, 2, 2)]:
            inst = generate(n, d, r, 0, seed)
            best, _ = brute_force_schedule(inst, kind)
            rep = solve_scheduling_exact(inst, kind)
            assert rep.status == OPTIMAL
            assert abs(rep.upper_bound - best) <= 1e-9
            assert validate_schedule(inst, rep.schedule) == []


def test_report_ordering_reproduces_schedule():
    inst = generate(3, 2, 2, 0, 1)
    rep = solve_scheduling_exact(inst)
    assert rep.ordering.missing(inst) == []
    out = solve_fixed_order(inst, rep.ordering)
    assert out.schedule.objective == pytest.approx(rep.upper_bound)


def test_lower_bound_is_valid_for_partial_orderings():
    rng = np.random.default_rng(0)
    for seed in range(3):
        inst = generate(2, 2, 2, 0, seed)
        keys = ordering_keys(inst)
        leaves = []
        for ordering in all_orderings(inst):
            out = solve_fixed_order(inst, ordering)
            leaves.append((ordering, out.schedule.objective if out.feasible else math.inf))
        for kind in ("travel", "departure", "arrival"):
            if kind != "travel":
                leaves_k = [(o, solve_fixed_order(inst, o, kind)) for o, _ in leaves]
                leaves_k = [(o, x.schedule.objective if x.feasible else math.inf) for o, x in leaves_k]
            else:
                leaves_k = leaves
            for _ in range(40):
                fixed = [k for k in keys if rng.random() < 0.5]
                values = {k: bool(rng.integers(2)) for k in fixed}
                tables = {"alpha": {}, "beta": {}, "gamma": {}}
                for (family, key), v in values.items():
                    tables[family][key] = v
                partial = Ordering(**tables)
                bound = scheduling_lower_bound(inst, BnBNode(partial), kind)
                completions = [v for o, v in leaves_k
                               if all(getattr(o, fam)[key] == val for (fam, key), val in values.items())]
                assert bound <= min(completions) + 1e-9


def test_lower_bound_examples():
    inst = Instance(1, (plain("t", (2.5,)),), (), (1.0,), 1e6)
    assert scheduling_lower_bound(inst, Ordering()) == 2.5
    inst = desk_instance()
    rep = solve_scheduling_exact(inst)
    assert scheduling_lower_bound(inst, Ordering()) <= rep.upper_bound + 1e-9
    assert scheduling_lower_bound(inst, rep.ordering) == pytest.approx(rep.upper_bound)


def test_budget_exhausted_reports_honest_gap():
    inst = generate(3, 14, 7, 0, 2)
    rep = solve_scheduling_exact(inst, budget=Budget(nodes=50))
    assert rep.status == BUDGET_EXHAUSTED
    assert rep.nodes_explored <= 50
    assert rep.lower_bound <= rep.upper_bound
    assert math.isfinite(rep.gap) and rep.gap >= 0
    assert validate_schedule(inst, rep.schedule) == []
    doc = rep.to_dict()
    assert doc["status"] == "BudgetExhausted" and doc["cpu_seconds"] == round(rep.cpu_seconds, 1)


def test_anytime_incumbent_is_nonincreasing():
    inst = generate(3, 3, 2, 0, 5)
    rep = solve_scheduling_exact(inst, "departure")
    values = [v for _, v in rep.trace]
    assert values == sorted(values, reverse=True)


def test_fixed_and_incumbent_options():
    inst = generate(3, 3, 2, 0, 4)
    full = solve_scheduling_exact(inst)
    fixed = Ordering(alpha=dict(full.ordering.alpha), beta=dict(full.ordering.beta))
    part = solve_scheduling_exact(inst, fixed=fixed, incumbent=full.ordering)
    assert part.upper_bound == pytest.approx(full.upper_bound)
    assert part.ordering.alpha == full.ordering.alpha


def test_allocation_desk_optimum():
    inst, sched = desk_instance(), desk_schedule()
    alloc, value = solve_allocation_exact(inst, sched)
    assert alloc.assign == {"j1": "t2", "j2": "t2", "j3": "t2", "j4": "t1", "j5": "t3"}
    assert value == pytest.approx(36.0)
    assert {f: alloc.tardi[f] for f in ("j1", "j4", "j5")} == {"j1": 8.5, "j4": 2.0, "j5": 13.5}
    assert assignment_matrix(inst, alloc).tolist() == [[0, 0, 0, 1, 0], [1, 1, 1, 0, 0], [0, 0, 0, 0, 1]]


@pytest.mark.parametrize("method", ["enumerate", "bnb"])
def test_allocation_matches_brute_force(method):
    for seed in range(12):
        inst = generate(3, 3, 2, 5, seed)
        rng = np.random.default_rng(seed)
        sched, _ = simulate(inst, tuple(rng.permutation(inst.departing).tolist()),
                            tuple(rng.permutation(inst.returning).tolist()))
        best, _ = brute_force_allocation(inst, sched)
        alloc, value = solve_allocation_exact(inst, sched, method=method)
        assert value == pytest.approx(best, abs=1e-9)
        assert check_allocation(inst, sched, alloc, strict=True) == []


def test_allocation_edge_cases():
    inst, sched = desk_instance(), desk_schedule()
    empty = Instance(inst.n, inst.trains, (), inst.safety, inst.big_m)
    alloc, value = solve_allocation_exact(empty, sched)
    assert alloc.assign == {} and value == 0.0
    only = Instance(inst.n, inst.trains, (Freight("j", 1.0, 96.0, 10.0, 0.0),), inst.safety, inst.big_m)
    alloc, _ = solve_allocation_exact(only, sched)
    assert alloc.assign == {"j": "t1"}   # the only train with room for 96 t


def test_allocation_argmin_invariant_under_priority_scaling():
    for seed in range(5):
        inst = generate(3, 3, 2, 5, seed)
        rng = np.random.default_rng(seed + 100)
        sched, _ = simulate(inst, tuple(rng.permutation(inst.departing).tolist()),
                            tuple(rng.permutation(inst.returning).tolist()))
        scaled = Instance(inst.n, inst.trains,
                          tuple(Freight(f.id, 3.0 * f.priority, f.weight, f.due, f.release) for f in inst.freights),
                          inst.safety, inst.big_m)
        a, v = solve_allocation_exact(inst, sched, method="enumerate")
        b, w = solve_allocation_exact(scaled, sched, method="enumerate")
        assert w == pytest.approx(3.0 * v)
        assert allocation_objective(inst.freights, b) == pytest.approx(v)
