import numpy as np
import pytest

from singletrack.allocation import check_allocation
from singletrack.exact import solve_scheduling_exact
from singletrack.generate import desk_instance, generate
from singletrack.heuristic import (Evaluator, HeuristicParams, construct_solution, correction_count, decode,
                                   decode_sequences, fitness, monte_carlo_select, opt_pass, reorder_toward_reference,
                                   run_heuristic, select_worst_trains, selection_probabilities, simulate,
                                   train_delays, train_score)
from singletrack.model import Direction, Freight, Instance, Ordering, Train, objective_value, validate_schedule
from singletrack.timing import build_constraint_graph, earliest_times, solve_fixed_order


def plain(tid, mr, direction=Direction.DEPARTING, priority=1.0, capacity=100.0):
    z = (0.0,) * (len(mr) + 1)
    return Train(tid, direction, priority, capacity, tuple(mr), z, z, z)


def test_train_score_examples():
    t = plain("t", (1.0,))
    assert train_score(t, [Freight("a", 30.0, 2.0, 10.0, 0.0)]) == pytest.approx(0.6)
    assert train_score(t, []) == 0.0
    fs = [Freight("a", 20.0, 1.0, 10.0, 0.0), Freight("b", 10.0, 2.0, 10.0, 0.0)]
    assert train_score(t, fs) == pytest.approx(0.4)
    assert train_score(plain("r", (1.0,), Direction.RETURNING), fs) == 0.0
    with pytest.raises(ValueError):
        train_score(plain("z", (1.0,), capacity=0.0), fs)


def test_selection_probabilities():
    assert selection_probabilities(1).tolist() == [1.0]
    assert selection_probabilities(2) == pytest.approx([2 / 3, 1 / 3])
    assert selection_probabilities(3) == pytest.approx([0.5, 1 / 3, 1 / 6])
    for k in range(1, 30):
        p = selection_probabilities(k)
        assert p.sum() == pytest.approx(1.0) and np.all(np.diff(p) < 0)


@pytest.mark.parametrize("probs", [[0.5, 0.5], [2 / 3, 1 / 3]])
def test_monte_carlo_frequencies(probs):
    rng = np.random.default_rng(123)
    draws = np.array([monte_carlo_select(probs, rng) for _ in range(100_000)])
    freq = np.bincount(draws, minlength=len(probs)) / draws.size
    assert np.all(np.abs(freq - probs) <= 0.01)


def test_monte_carlo_edge_cases():
    rng = np.random.default_rng(0)
    assert all(monte_carlo_select([1.0], rng) == 0 for _ in range(100))
    with pytest.raises(ValueError):
        monte_carlo_select([], rng)
    with pytest.raises(ValueError):
        monte_carlo_select([0.5, 0.4], rng)


def test_construct_forced_single_train():
    inst = Instance(1, (plain("t", (2.0,)),), (Freight("j", 1.0, 70.0, 10.0, 0.0),), (1.0,), 1e6)
    sol = construct_solution(inst, np.random.default_rng(0), HeuristicParams(population=5))
    assert sol.seq_dep == (0,) and sol.seq_ret == ()
    assert sol.alloc.assign == {"j": "t"}


def test_construct_desk_population_is_feasible_and_deterministic():
    inst = desk_instance()
    params = HeuristicParams()
    for k in range(50):
        sol = construct_solution(inst, np.random.default_rng([7, k, 0]), params)
        assert validate_schedule(inst, sol.sched) == []
        assert check_allocation(inst, sol.sched, sol.alloc) == []
        assert sorted(sol.seq_dep) == list(inst.departing) and sorted(sol.seq_ret) == list(inst.returning)
    a = construct_solution(inst, np.random.default_rng(3), params)
    b = construct_solution(inst, np.random.default_rng(3), params)
    assert (a.seq_dep, a.seq_ret, a.fitness) == (b.seq_dep, b.seq_ret, b.fitness)
    assert np.array_equal(a.sched.dep, b.sched.dep)


def test_fitness_combines_both_objectives():
    inst = desk_instance()
    sol = Evaluator(inst)((0, 1, 2), (3, 4))
    travel = fitness(inst, sol, 0.0)
    assert travel == pytest.approx(sol.sched.objective)
    alloc_part = fitness(inst, sol, 1.0) - travel
    assert fitness(inst, sol, 2.0) == pytest.approx(travel + 2 * alloc_part)
    empty = Instance(inst.n, inst.trains, (), inst.safety, inst.big_m)
    sol = Evaluator(empty)((0, 1, 2), (3, 4))
    assert fitness(empty, sol, 1.0) == pytest.approx(sol.sched.objective)


@pytest.mark.parametrize("phi_i,expected", [(150, 1), (100, 0), (200, 9)])
def test_correction_count_examples(phi_i, expected):
    assert correction_count(100, 200, phi_i, 0.4, 10) == expected


def test_correction_count_monotone_and_checked():
    values = [correction_count(100, 200, p, 0.4, 10) for p in np.linspace(100, 200, 201)]
    assert values == sorted(values)
    with pytest.raises(ValueError):
        correction_count(100, 200, 250, 0.4, 10)


def test_select_worst_trains():
    inst = desk_instance()
    sol = Evaluator(inst)((0, 1, 2), (3, 4))
    assert select_worst_trains(inst, sol, 0) == set()
    sched = sol.sched
    delays = []
    for i, t in enumerate(inst.trains):
        delays.append((t.priority * ((sched.arr[i, -1] - sched.dep[i, 0]) - t.free_run()), t.id, i))
    expected = {i for _, _, i in sorted(delays, key=lambda x: (-x[0], x[1]))[:2]}
    assert select_worst_trains(inst, sol, 2) == expected
    assert train_delays(inst, sched) == pytest.approx([d for d, _, _ in delays])


def test_reorder_toward_reference_examples():
    ref = [4, 3, 5, 6, 7, 8, 10, 1, 2, 9]
    assert reorder_toward_reference(list(range(1, 11)), ref, {2, 4, 10}) == [10, 1, 4, 3, 5, 6, 7, 8, 2, 9]
    assert reorder_toward_reference([1, 2, 3], [3, 2, 1], set()) == [1, 2, 3]
    # worked by hand: everything removed, then 3, 1, 4, 2 each appended in turn
    assert reorder_toward_reference([1, 2, 3, 4], [3, 1, 4, 2], {1, 2, 3, 4}) == [3, 1, 4, 2]
    with pytest.raises(ValueError):
        reorder_toward_reference([1, 2], [2, 1], {5})


def test_reorder_is_a_permutation():
    rng = np.random.default_rng(1)
    for _ in range(300):
        n = int(rng.integers(1, 12))
        seq = rng.permutation(n).tolist()
        ref = rng.permutation(n).tolist()
        sel = {x for x in seq if rng.random() < 0.4}
        out = reorder_toward_reference(seq, ref, sel)
        assert sorted(out) == sorted(seq)
        # unselected items keep their relative order
        assert [x for x in out if x not in sel] == [x for x in seq if x not in sel]


def test_opt_pass_swaps_when_it_helps():
    # whoever runs second waits 3 h before segment 2; it should be the low-priority train
    a = plain("a", (2.0, 2.0), priority=0.1)
    b = plain("b", (2.0, 2.0), priority=1.0)
    inst = Instance(2, (a, b), (), (0.0, 3.0), 1e6)
    ev = Evaluator(inst)
    worse, better = ev((0, 1), ()), ev((1, 0), ())
    assert better.fitness < worse.fitness
    assert opt_pass(inst, worse, ev).seq_dep == (1, 0)
    assert opt_pass(inst, better, ev).seq_dep == (1, 0)
    single = Instance(1, (plain("a", (2.0,)),), (), (0.0,), 1e6)
    ev1 = Evaluator(single)
    assert opt_pass(single, ev1((0,), ()), ev1).seq_dep == (0,)


def test_opt_pass_never_increases_fitness():
    for seed in range(5):
        inst = generate(3, 4, 3, 4, seed)
        ev = Evaluator(inst)
        rng = np.random.default_rng(seed)
        sol = ev(tuple(rng.permutation(inst.departing).tolist()), tuple(rng.permutation(inst.returning).tolist()))
        assert opt_pass(inst, sol, ev).fitness <= sol.fitness


def test_simulate_equals_earliest_times_of_its_ordering():
    for seed in range(20):
        inst = generate(3, 4, 3, 0, seed)
        rng = np.random.default_rng(seed)
        sched, orders = simulate(inst, tuple(rng.permutation(inst.departing).tolist()),
                                 tuple(rng.permutation(inst.returning).tolist()))
        out = earliest_times(build_constraint_graph(inst, Ordering.from_segment_orders(inst, orders)))
        assert out.feasible
        assert np.allclose(out.schedule.dep, sched.dep) and np.allclose(out.schedule.arr, sched.arr)


def test_decode_sequences_examples():
    inst = Instance(2, (plain("t", (2.0, 2.0)),), (), (1.0, 1.0), 1e6)
    assert decode_sequences(inst, (0,), ()).gamma == {}
    # t must reach the far end, r is short-haul: whoever goes first, the cheaper choice wins
    t = plain("t", (2.0,), priority=1.0)
    r = plain("r", (2.0,), Direction.RETURNING, priority=0.2)
    inst = Instance(1, (t, r), (), (0.0,), 1e6)
    values = {v: solve_fixed_order(inst, Ordering(gamma={(0, 0, 1): v})).schedule.objective for v in (True, False)}
    ordering = decode_sequences(inst, (0,), (1,))
    assert ordering.gamma[(0, 0, 1)] == min(values, key=values.get)
    for seed in range(10):
        inst = generate(3, 3, 3, 0, seed)
        ordering = decode_sequences(inst, (2, 0, 1), (5, 3, 4))
        assert ordering.missing(inst) == []
        assert solve_fixed_order(inst, ordering).feasible


def test_decode_refinement_never_worse_than_simulation():
    for seed in range(10):
        inst = generate(3, 3, 2, 0, seed)
        seqs = ((0, 1, 2), (3, 4))
        plain_sched, _ = simulate(inst, *seqs)
        fine, _ = decode(inst, *seqs)
        assert objective_value(inst, fine, "travel") <= objective_value(inst, plain_sched, "travel") + 1e-9


def test_params_are_checked():
    for bad in (dict(population=0), dict(alpha=1.0), dict(rho=0.01, population=10), dict(iterations=0)):
        with pytest.raises(ValueError):
            HeuristicParams(**bad)


def test_run_heuristic_single_train():
    inst = Instance(2, (plain("t", (2.0, 3.0)),), (), (1.0, 1.0), 1e6)
    res = run_heuristic(inst, HeuristicParams(population=5, iterations=3))
    assert res.trace[0][1] == pytest.approx(5.0)


def test_run_heuristic_determinism_and_trace(tmp_path):
    inst = generate(3, 3, 2, 5, 2)
    params = HeuristicParams(population=8, iterations=6, seed=9)
    a, b = run_heuristic(inst, params), run_heuristic(inst, params)
    assert a.trace == b.trace
    assert (a.best.seq_dep, a.best.seq_ret) == (b.best.seq_dep, b.best.seq_ret)
    bests = [x[1] for x in a.trace]
    assert bests == sorted(bests, reverse=True)
    assert validate_schedule(inst, a.best.sched) == []
    assert check_allocation(inst, a.best.sched, a.best.alloc) == []
    a.write_trace(tmp_path / "a.csv")
    b.write_trace(tmp_path / "b.csv")
    text = (tmp_path / "a.csv").read_text()
    assert text.startswith("iteration,best_fitness,mean_fitness\n")
    assert text == (tmp_path / "b.csv").read_text()


def test_run_heuristic_reaches_exact_optimum_on_desk():
    inst = desk_instance()
    res = run_heuristic(inst, HeuristicParams(population=10, iterations=10, allocation_weight=0.0))
    exact = solve_scheduling_exact(inst)
    assert res.best.fitness == pytest.approx(exact.upper_bound, abs=1e-6)
