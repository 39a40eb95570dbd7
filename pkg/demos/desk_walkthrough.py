"""Walk through the fixed three-segment desk instance end to end.

Solves the timetable exactly, assigns freight to the resulting schedule and
prints both Gantt views as text.  Run with ``python3 demos/desk_walkthrough.py``.
"""

from singletrack.allocation import allocation_objective
from singletrack.exact import solve_allocation_exact, solve_scheduling_exact
from singletrack.gantt import interruptions, render_train_location, render_train_time
from singletrack.generate import desk_instance, desk_schedule
from singletrack.model import objective_value


def main():
    inst = desk_instance()
    print(f"{inst.n} segments, {len(inst.departing)} departing and {len(inst.returning)} returning trains, "
          f"{len(inst.freights)} freights")

    # A hand-made ordering: departing trains go first on segments 1 and 2.
    sched = desk_schedule()
    print(f"\nhand ordering, weighted travel time {objective_value(inst, sched, 'travel'):.2f}")
    print(render_train_time(inst, sched, "text"))
    for i, st, excess in interruptions(inst, sched):
        print(f"{inst.trains[i].id} waits {excess:.1f} h beyond its stop at station {st}")

    alloc, value = solve_allocation_exact(inst, sched)
    print(f"\nbest freight assignment for that schedule (objective {value:.1f}):")
    for fid, tid in sorted(alloc.assign.items()):
        print(f"  {fid} -> {tid}  tardiness {alloc.tardi.get(fid, 0.0):.1f}")
    assert abs(allocation_objective(inst.freights, alloc) - value) < 1e-9

    # The exact solver does better on travel time by letting opposing trains meet elsewhere.
    rep = solve_scheduling_exact(inst)
    print(f"\nexact: {rep.status}, weighted travel time {rep.upper_bound:.2f}, {rep.nodes_explored} nodes")
    print(render_train_location(inst, rep.schedule, "text"))


if __name__ == "__main__":
    main()
