import json

import pytest

from singletrack.cli import main


@pytest.fixture
def desk(tmp_path):
    path = tmp_path / "desk.json"
    assert main(["generate", "--desk", "-o", str(path)]) == 0
    return path


def test_generate_is_seeded(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["--seed", "4", "generate", "-o", str(a)]) == 0
    assert main(["generate", "--seed", "4", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_solve_exact_then_validate_allocate_and_draw(desk, tmp_path, capsys):
    sched, report = tmp_path / "s.json", tmp_path / "r.json"
    assert main(["solve-exact", str(desk), "-o", str(sched), "--report", str(report)]) == 0
    assert json.loads(report.read_text())["status"] == "Optimal"
    assert main(["validate", str(desk), str(sched)]) == 0
    alloc = tmp_path / "a.json"
    assert main(["allocate", str(desk), str(sched), "-o", str(alloc)]) == 0
    assert main(["validate", str(desk), str(sched), "--allocation", str(alloc), "--strict"]) == 0
    svg, txt = tmp_path / "g.svg", tmp_path / "g.txt"
    assert main(["gantt", str(desk), str(sched), "-o", str(svg)]) == 0
    assert svg.read_text().startswith("<svg")
    assert main(["gantt", str(desk), str(sched), "--view", "location", "-o", str(txt)]) == 0
    assert "pd1/pdr3" in txt.read_text()


def test_validate_flags_corrupted_schedule(desk, tmp_path, capsys):
    sched = tmp_path / "s.json"
    main(["solve-exact", str(desk), "-o", str(sched), "--report", str(tmp_path / "r.json")])
    data = json.loads(sched.read_text())
    # push one arrival before its departure
    row = data["trains"]["t1"]
    row["arr"][0] = row["dep"][0] - 1.0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    capsys.readouterr()
    assert main(["validate", str(desk), str(bad)]) == 1
    assert "RunTime" in capsys.readouterr().out
    assert main(["gantt", str(desk), str(bad), "-o", str(tmp_path / "x.svg")]) == 1


def test_budget_exhausted_exit_code(tmp_path):
    inst = tmp_path / "big.json"
    main(["generate", "--departing", "14", "--returning", "7", "--freights", "0", "-o", str(inst)])
    code = main(["solve-exact", str(inst), "--budget-nodes", "20", "-o", str(tmp_path / "s.json"),
                 "--report", str(tmp_path / "r.json")])
    assert code == 3
    assert json.loads((tmp_path / "r.json").read_text())["status"] == "BudgetExhausted"


def test_usage_and_format_errors(tmp_path, capsys):
    assert main([]) == 2
    assert main(["solve-exact"]) == 2
    assert main(["solve-exact", str(tmp_path / "missing.json")]) == 2
    broken = tmp_path / "broken.json"
    broken.write_text('{"n": 3,\n oops}')
    assert main(["validate", str(broken)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["bench", "--sizes", "6,x"]) == 2


def test_solve_heuristic_is_deterministic(desk, tmp_path):
    outs = []
    for tag in "ab":
        out, trace = tmp_path / f"{tag}.json", tmp_path / f"{tag}.csv"
        args = ["solve-heuristic", str(desk), "--seed", "3", "--population", "6", "--iterations", "4",
                "-o", str(out), "--trace", str(trace)]
        assert main(args) == 0
        outs.append((out.read_bytes(), trace.read_bytes()))
    assert outs[0] == outs[1]
    sol = json.loads(outs[0][0])
    assert sorted(sol["seq_dep"]) == ["t1", "t2", "t3"]


def test_bench_writes_csv(tmp_path, capsys):
    csv_path = tmp_path / "b.csv"
    code = main(["bench", "--sizes", "6", "--population", "5", "--iterations", "2", "--budget-seconds", "0",
                 "--csv", str(csv_path)])
    assert code == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "trains,h_cpu,h_gap,h_fitness,e_cpu,e_gap,e_lower,e_upper"
    assert lines[1].split(",")[4:] == ["-"] * 4
