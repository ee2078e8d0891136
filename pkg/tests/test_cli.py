import json
import re
import subprocess
import sys

import pytest

from colorsched.cli import main
from colorsched.program import dump_program
from colorsched.synthetic import synthetic_program

SWEEP_CSV = """utilization,method,schedulable_pct,avg_colors_used
0.5000,ilp_fair,100.00,8.0000
0.5000,ilp_federated,100.00,8.0000
0.5000,ilp_random,100.00,8.0000
0.5000,random_alloc,100.00,16.0000
0.5000,infinite_cache,100.00,
1.0000,ilp_fair,80.00,9.5000
1.0000,ilp_federated,70.00,10.0000
1.0000,ilp_random,60.00,10.5000
1.0000,random_alloc,30.00,16.0000
1.0000,infinite_cache,90.00,
"""


@pytest.fixture
def program_file(tmp_path):
    path = tmp_path / "prog.json"
    path.write_text(dump_program(synthetic_program(4, "nested", seed=1, task_id="p1")))
    return path


def test_wcet_table(tmp_path, program_file):
    out = tmp_path / "t.csv"
    dump = tmp_path / "c.csv"
    code = main(["wcet-table", "--program", str(program_file), "--heuristic", "fair",
                 "--n-tasks", "8", "--out", str(out), "--dump-colorings", str(dump)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "task,heuristic,colors,wcet_cycles" and len(lines) == 1 + 4
    assert dump.read_text().startswith("task,heuristic,colors,page,color")


def test_wcet_table_errors(tmp_path, program_file, capsys):
    out = str(tmp_path / "t.csv")
    assert main(["wcet-table", "--program", str(tmp_path / "nope.json"), "--heuristic",
                 "fair", "--n-tasks", "2", "--out", out]) == 2
    assert "cannot read" in capsys.readouterr().err
    assert main(["wcet-table", "--program", str(program_file), "--heuristic", "best",
                 "--n-tasks", "2", "--out", out]) == 2
    assert "fair, federated, random" in capsys.readouterr().err


def write_allocation_inputs(tmp_path, c1, c2, period=20):
    tables = tmp_path / "tables"
    tables.mkdir()
    for name, values in (("a", c1), ("b", c2)):
        rows = ["task,heuristic,colors,wcet_cycles"]
        rows += [f"{name},fair,{j},{w}" for j, w in enumerate(values, start=1)]
        (tables / f"{name}.csv").write_text("\n".join(rows) + "\n")
    taskset = tmp_path / "tasks.json"
    taskset.write_text(json.dumps({"tasks": [{"id": "a", "deadline": period, "period": period},
                                             {"id": "b", "deadline": period, "period": period}]}))
    cache = tmp_path / "cache.json"
    cache.write_text(json.dumps({"v": 1, "ways": 1, "cache_pages": 3}))
    return taskset, tables, cache


def test_allocate_feasible(tmp_path, capsys):
    taskset, tables, cache = write_allocation_inputs(tmp_path, [10, 6], [8, 5])
    code = main(["allocate", "--taskset", str(taskset), "--tables", str(tables),
                 "--cache", str(cache)])
    assert code == 0
    assert json.loads(capsys.readouterr().out) == {"feasible": True, "colors": {"a": 1, "b": 1},
                                                   "total_colors": 2}


def test_allocate_infeasible_still_exports(tmp_path, capsys):
    taskset, tables, cache = write_allocation_inputs(tmp_path, [15, 10], [15, 10])
    lp = tmp_path / "model.lp"
    code = main(["allocate", "--taskset", str(taskset), "--tables", str(tables),
                 "--cache", str(cache), "--export-lp", str(lp)])
    assert code == 1
    assert json.loads(capsys.readouterr().out)["feasible"] is False
    assert lp.read_text().startswith("\\Problem")


def test_allocate_input_errors(tmp_path):
    taskset, tables, cache = write_allocation_inputs(tmp_path, [10], [8])
    taskset.write_text(json.dumps({"tasks": [{"id": "zzz", "deadline": 5, "period": 5}]}))
    assert main(["allocate", "--taskset", str(taskset), "--tables", str(tables)]) == 2
    taskset.write_text("[")
    assert main(["allocate", "--taskset", str(taskset), "--tables", str(tables)]) == 2


def test_sweep_and_seed_override(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"programs": [{"pages": 2, "shape": "loop"},
                                            {"pages": 3, "shape": "loop"}],
                               "u_grid": {"min": 1.0, "max": 1.2, "step": 0.2},
                               "samples_per_point": 5, "deadline_mode": "constrained"}))
    outs = []
    for seed in ("1", "1", "2"):
        monkeypatch.setenv("COLORSCHED_SEED", seed)
        out = tmp_path / f"out{len(outs)}.csv"
        assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    monkeypatch.setenv("COLORSCHED_SEED", "x")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o.csv")]) == 2


def test_sweep_bad_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"u_grid": {"min": 1.0, "max": 0.5, "step": 0.1}}))
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o.csv")]) == 2


def test_plot(tmp_path):
    csv_path = tmp_path / "s.csv"
    csv_path.write_text(SWEEP_CSV)
    svg = tmp_path / "s.svg"
    assert main(["plot", "--csv", str(csv_path), "--out", str(svg)]) == 0
    text = svg.read_text()
    assert text.count("<polyline") == 5
    for m in ("ilp_fair", "ilp_federated", "ilp_random", "random_alloc", "infinite_cache"):
        assert f">{m}</text>" in text
    assert "href" not in text


def test_plot_colors_axis_capped_at_k(tmp_path):
    csv_path = tmp_path / "s.csv"
    csv_path.write_text(SWEEP_CSV)
    svg = tmp_path / "c.svg"
    assert main(["plot", "--csv", str(csv_path), "--out", str(svg), "--metric", "colors"]) == 0
    text = svg.read_text()
    ticks = [float(v) for v in re.findall(r'text-anchor="end">([\d.]+)</text>', text)]
    assert max(ticks) == 16
    # infinite_cache has no color values, so its line is empty
    assert 'data-method="infinite_cache" points=""' in text


def test_plot_empty_csv(tmp_path):
    csv_path = tmp_path / "e.csv"
    csv_path.write_text("utilization,method,schedulable_pct,avg_colors_used\n")
    assert main(["plot", "--csv", str(csv_path), "--out", str(tmp_path / "e.svg")]) == 2
    csv_path.write_text("garbage\n")
    assert main(["plot", "--csv", str(csv_path), "--out", str(tmp_path / "e.svg")]) == 2


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "colorsched.cli", "plot", "--csv",
                          str(tmp_path / "missing.csv"), "--out", str(tmp_path / "x.svg")],
                         capture_output=True, text=True)
    assert res.returncode == 2 and "error" in res.stderr
