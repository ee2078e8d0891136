import re

import numpy as np
import pytest

from colorsched.allocator import (AllocationProblem, LpOverflow, build_problem, export_lp,
                                  random_allocation, solve, verify)
from colorsched.edf import edf_feasible
from colorsched.model import CacheConfig, ConfigError, TaskSkeleton, WcetTable
from colorsched.oracles import brute_force_allocation


def colors(k):
    return CacheConfig(ways=1, cache_pages=k)


def two_tasks(k=3, a=(10, 6), b=(8, 5)):
    tables = [WcetTable.from_wcets("a", list(a)), WcetTable.from_wcets("b", list(b))]
    tasks = [TaskSkeleton("a", 20, 20), TaskSkeleton("b", 20, 20)]
    return build_problem(tables, tasks, colors(k))


def test_cheapest_schedulable_selection():
    alloc = solve(two_tasks())
    assert alloc.feasible and alloc.colors == (1, 1) and alloc.total_colors == 2
    assert alloc.to_dict() == {"feasible": True, "colors": {"a": 1, "b": 1}, "total_colors": 2}


def test_hopeless_single_task():
    tables = [WcetTable.from_wcets("a", [30, 30])]
    alloc = solve(build_problem(tables, [TaskSkeleton("a", 20, 20)], colors(3)))
    assert not alloc.feasible and "unschedulable" in alloc.reason


def test_optimum_above_capacity():
    problem = two_tasks(k=3, a=(15, 10), b=(15, 10))
    alloc = solve(problem)
    assert not alloc.feasible and alloc.reason == "exceeds capacity"
    assert solve(two_tasks(k=4, a=(15, 10), b=(15, 10))).colors == (2, 2)


def test_problem_validation():
    with pytest.raises(ConfigError):
        build_problem([WcetTable.from_wcets("a", [1])], [TaskSkeleton("b", 5, 5)], colors(2))
    with pytest.raises(ConfigError):
        AllocationProblem((), (), colors(2))


def random_instance(rng, max_tasks=5, max_len=4, max_k=8, max_period=24):
    n = int(rng.integers(1, max_tasks + 1))
    k = int(rng.integers(n, max_k + 1))
    tables, tasks = [], []
    for i in range(n):
        length = int(rng.integers(1, max_len + 1))
        w = sorted(rng.integers(1, 12, length).tolist(), reverse=True)
        t = int(rng.integers(4, max_period + 1))
        tables.append(WcetTable.from_wcets(f"t{i}", w))
        tasks.append(TaskSkeleton(f"t{i}", int(rng.integers(max(1, t // 2), t + 1)), t))
    return tables, tasks, k


def test_solver_matches_exhaustive_search():
    rng = np.random.default_rng(11)
    for _ in range(150):
        tables, tasks, k = random_instance(rng)
        alloc = solve(build_problem(tables, tasks, colors(k)))
        best = brute_force_allocation(tables, tasks, k)
        assert (alloc.total_colors, alloc.colors) == best if best else not alloc.feasible


def test_returned_allocations_recheck_independently():
    rng = np.random.default_rng(12)
    for _ in range(100):
        tables, tasks, k = random_instance(rng)
        problem = build_problem(tables, tasks, colors(k))
        alloc = solve(problem)
        if alloc.feasible:
            assert alloc.total_colors <= k
            assert edf_feasible(problem.tasks_with(alloc.colors)).feasible


def test_feasibility_is_upward_closed():
    rng = np.random.default_rng(13)
    for _ in range(60):
        tables, tasks, k = random_instance(rng, max_tasks=3)
        problem = build_problem(tables, tasks, colors(k))
        alloc = solve(problem)
        if not alloc.feasible:
            continue
        for i, t in enumerate(tables):
            if alloc.colors[i] < t.s_max:
                up = list(alloc.colors)
                up[i] += 1
                if sum(up) <= k:
                    assert verify(problem, up)[0]


def test_shared_points_fall_back_to_per_candidate_checks():
    tables = [WcetTable.from_wcets("a", [3, 2]), WcetTable.from_wcets("b", [5, 3])]
    tasks = [TaskSkeleton("a", 6, 7), TaskSkeleton("b", 10, 11)]
    shared = build_problem(tables, tasks, colors(4))
    alone = build_problem(tables, tasks, colors(4), point_cap=1)
    assert shared.check_points is not None and alone.check_points is None
    assert solve(shared) == solve(alone)


def test_random_allocation():
    tables = [WcetTable.from_wcets(f"t{i}", [9, 8, 7, 6, 5]) for i in range(8)]
    tasks = [TaskSkeleton(f"t{i}", 1000, 1000) for i in range(8)]
    full = build_problem(tables, tasks, colors(8))
    assert random_allocation(full, 1).colors == (1,) * 8
    problem = build_problem(tables, tasks, colors(16))
    for seed in range(20):
        alloc = random_allocation(problem, seed)
        assert alloc.total_colors == 16 and alloc.feasible
    assert random_allocation(problem, 3) == random_allocation(problem, 3)
    crowded = build_problem(tables, tasks, colors(4))
    assert not random_allocation(crowded, 0).feasible


def test_random_allocation_respects_table_length():
    tables = [WcetTable.from_wcets("a", [5]), WcetTable.from_wcets("b", [5, 4])]
    tasks = [TaskSkeleton("a", 50, 50), TaskSkeleton("b", 50, 50)]
    alloc = random_allocation(build_problem(tables, tasks, colors(8)), 0)
    assert alloc.colors == (1, 2)


def parse_lp(text):
    """Minimal reader for the subset of LP format that export_lp writes."""
    section, objective, rows, names = None, {}, [], []
    term = re.compile(r"(\d+) (x_\d+_\d+)")
    for raw in text.splitlines():
        line = raw.strip()
        if line in ("Minimize", "Subject To", "Binary", "End") or line.startswith("\\"):
            section = line
            continue
        if section == "Minimize":
            objective = {v: int(c) for c, v in term.findall(line.split(":", 1)[1])}
        elif section == "Subject To":
            body = line.split(":", 1)[1]
            lhs, sense, rhs = re.match(r"(.*?)\s*(<=|=)\s*(\d+)$", body).groups()
            coeffs = {v: int(c) for c, v in term.findall(lhs)}
            coeffs.update({v: 1 for v in re.findall(r"(?<!\d )(x_\d+_\d+)", lhs)
                           if v not in coeffs})
            rows.append((coeffs, sense, int(rhs)))
        elif section == "Binary":
            names.append(line)
    return objective, rows, names


def test_lp_structure():
    problem = two_tasks()
    objective, rows, names = parse_lp(export_lp(problem))
    assert len(names) == 4
    senses = [s for _, s, _ in rows]
    assert senses.count("=") == 2
    assert len(rows) == 2 + 1 + len(problem.check_points) + 1
    assert objective == {"x_1_1": 1, "x_1_2": 2, "x_2_1": 1, "x_2_2": 2}


def test_lp_single_entry_has_constant_objective():
    tables = [WcetTable.from_wcets("a", [4])]
    problem = build_problem(tables, [TaskSkeleton("a", 10, 10)], colors(2))
    objective, rows, names = parse_lp(export_lp(problem))
    assert names == ["x_1_1"] and objective == {"x_1_1": 1}


def test_lp_overflow():
    tables = [WcetTable.from_wcets(str(k), [1]) for k in range(4)]
    primes = [1_000_003, 1_000_033, 1_000_037, 1_000_039]
    tasks = [TaskSkeleton(str(k), p, p) for k, p in enumerate(primes)]
    problem = build_problem(tables, tasks, colors(4))
    with pytest.raises(LpOverflow, match="least common multiple"):
        export_lp(problem)


def test_lp_optimum_matches_solver():
    """Exported model solved by an external MILP routine gives the same optimum."""
    scipy_opt = pytest.importorskip("scipy.optimize")
    rng = np.random.default_rng(21)
    for _ in range(50):
        tables, tasks, k = random_instance(rng, max_period=12)
        problem = build_problem(tables, tasks, colors(k))
        objective, rows, names = parse_lp(export_lp(problem))
        index = {v: i for i, v in enumerate(names)}
        c = np.zeros(len(names))
        for v, w in objective.items():
            c[index[v]] = w
        a = np.zeros((len(rows), len(names)))
        lo, hi = [], []
        for r, (coeffs, sense, rhs) in enumerate(rows):
            for v, w in coeffs.items():
                a[r, index[v]] = w
            lo.append(rhs if sense == "=" else -np.inf)
            hi.append(rhs)
        res = scipy_opt.milp(c, constraints=scipy_opt.LinearConstraint(a, lo, hi),
                             integrality=np.ones(len(names)), bounds=scipy_opt.Bounds(0, 1))
        alloc = solve(problem)
        if alloc.feasible:
            assert res.status == 0 and round(res.fun) == alloc.total_colors
        else:
            assert res.status == 2
