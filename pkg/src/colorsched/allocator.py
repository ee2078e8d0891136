"""Color allocation across tasks: pick one WCET-table entry per task.

The objective is the smallest total number of colors such that the task set
passes the EDF demand test and fits into the cache's ``K`` colors. Ties are
broken towards the lexicographically smallest selection vector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .edf import (DEFAULT_POINT_CAP, CheckPointSet, analysis_horizon, count_points, dset,
                  edf_feasible, hyperperiod)
from .model import CacheConfig, ConfigError, SporadicTask, TaskSkeleton, WcetTable

UNSCHEDULABLE = "unschedulable"
OVER_CAPACITY = "exceeds capacity"


@dataclass(frozen=True)
class AllocationProblem:
    tables: tuple[WcetTable, ...]
    tasks: tuple[TaskSkeleton, ...]
    cache: CacheConfig
    # None: each candidate selection is checked up to its own busy period
    check_points: CheckPointSet | None = None
    point_cap: int = DEFAULT_POINT_CAP

    def __post_init__(self):
        if not self.tables:
            raise ConfigError("allocation problem has no tasks")
        if len(self.tables) != len(self.tasks):
            raise ConfigError(f"{len(self.tables)} tables for {len(self.tasks)} tasks")
        for tab, task in zip(self.tables, self.tasks):
            if tab.task_id != task.id:
                raise ConfigError(f"table {tab.task_id!r} is aligned with task {task.id!r}")

    @property
    def k(self) -> int:
        return self.cache.num_colors

    def tasks_with(self, selection: Sequence[int]) -> list[SporadicTask]:
        return [s.with_wcet(t.wcet(j), t.pages)
                for s, t, j in zip(self.tasks, self.tables, selection)]


def build_problem(tables: Sequence[WcetTable], tasks: Sequence[TaskSkeleton],
                  cache: CacheConfig, point_cap: int = DEFAULT_POINT_CAP) -> AllocationProblem:
    """Problem with a shared check-point set when one of tractable size exists.

    The horizon is the busy period under the largest WCETs C_i(1), or the
    hyperperiod when that one does not end. When that horizon holds more than
    ``point_cap`` deadlines, check points are derived per candidate instead.
    """
    tables, tasks = tuple(tables), tuple(tasks)
    by_id = {t.id: t for t in tasks}
    if len(by_id) != len(tasks):
        raise ConfigError("duplicate task ids")
    missing = [t.task_id for t in tables if t.task_id not in by_id]
    if missing:
        raise ConfigError(f"no timing parameters for tasks {missing}")
    tasks = tuple(by_id[t.task_id] for t in tables)
    worst = [s.with_wcet(t.wcet(1)) for s, t in zip(tasks, tables)]
    horizon = analysis_horizon(worst)
    points = None
    if count_points(worst, horizon) <= point_cap:
        points = dset(worst, horizon, point_cap)
    return AllocationProblem(tables, tasks, cache, points, point_cap)


@dataclass(frozen=True)
class Allocation:
    task_ids: tuple[str, ...]
    colors: tuple[int, ...]          # j_i per task; empty when no selection exists
    wcets: tuple[int, ...]
    feasible: bool
    violated_at: int | None = None
    reason: str = ""

    @property
    def total_colors(self) -> int:
        return sum(self.colors)

    def to_dict(self) -> dict:
        doc = {"feasible": self.feasible,
               "colors": dict(zip(self.task_ids, self.colors)),
               "total_colors": self.total_colors}
        if not self.feasible:
            doc["reason"] = self.reason
            if self.violated_at is not None:
                doc["violated_at"] = self.violated_at
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _coefficients(tasks: Sequence[TaskSkeleton], points: np.ndarray) -> np.ndarray:
    """Jobs of each task due inside [0, t] for every check point t (tasks x points)."""
    d = np.array([t.deadline for t in tasks], dtype=np.int64)[:, None]
    p = np.array([t.period for t in tasks], dtype=np.int64)[:, None]
    return np.maximum((points[None, :] - d) // p + 1, 0)


@dataclass
class _Checker:
    """Exact feasibility of full WCET vectors, memoised."""

    problem: AllocationProblem
    memo: dict = field(default_factory=dict)

    def __post_init__(self):
        tasks = self.problem.tasks
        self.hyper = hyperperiod([t.period for t in tasks])
        self.unit = [self.hyper // t.period for t in tasks]
        self.matrix = None
        if self.problem.check_points is not None:
            self.points = np.array(self.problem.check_points.points, dtype=np.int64)
            self.matrix = _coefficients(tasks, self.points)

    def check(self, wcets: tuple[int, ...]) -> tuple[bool, int | None, str]:
        hit = self.memo.get(wcets)
        if hit is None:
            hit = self.memo[wcets] = self._check(wcets)
        return hit

    def _check(self, wcets):
        if sum(c * u for c, u in zip(wcets, self.unit)) > self.hyper:
            return False, None, "utilization above 1"
        if self.matrix is None:
            tasks = [s.with_wcet(c) for s, c in zip(self.problem.tasks, wcets)]
            res = edf_feasible(tasks, self.problem.point_cap)
            return res.feasible, res.violated_at, res.reason
        points, matrix = self.points, self.matrix
        demand = np.asarray(wcets, dtype=np.int64) @ matrix
        bad = np.nonzero(demand > points)[0]
        if bad.size:
            return False, int(points[bad[0]]), "demand exceeds interval length"
        return True, None, ""


def verify(problem: AllocationProblem, selection: Sequence[int]) -> tuple[bool, int | None, str]:
    """Check one selection: capacity, utilization and demand."""
    if sum(selection) > problem.k:
        return False, None, OVER_CAPACITY
    wcets = tuple(t.wcet(j) for t, j in zip(problem.tables, selection))
    return _Checker(problem).check(wcets)


def solve(problem: AllocationProblem) -> Allocation:
    """Exact minimum-colors selection by depth-first branch and bound.

    Totals are tried in increasing order; within one total, tasks are visited
    in their given order with j ascending, so the first hit is the
    lexicographically smallest optimum. A partial selection is abandoned when
    it fails even with every undecided task at its cheapest entry.
    """
    tables = problem.tables
    n = len(tables)
    ids = tuple(t.task_id for t in tables)
    lengths = [t.s_max for t in tables]
    cheapest = [t.wcet(t.s_max) for t in tables]
    checker = _Checker(problem)

    def relaxed(prefix: tuple[int, ...]) -> bool:
        wcets = tuple(tables[i].wcet(j) for i, j in enumerate(prefix)) + tuple(cheapest[len(prefix):])
        return checker.check(wcets)[0]

    if not relaxed(()):
        wcets = tuple(cheapest)
        _, at, why = checker.check(wcets)
        return Allocation(ids, (), (), False, at, f"{UNSCHEDULABLE}: {why}")

    suffix_max = [sum(lengths[i:]) for i in range(n + 1)]

    def search(prefix: tuple[int, ...], budget: int):
        i = len(prefix)
        if i == n:
            return prefix if budget == 0 else None
        rest = n - i - 1
        for j in range(1, lengths[i] + 1):
            left = budget - j
            if left < rest:
                break
            if left > suffix_max[i + 1]:
                continue
            cand = prefix + (j,)
            if not relaxed(cand):
                continue
            found = search(cand, left)
            if found is not None:
                return found
        return None

    for total in range(n, min(problem.k, suffix_max[0]) + 1):
        found = search((), total)
        if found is not None:
            wcets = tuple(t.wcet(j) for t, j in zip(tables, found))
            return Allocation(ids, found, wcets, True)
    # something is schedulable (the relaxed root passed) but not within K colors
    return Allocation(ids, (), (), False, None, OVER_CAPACITY)


def random_allocation(problem: AllocationProblem, seed) -> Allocation:
    """One color per task, then the spare colors one by one to random non-saturated tasks."""
    tables, k = problem.tables, problem.k
    ids = tuple(t.task_id for t in tables)
    if len(tables) > k:
        return Allocation(ids, (), (), False, None, OVER_CAPACITY)
    rng = np.random.default_rng(seed)
    sel = [1] * len(tables)
    for _ in range(k - len(tables)):
        open_ = [i for i, t in enumerate(tables) if sel[i] < t.s_max]
        if not open_:
            break
        sel[open_[int(rng.integers(len(open_)))]] += 1
    ok, at, why = verify(problem, sel)
    wcets = tuple(t.wcet(j) for t, j in zip(tables, sel))
    return Allocation(ids, tuple(sel), wcets, ok, at, "" if ok else f"{UNSCHEDULABLE}: {why}")


class LpOverflow(ConfigError):
    pass


LP_COEFF_LIMIT = 10**15


def export_lp(problem: AllocationProblem) -> str:
    """The selection model as an integer program in CPLEX LP format."""
    tables, tasks = problem.tables, problem.tasks
    if problem.check_points is None:
        raise ConfigError("no shared check-point set: rebuild the problem with a larger "
                          "point cap or smaller periods before exporting")
    var = {(i, j): f"x_{i + 1}_{j}" for i, t in enumerate(tables) for j in range(1, t.s_max + 1)}

    def expr(coef) -> str:
        terms = [(coef(i, j), v) for (i, j), v in var.items()]
        terms = [(c, v) for c, v in terms if c]
        if not terms:
            return "0 " + next(iter(var.values()))
        return " + ".join(f"{c} {v}" for c, v in terms)

    hyper = hyperperiod([t.period for t in tasks])
    worst = max((tables[i].wcet(1) * (hyper // tasks[i].period) for i in range(len(tables))),
                default=0)
    if hyper > LP_COEFF_LIMIT or worst > LP_COEFF_LIMIT:
        raise LpOverflow(f"utilization row needs coefficients up to {max(hyper, worst)}; "
                         "choose periods with a smaller least common multiple")
    lines = ["\\Problem color_allocation", "Minimize", f" colors: {expr(lambda i, j: j)}",
             "Subject To"]
    for i, t in enumerate(tables):
        row = " + ".join(var[i, j] for j in range(1, t.s_max + 1))
        lines.append(f" select_{i + 1}: {row} = 1")
    lines.append(" util: " + expr(lambda i, j: tables[i].wcet(j) * (hyper // tasks[i].period))
                 + f" <= {hyper}")
    for t in problem.check_points.points:
        jobs = [max((t - s.deadline) // s.period + 1, 0) for s in tasks]
        lines.append(f" dbf_{t}: " + expr(lambda i, j, jobs=jobs: jobs[i] * tables[i].wcet(j)) + f" <= {t}")
    lines.append(f" capacity: {expr(lambda i, j: j)} <= {problem.k}")
    lines.append("Binary")
    lines.extend(f" {v}" for v in var.values())
    lines.append("End")
    return "\n".join(lines) + "\n"
