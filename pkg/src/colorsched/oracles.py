"""Slow, independent reference implementations used to cross-check the library.

Nothing here imports the static cache analysis, the WCET engine, the DBF code
or the allocator: each oracle rebuilds its answer from first principles.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

from .model import CacheConfig, Coloring, TaskSkeleton, WcetTable
from .program import TaskProgram


class OracleScopeError(RuntimeError):
    """The instance is too large for exhaustive treatment."""


@dataclass(frozen=True)
class PathTrace:
    blocks: tuple[str, ...]
    cycles: int
    misses: dict                  # (block, line) -> misses along this path


def _lru_access(sets: dict, key, mem, ways: int) -> bool:
    """Touch ``mem`` in a concrete LRU set; True on a miss."""
    line = sets.get(key, ())
    hit = mem in line
    line = (mem,) + tuple(m for m in line if m != mem)
    sets[key] = line[:ways]
    return not hit


def iter_paths(program: TaskProgram, coloring: Coloring | None = None,
               cache: CacheConfig | None = None, limit: int = 100_000):
    """Yield every bounded entry-to-exit path with its concrete LRU cost.

    A loop header runs at most ``bound`` times per entry of the loop; entering
    the header through a non-back edge starts a fresh count.
    """
    cache = cache or CacheConfig()
    coloring = coloring or Coloring(tuple(range(program.page_count)))
    blocks = {b.id: b for b in program.blocks}
    bounds = {lp.header: lp.bound for lp in program.loops}
    back = {e for lp in program.loops for e in lp.back_edges}
    succs: dict[str, list[str]] = {b.id: [] for b in program.blocks}
    for a, b in program.edges:
        succs[a].append(b)

    def run(block_id, sets):
        b = blocks[block_id]
        cost, missed = b.instr_count, []
        for line in range(b.first_line, b.last_line + 1):
            if _lru_access(sets, (coloring[b.page], line), (b.page, line), cache.ways):
                cost += cache.miss_penalty
                missed.append((block_id, line))
        return cost, missed

    count = steps = 0
    sets0: dict = {}
    c0, m0 = run(program.entry, sets0)
    counts0 = {program.entry: 1} if program.entry in bounds else {}
    stack = [(program.entry, (program.entry,), sets0, counts0, c0, m0)]
    while stack:
        node, path, sets, counts, cost, missed = stack.pop()
        steps += 1
        if steps > 50 * limit:
            raise OracleScopeError(f"more than {50 * limit} partial paths explored")
        if node == program.exit:
            count += 1
            if count > limit:
                raise OracleScopeError(f"more than {limit} paths")
            tally: dict = {}
            for m in missed:
                tally[m] = tally.get(m, 0) + 1
            yield PathTrace(path, cost, tally)
            continue
        for nxt in reversed(succs[node]):
            new_counts = counts
            if nxt in bounds:
                n = counts.get(nxt, 0) + 1 if (node, nxt) in back else 1
                if n > bounds[nxt]:
                    continue
                new_counts = dict(counts)
                new_counts[nxt] = n
            new_sets = dict(sets)
            c, m = run(nxt, new_sets)
            stack.append((nxt, path + (nxt,), new_sets, new_counts, cost + c, missed + m))


def enumerate_paths(program: TaskProgram, coloring: Coloring | None = None,
                    cache: CacheConfig | None = None, limit: int = 100_000) -> list[PathTrace]:
    return list(iter_paths(program, coloring, cache, limit))


def max_path_cost(program: TaskProgram, coloring: Coloring | None = None,
                  cache: CacheConfig | None = None, limit: int = 100_000) -> int:
    return max(p.cycles for p in iter_paths(program, coloring, cache, limit))


def _job_counts(tasks: Sequence[TaskSkeleton], points: Sequence[int]) -> list:
    """For each task, how many of its jobs (released from 0 on) are due by each point."""
    out = []
    for task in tasks:
        deadlines = list(range(task.deadline, max(points, default=0) + 1, task.period))
        out.append([bisect.bisect_right(deadlines, t) for t in points])
    return out


def brute_force_allocation(tables: Sequence[WcetTable], tasks: Sequence[TaskSkeleton],
                           k: int, check_points: Sequence[int] | None = None,
                           max_selections: int = 10**6):
    """Exhaustive optimum ``(total_colors, selection)`` or None when infeasible.

    Selections are tried in (total, lexicographic) order and the first one that
    fits is returned. Without explicit check points every deadline up to the
    hyperperiod is checked.
    """
    size = math.prod(t.s_max for t in tables)
    if size > max_selections:
        raise OracleScopeError(f"{size} selections exceed {max_selections}")
    hyper = math.lcm(*(t.period for t in tasks))
    if check_points is None:
        check_points = sorted({r + t.deadline for t in tasks
                               for r in range(0, hyper, t.period)})
    points = list(check_points)
    counts = _job_counts(tasks, points)
    selections = sorted(itertools.product(*(range(1, t.s_max + 1) for t in tables)),
                        key=lambda sel: (sum(sel), sel))
    for sel in selections:
        if sum(sel) > k:
            break
        wcets = [t.entries[j - 1].wcet for t, j in zip(tables, sel)]
        # utilization <= 1 compared exactly on integers
        if sum(c * (hyper // t.period) for c, t in zip(wcets, tasks)) > hyper:
            continue
        if all(sum(c * n[p] for c, n in zip(wcets, counts)) <= t
               for p, t in enumerate(points)):
            return sum(sel), sel
    return None


@dataclass(frozen=True)
class SimulationReport:
    missed: bool
    time: int | None = None       # deadline of the first job found late
    task: int | None = None


def edf_simulate(tasks: Sequence, horizon: int) -> SimulationReport:
    """Unit-step preemptive EDF from a synchronous release; ties go to the lower index.

    ``tasks`` need ``wcet``, ``deadline`` and ``period``. Deadlines up to and
    including ``horizon`` are checked.
    """
    jobs: list[list[int]] = []    # [deadline, task index, remaining]
    for t in range(horizon + 1):
        for job in jobs:
            if job[0] <= t and job[2] > 0:
                return SimulationReport(True, job[0], job[1])
        jobs = [j for j in jobs if j[2] > 0]
        if t == horizon:
            break
        for i, task in enumerate(tasks):
            if t % task.period == 0:
                jobs.append([t + task.deadline, i, task.wcet])
        if jobs:
            run = min(jobs, key=lambda j: (j[0], j[1]))
            run[2] -= 1
    return SimulationReport(False)
