"""Loop-nest WCET over classified accesses, and per-task WCET tables.

Cost model: one cycle per instruction, ``miss_penalty`` cycles per line miss,
hits free.

Loops are collapsed innermost first. Inside the body of a loop, child loops
are single super-nodes and the loop's own back edges are dropped, which
leaves a DAG rooted at the header. Per loop entry at most ``bound`` header
executions happen: ``bound - 1`` full iterations (header to a back edge) and
one final pass (header to an edge leaving the loop), so

    cost = (bound - 1) * longest_iteration + longest_exit_pass + first_misses

First-miss accesses are charged once per entry of a loop in which they are
persistent, and are free everywhere inside it. The charge is only taken when
the access lies on every iteration path at each nesting level between that
loop and the access (and every loop in between iterates at least twice);
otherwise the access is charged on each execution like an unclassified one.
With that rule a stronger classification never yields a larger WCET, which is
what makes the conflict-free bound a lower bound of every colored WCET.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

from .cache import Access, AccessClass, classify
from .coloring import HEURISTICS, coloring_for
from .model import CacheConfig, Coloring, WcetEntry, WcetTable, s_max
from .program import TaskProgram


@dataclass(frozen=True)
class CostedBlock:
    id: str
    base_cycles: int
    miss_cycles: int

    @property
    def cycles(self) -> int:
        return self.base_cycles + self.miss_cycles


@dataclass(frozen=True)
class LoopSummary:
    header: str
    bound: int
    iteration_cycles: int
    exit_cycles: int
    fm_charge: int

    @property
    def cycles(self) -> int:
        return (self.bound - 1) * self.iteration_cycles + self.exit_cycles + self.fm_charge


@dataclass(frozen=True)
class WcetReport:
    wcet: int
    classes: Mapping[Access, AccessClass]
    blocks: Mapping[str, CostedBlock]
    loops: Mapping[str, LoopSummary]
    # access -> loop header charged once per entry, or None when charged per execution
    charges: Mapping[Access, str | None]


@dataclass(frozen=True)
class _ScopeGraph:
    start: str
    nodes: tuple[str, ...]                     # topological order
    preds: Mapping[str, tuple[str, ...]]
    iteration_ends: frozenset[str]
    exit_ends: frozenset[str]


def _rep(program: TaskProgram, block: str, scope: str | None) -> str:
    """Node standing for ``block`` inside ``scope``: the block or a child loop header."""
    chain = program.loop_chain[block]
    k = 0 if scope is None else chain.index(scope) + 1
    return chain[k] if k < len(chain) else block


def _scope_graph(program: TaskProgram, scope: str | None) -> _ScopeGraph:
    body = program.loop_bodies[scope] if scope is not None else program.block_map.keys()
    back = program.loop_map[scope].back_edges if scope is not None else ()
    nodes: set[str] = set()
    preds: dict[str, set[str]] = {}
    iteration_ends, exit_ends = set(), set()
    for n in body:
        r = _rep(program, n, scope)
        nodes.add(r)
        preds.setdefault(r, set())
        for m in program.succs[n]:
            if (n, m) in back:
                iteration_ends.add(r)
            elif m not in body:
                exit_ends.add(r)
            else:
                s = _rep(program, m, scope)
                if s != r:
                    preds.setdefault(s, set()).add(r)
    start = scope if scope is not None else _rep(program, program.entry, None)
    order = _topological(nodes, preds)
    return _ScopeGraph(start, tuple(order), {k: tuple(sorted(v)) for k, v in preds.items()},
                       frozenset(iteration_ends), frozenset(exit_ends))


def _topological(nodes: set[str], preds: Mapping[str, set[str]]) -> list[str]:
    done: list[str] = []
    placed: set[str] = set()
    for root in sorted(nodes):
        stack = [(root, iter(sorted(preds[root])))]
        if root in placed:
            continue
        placed.add(root)
        while stack:
            node, it = stack[-1]
            p = next(it, None)
            if p is None:
                stack.pop()
                done.append(node)
            elif p not in placed:
                placed.add(p)
                stack.append((p, iter(sorted(preds[p]))))
    return done


def _on_every_iteration(g: _ScopeGraph, node: str) -> bool:
    """True when every header-to-back-edge path of the scope passes ``node``."""
    if node == g.start:
        return True
    succs: dict[str, list[str]] = {}
    for v, ps in g.preds.items():
        for p in ps:
            succs.setdefault(p, []).append(v)
    seen, stack = {g.start}, [g.start]
    while stack:
        n = stack.pop()
        for m in succs.get(n, ()):
            if m != node and m not in seen:
                seen.add(m)
                stack.append(m)
    return not (seen & g.iteration_ends)


@lru_cache(maxsize=256)
def _structure(program: TaskProgram):
    graphs = {h: _scope_graph(program, h) for h in program.loop_bodies}
    top = _scope_graph(program, None)
    mandatory = {h: frozenset(n for n in g.nodes if _on_every_iteration(g, n))
                 for h, g in graphs.items()}
    return graphs, top, mandatory


def charge_plan(program: TaskProgram,
                classes: Mapping[Access, AccessClass]) -> dict[Access, str | None]:
    """Where each missing access is paid: a loop header (once per entry) or None."""
    graphs, _, mandatory = _structure(program)
    plan: dict[Access, str | None] = {}
    for access, cls in classes.items():
        if cls.kind == "AH":
            continue
        plan[access] = None
        if cls.kind != "FM":
            continue
        block = access[0]
        chain = program.loop_chain[block]
        outermost = chain.index(cls.scope)
        for k in range(len(chain) - 1, outermost - 1, -1):
            h = chain[k]
            inner = chain[k + 1] if k + 1 < len(chain) else block
            if program.loop_map[h].bound < 2 or inner not in mandatory[h]:
                break
            plan[access] = h
    return plan


def _longest(g: _ScopeGraph, weight: Mapping[str, int]) -> dict[str, int]:
    dist: dict[str, int] = {}
    for n in g.nodes:
        if n == g.start:
            dist[n] = weight[n]
            continue
        best = [dist[p] for p in g.preds[n] if p in dist]
        if best:
            dist[n] = max(best) + weight[n]
    return dist


def analyze(program: TaskProgram, coloring: Coloring, cache: CacheConfig) -> WcetReport:
    classes = classify(program, coloring, cache)
    plan = charge_plan(program, classes)
    graphs, top, _ = _structure(program)
    per_exec: dict[str, int] = {}
    fm_lines: dict[str, int] = {}
    for (block, _line), scope in plan.items():
        if scope is None:
            per_exec[block] = per_exec.get(block, 0) + 1
        else:
            fm_lines[scope] = fm_lines.get(scope, 0) + 1
    p = cache.miss_penalty
    costed = {b.id: CostedBlock(b.id, b.instr_count, p * per_exec.get(b.id, 0))
              for b in program.blocks}
    weight = {k: c.cycles for k, c in costed.items()}
    summaries: dict[str, LoopSummary] = {}
    for h in sorted(program.loop_bodies, key=lambda h: (len(program.loop_bodies[h]), h)):
        g = graphs[h]
        w = {n: summaries[n].cycles if n in summaries else weight[n] for n in g.nodes}
        dist = _longest(g, w)
        it = max((dist[n] for n in g.iteration_ends if n in dist), default=0)
        ex = max(dist[n] for n in g.exit_ends if n in dist)
        summaries[h] = LoopSummary(h, program.loop_map[h].bound, it, ex,
                                   p * fm_lines.get(h, 0))
    w = {n: summaries[n].cycles if n in summaries else weight[n] for n in top.nodes}
    dist = _longest(top, w)
    total = dist[_rep(program, program.exit, None)]
    return WcetReport(total, classes, costed, summaries, plan)


def wcet(program: TaskProgram, coloring: Coloring, cache: CacheConfig) -> int:
    return analyze(program, coloring, cache).wcet


def infinite_cache_wcet(program: TaskProgram, cache: CacheConfig) -> int:
    """WCET with every page in a private color: only cold misses remain."""
    return wcet(program, Coloring(tuple(range(program.page_count))), cache)


def wcet_table(program: TaskProgram, heuristic: str, cache: CacheConfig, n_tasks: int,
               seed: int = 0) -> WcetTable:
    """C(j) for j = 1..s_max, prefix-minimised so more colors never hurt."""
    if heuristic not in HEURISTICS:
        raise ValueError(f"unknown heuristic {heuristic!r}; expected one of {HEURISTICS}")
    entries = []
    best: WcetEntry | None = None
    for j in range(1, s_max(program.page_count, cache, n_tasks) + 1):
        col = coloring_for(heuristic, program, j, seed)
        value = wcet(program, col, cache)
        if best is None or value < best.wcet:
            best = WcetEntry(j, value, col)
        entries.append(WcetEntry(j, best.wcet, best.coloring))
    return WcetTable(program.task_id, tuple(entries), heuristic, program.page_count)


def tables_csv(tables: Sequence[WcetTable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["task", "heuristic", "colors", "wcet_cycles"])
    for t in tables:
        for e in t.entries:
            w.writerow([t.task_id, t.heuristic, e.colors, e.wcet])
    return buf.getvalue()


def colorings_csv(tables: Sequence[WcetTable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["task", "heuristic", "colors", "page", "color"])
    for t in tables:
        for e in t.entries:
            for page, color in enumerate(e.coloring.colors):
                w.writerow([t.task_id, t.heuristic, e.colors, page, color])
    return buf.getvalue()


def read_tables_csv(text: str, heuristic: str | None = None) -> list[WcetTable]:
    """Tables from ``tables_csv`` output; with several heuristics present one must be chosen."""
    reader = csv.reader(io.StringIO(text))
    if next(reader, None) != ["task", "heuristic", "colors", "wcet_cycles"]:
        raise ValueError("not a WCET table CSV (expected task,heuristic,colors,wcet_cycles)")
    rows: dict[tuple[str, str], dict[int, int]] = {}
    for k, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != 4:
            raise ValueError(f"line {k}: expected 4 fields")
        task, heur, j, w = rec
        if heuristic is not None and heur != heuristic:
            continue
        try:
            rows.setdefault((task, heur), {})[int(j)] = int(w)
        except ValueError:
            raise ValueError(f"line {k}: non-integer colors or WCET") from None
    heurs = {h for _, h in rows}
    if len(heurs) > 1:
        raise ValueError(f"tables for several heuristics {sorted(heurs)}; pick one")
    tables = []
    for (task, heur), by_j in rows.items():
        if sorted(by_j) != list(range(1, len(by_j) + 1)):
            raise ValueError(f"table of {task} does not cover j = 1..{len(by_j)}")
        tables.append(WcetTable.from_wcets(task, [by_j[j] for j in sorted(by_j)], heur))
    return tables
