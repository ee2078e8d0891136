"""LRU instruction-cache classification over a colored task program.

A memory block is one cache line of one virtual page, ``(page, line)``. It maps
to the cache set ``(color(page), line)``; each set has ``ways`` entries.

Two analyses run per (program, coloring):

* must analysis (ages are upper bounds, join = intersection with max age),
  iterated to a fixed point from an empty cache; an access whose block is in
  the incoming must state is an always-hit (AH);
* scoped persistence: inside a loop, a block is persistent when at most
  ``ways`` distinct blocks of its set are touched anywhere in the loop (inner
  loops included). Such a block cannot be evicted while the loop runs once
  loaded, so it misses at most once per loop entry (FM). The scope reported
  is the outermost persistent loop.

Everything else is not classified (NC).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping

from .model import CacheConfig, Coloring
from .program import LINE_OUT_OF_RANGE, ProgramError, TaskProgram, reverse_postorder

Access = tuple[str, int]          # (block id, line)
MemBlock = tuple[int, int]        # (page, line)


@dataclass(frozen=True, order=True)
class CacheSetRef:
    color: int
    line: int


def set_of(page: int, line: int, coloring: Coloring, cache: CacheConfig) -> CacheSetRef:
    if not 0 <= line < cache.lines_per_page:
        raise ValueError(f"line {line} outside page of {cache.lines_per_page} lines")
    return CacheSetRef(coloring[page], line)


@dataclass(frozen=True)
class AccessClass:
    kind: str                     # "AH", "FM" or "NC"
    scope: str | None = None      # loop header, FM only

    def __str__(self):
        return f"FM({self.scope})" if self.kind == "FM" else self.kind


ALWAYS_HIT = AccessClass("AH")
NOT_CLASSIFIED = AccessClass("NC")


def first_miss(scope: str) -> AccessClass:
    return AccessClass("FM", scope)


# Must state: set -> {memory block: age upper bound}. Treated as immutable.
MustState = Mapping[CacheSetRef, Mapping[MemBlock, int]]


def must_update(state: MustState, cset: CacheSetRef, mem: MemBlock, ways: int) -> MustState:
    old = state.get(cset, {})
    age = old.get(mem, ways)
    line = {mem: 0}
    for m, a in old.items():
        if m == mem:
            continue
        if a < age:
            a += 1
        if a < ways:
            line[m] = a
    new = dict(state)
    new[cset] = line
    return new


def must_join(a: MustState, b: MustState) -> MustState:
    out = {}
    for cset in a.keys() & b.keys():
        la, lb = a[cset], b[cset]
        line = {m: max(la[m], lb[m]) for m in la.keys() & lb.keys()}
        if line:
            out[cset] = line
    return out


def _check_inputs(program: TaskProgram, coloring: Coloring, cache: CacheConfig) -> None:
    if len(coloring) < program.page_count:
        raise ValueError(f"coloring covers {len(coloring)} pages, program "
                         f"{program.task_id} has {program.page_count}")
    for b in program.blocks:
        if b.last_line >= cache.lines_per_page:
            raise ProgramError(LINE_OUT_OF_RANGE, f"block {b.id} line {b.last_line} >= "
                               f"lines_per_page {cache.lines_per_page}")


def must_fixpoint(program: TaskProgram, coloring: Coloring,
                  cache: CacheConfig) -> dict[str, MustState]:
    """Incoming must state of every block."""
    order = reverse_postorder(program.entry, program.succs)
    rank = {n: k for k, n in enumerate(order)}
    blocks = program.block_map
    outs: dict[str, MustState] = {}
    ins: dict[str, MustState] = {}
    work = set(order)
    while work:
        n = min(work, key=rank.__getitem__)
        work.discard(n)
        if n == program.entry:
            state: MustState = {}
        else:
            known = [outs[p] for p in program.preds[n] if p in outs]
            state = known[0]
            for s in known[1:]:
                state = must_join(state, s)
        ins[n] = state
        b = blocks[n]
        for line in b.lines:
            mem = (b.page, line)
            state = must_update(state, set_of(b.page, line, coloring, cache), mem, cache.ways)
        if outs.get(n) != state:
            outs[n] = state
            work.update(program.succs[n])
    return ins


def scope_conflicts(program: TaskProgram, coloring: Coloring,
                    cache: CacheConfig) -> dict[str, dict[CacheSetRef, frozenset[MemBlock]]]:
    """Per loop header, the distinct memory blocks touched in each cache set."""
    out = {}
    blocks = program.block_map
    for header, body in program.loop_bodies.items():
        sets: dict[CacheSetRef, set[MemBlock]] = {}
        for n in body:
            b = blocks[n]
            for line in b.lines:
                sets.setdefault(set_of(b.page, line, coloring, cache), set()).add((b.page, line))
        out[header] = {k: frozenset(v) for k, v in sets.items()}
    return out


def classify(program: TaskProgram, coloring: Coloring,
             cache: CacheConfig) -> dict[Access, AccessClass]:
    _check_inputs(program, coloring, cache)
    ins = must_fixpoint(program, coloring, cache)
    conflicts = scope_conflicts(program, coloring, cache)
    result: dict[Access, AccessClass] = {}
    for b in program.blocks:
        state = ins[b.id]
        chain = program.loop_chain[b.id]
        for line in b.lines:
            mem = (b.page, line)
            cset = set_of(b.page, line, coloring, cache)
            if mem in state.get(cset, {}):
                cls = ALWAYS_HIT
            else:
                cls = NOT_CLASSIFIED
                for header in chain:
                    evicted = len(conflicts[header][cset]) > cache.ways
                    if not evicted:
                        cls = first_miss(header)
                        break
            result[(b.id, line)] = cls
            state = must_update(state, cset, mem, cache.ways)
    return result


def classes_csv(classes: Mapping[Access, AccessClass]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["block", "line", "class", "scope"])
    for (block, line), cls in classes.items():
        w.writerow([block, line, cls.kind, cls.scope or ""])
    return buf.getvalue()
