"""Task programs: single-procedure CFGs whose blocks live on virtual pages."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable


class ProgramError(ValueError):
    """Invalid program document; ``code`` is a stable diagnostic identifier."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


MALFORMED = "MALFORMED"
UNKNOWN_BLOCK = "UNKNOWN_BLOCK"
PAGE_OUT_OF_RANGE = "PAGE_OUT_OF_RANGE"
LINE_OUT_OF_RANGE = "LINE_OUT_OF_RANGE"
PAGE_COUNT_MISMATCH = "PAGE_COUNT_MISMATCH"
UNREACHABLE_BLOCK = "UNREACHABLE_BLOCK"
EXIT_UNREACHABLE = "EXIT_UNREACHABLE"
BAD_EXIT = "BAD_EXIT"
BAD_LOOP = "BAD_LOOP"
IRREDUCIBLE = "IRREDUCIBLE"
UNBOUNDED_CYCLE = "UNBOUNDED_CYCLE"

Edge = tuple[str, str]


@dataclass(frozen=True)
class BasicBlock:
    id: str
    page: int
    first_line: int
    last_line: int
    instr_count: int

    @property
    def lines(self) -> range:
        return range(self.first_line, self.last_line + 1)


@dataclass(frozen=True)
class Loop:
    header: str
    bound: int
    back_edges: tuple[Edge, ...]


@dataclass(frozen=True)
class TaskProgram:
    """A validated CFG. Construct through :func:`make_program` or :func:`load_program`."""

    task_id: str
    blocks: tuple[BasicBlock, ...]
    edges: tuple[Edge, ...]
    entry: str
    exit: str
    loops: tuple[Loop, ...]
    page_count: int

    # Derived structure. cached_property writes straight into __dict__, which
    # frozen dataclasses allow.

    @cached_property
    def block_map(self) -> dict[str, BasicBlock]:
        return {b.id: b for b in self.blocks}

    @cached_property
    def succs(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {b.id: [] for b in self.blocks}
        for u, v in self.edges:
            out[u].append(v)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def preds(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {b.id: [] for b in self.blocks}
        for u, v in self.edges:
            out[v].append(u)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def loop_map(self) -> dict[str, Loop]:
        return {lp.header: lp for lp in self.loops}

    @cached_property
    def back_edge_set(self) -> frozenset[Edge]:
        return frozenset(e for lp in self.loops for e in lp.back_edges)

    @cached_property
    def loop_bodies(self) -> dict[str, frozenset[str]]:
        """Natural-loop body of every declared header (header included)."""
        bodies = {}
        for lp in self.loops:
            body = {lp.header}
            stack = [u for u, _ in lp.back_edges if u != lp.header]
            body.update(stack)
            while stack:
                n = stack.pop()
                for p in self.preds[n]:
                    if p not in body:
                        body.add(p)
                        stack.append(p)
            bodies[lp.header] = frozenset(body)
        return bodies

    @cached_property
    def loop_parent(self) -> dict[str, str | None]:
        """Immediately enclosing loop header of every loop (None at top level)."""
        parent: dict[str, str | None] = {}
        for h, body in self.loop_bodies.items():
            enclosing = [g for g, gb in self.loop_bodies.items() if g != h and body < gb]
            parent[h] = min(enclosing, key=lambda g: len(self.loop_bodies[g]), default=None)
        return parent

    @cached_property
    def loop_chain(self) -> dict[str, tuple[str, ...]]:
        """For each block, the headers of the loops containing it, outermost first."""
        chains = {}
        for b in self.blocks:
            inside = [h for h, body in self.loop_bodies.items() if b.id in body]
            inside.sort(key=lambda h: -len(self.loop_bodies[h]))
            chains[b.id] = tuple(inside)
        return chains

    def nesting_level(self, block: str) -> int:
        if block not in self.block_map:
            raise ProgramError(UNKNOWN_BLOCK, f"unknown block {block!r}")
        return len(self.loop_chain[block])

    def innermost_loop(self, block: str) -> str | None:
        chain = self.loop_chain[block]
        return chain[-1] if chain else None


def nesting_level(program: TaskProgram, block: str) -> int:
    return program.nesting_level(block)


def make_program(task_id: str, blocks: Iterable[BasicBlock], edges: Iterable[Edge],
                 entry: str, exit: str, loops: Iterable[Loop] = (),
                 page_count: int | None = None,
                 lines_per_page: int | None = None) -> TaskProgram:
    blocks = tuple(blocks)
    if page_count is None:
        page_count = 1 + max((b.page for b in blocks), default=-1)
    prog = TaskProgram(task_id, blocks, tuple((u, v) for u, v in edges), entry, exit,
                       tuple(loops), page_count)
    validate(prog, lines_per_page)
    return prog


def validate(prog: TaskProgram, lines_per_page: int | None = None) -> None:
    if not prog.blocks:
        raise ProgramError(MALFORMED, "program has no blocks")
    ids = [b.id for b in prog.blocks]
    if len(set(ids)) != len(ids):
        raise ProgramError(MALFORMED, "duplicate block ids")
    known = set(ids)
    for b in prog.blocks:
        if b.instr_count < 1:
            raise ProgramError(MALFORMED, f"block {b.id} has no instructions")
        if b.page < 0 or b.page >= prog.page_count:
            raise ProgramError(PAGE_OUT_OF_RANGE,
                               f"block {b.id} on page {b.page}, page_count={prog.page_count}")
        if b.first_line < 0 or b.last_line < b.first_line:
            raise ProgramError(LINE_OUT_OF_RANGE, f"block {b.id} has line range "
                               f"[{b.first_line},{b.last_line}]")
        if lines_per_page is not None and b.last_line >= lines_per_page:
            raise ProgramError(LINE_OUT_OF_RANGE, f"block {b.id} line {b.last_line} "
                               f">= lines_per_page {lines_per_page}")
    used = 1 + max(b.page for b in prog.blocks)
    if used != prog.page_count:
        raise ProgramError(PAGE_COUNT_MISMATCH,
                           f"page_count={prog.page_count} but highest page is {used - 1}")
    for u, v in prog.edges:
        if u not in known or v not in known:
            raise ProgramError(UNKNOWN_BLOCK, f"edge ({u},{v}) names an unknown block")
    if len(set(prog.edges)) != len(prog.edges):
        raise ProgramError(MALFORMED, "duplicate edges")
    for name in (prog.entry, prog.exit):
        if name not in known:
            raise ProgramError(UNKNOWN_BLOCK, f"unknown entry/exit block {name!r}")
    if prog.succs[prog.exit]:
        raise ProgramError(BAD_EXIT, f"exit block {prog.exit} has successors")

    seen = _reach(prog.entry, prog.succs)
    missing = known - seen
    if missing:
        raise ProgramError(UNREACHABLE_BLOCK, f"blocks not reachable from entry: "
                           f"{sorted(missing)}")
    stuck = known - _reach(prog.exit, prog.preds)
    if stuck:
        raise ProgramError(EXIT_UNREACHABLE, f"exit not reachable from {sorted(stuck)}")

    edge_set = set(prog.edges)
    headers = set()
    for lp in prog.loops:
        if lp.header not in known:
            raise ProgramError(UNKNOWN_BLOCK, f"loop header {lp.header!r} is unknown")
        if lp.header in headers:
            raise ProgramError(BAD_LOOP, f"two loops declared on header {lp.header}")
        headers.add(lp.header)
        if lp.bound < 1:
            raise ProgramError(BAD_LOOP, f"loop {lp.header} has bound {lp.bound}")
        if not lp.back_edges:
            raise ProgramError(BAD_LOOP, f"loop {lp.header} declares no back edge")
        for e in lp.back_edges:
            if e not in edge_set:
                raise ProgramError(BAD_LOOP, f"back edge {e} of loop {lp.header} is not "
                                   "a CFG edge")
            if e[1] != lp.header:
                raise ProgramError(BAD_LOOP, f"back edge {e} does not target {lp.header}")

    dom = _dominators(prog)
    for lp in prog.loops:
        for u, h in lp.back_edges:
            if h not in dom[u]:
                raise ProgramError(IRREDUCIBLE, f"header {h} does not dominate {u}; "
                                   f"({u},{h}) enters the loop from the side")
    declared = prog.back_edge_set
    for u, v in prog.edges:
        if v in dom[u] and (u, v) not in declared:
            raise ProgramError(UNBOUNDED_CYCLE, f"cycle through ({u},{v}) has no declared "
                               "loop bound")
    if _has_cycle(known, [e for e in prog.edges if e not in declared]):
        raise ProgramError(IRREDUCIBLE, "cycle without a dominating header")


def _reach(start: str, adj: dict[str, tuple[str, ...]]) -> set[str]:
    seen = {start}
    queue = deque([start])
    while queue:
        n = queue.popleft()
        for m in adj[n]:
            if m not in seen:
                seen.add(m)
                queue.append(m)
    return seen


def _dominators(prog: TaskProgram) -> dict[str, frozenset[str]]:
    order = reverse_postorder(prog.entry, prog.succs)
    everything = frozenset(order)
    dom = {n: everything for n in order}
    dom[prog.entry] = frozenset([prog.entry])
    changed = True
    while changed:
        changed = False
        for n in order:
            if n == prog.entry:
                continue
            new = frozenset.intersection(*(dom[p] for p in prog.preds[n])) | {n}
            if new != dom[n]:
                dom[n] = new
                changed = True
    return dom


def reverse_postorder(start: str, succs: dict[str, tuple[str, ...]]) -> list[str]:
    post, seen = [], {start}
    stack = [(start, iter(succs[start]))]
    while stack:
        node, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            stack.pop()
            post.append(node)
        elif nxt not in seen:
            seen.add(nxt)
            stack.append((nxt, iter(succs[nxt])))
    return post[::-1]


def _has_cycle(nodes: set[str], edges: list[Edge]) -> bool:
    indeg = {n: 0 for n in nodes}
    adj: dict[str, list[str]] = {n: [] for n in nodes}
    for u, v in edges:
        adj[u].append(v)
        indeg[v] += 1
    queue = deque(n for n, d in indeg.items() if d == 0)
    done = 0
    while queue:
        n = queue.popleft()
        done += 1
        for m in adj[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                queue.append(m)
    return done != len(nodes)


# -- JSON document format -------------------------------------------------

def program_to_dict(prog: TaskProgram) -> dict:
    return {
        "v": 1,
        "task_id": prog.task_id,
        "page_count": prog.page_count,
        "blocks": [{"id": b.id, "page": b.page, "lines": [b.first_line, b.last_line],
                    "instr": b.instr_count} for b in prog.blocks],
        "edges": [[u, v] for u, v in prog.edges],
        "entry": prog.entry,
        "exit": prog.exit,
        "loops": [{"header": lp.header, "bound": lp.bound,
                   "back_edges": [[u, v] for u, v in lp.back_edges]} for lp in prog.loops],
    }


def dump_program(prog: TaskProgram) -> str:
    return json.dumps(program_to_dict(prog), indent=1)


def program_from_dict(doc: dict, lines_per_page: int | None = None) -> TaskProgram:
    if not isinstance(doc, dict):
        raise ProgramError(MALFORMED, "program document must be a JSON object")
    if doc.get("v", 1) != 1:
        raise ProgramError(MALFORMED, f"unsupported schema version {doc.get('v')!r}")
    try:
        blocks = [BasicBlock(str(b["id"]), int(b["page"]), int(b["lines"][0]),
                             int(b["lines"][1]), int(b["instr"])) for b in doc["blocks"]]
        edges = [(str(u), str(v)) for u, v in doc.get("edges", [])]
        loops = [Loop(str(lp["header"]), int(lp["bound"]),
                      tuple((str(u), str(v)) for u, v in lp.get("back_edges", [])))
                 for lp in doc.get("loops", [])]
        task_id = str(doc["task_id"])
        entry, exit_ = str(doc["entry"]), str(doc["exit"])
        page_count = int(doc["page_count"])
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ProgramError(MALFORMED, f"bad program document: {exc!r}") from None
    return make_program(task_id, blocks, edges, entry, exit_, loops, page_count,
                        lines_per_page)


def load_program(text: str, lines_per_page: int | None = None) -> TaskProgram:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProgramError(MALFORMED, f"not valid JSON: {exc}") from None
    return program_from_dict(doc, lines_per_page)
