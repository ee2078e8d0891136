"""Synthetic task programs.

``synthetic_program`` lays code out linearly: pages are filled front to back
with blocks of 1-4 cache lines (2-4 instructions per line), then control flow
is imposed on the block sequence according to a shape:

* ``straight``: one chain, no loops.
* ``loop``: prologue block, one loop over all remaining blocks but the last,
  epilogue block.
* ``nested``: like ``loop`` with a second loop over the middle third of the
  outer body.

Inside loop bodies a forward skip edge ``b[k] -> b[k+2]`` is added with
probability ``branchiness``, making ``b[k+1]`` conditional.

``random_program`` builds small structured CFGs (sequence, if/else, while,
do-while) for oracle cross-checks.
"""

from __future__ import annotations

import random

from .program import BasicBlock, Loop, TaskProgram, make_program

SHAPES = ("straight", "loop", "nested")


def _layout(rng: random.Random, pages: int, lines_per_page: int,
            max_block_lines: int = 4) -> list[BasicBlock]:
    blocks = []
    for page in range(pages):
        line = 0
        while line < lines_per_page:
            n = min(rng.randint(1, max_block_lines), lines_per_page - line)
            instr = rng.randint(2 * n, 4 * n)
            blocks.append(BasicBlock(f"b{len(blocks)}", page, line, line + n - 1, instr))
            line += n
    return blocks


def synthetic_program(pages: int, shape: str = "loop", seed: int = 0, *,
                      lines_per_page: int = 16, bounds: tuple[int, int] = (8, 16),
                      branchiness: float = 0.15, task_id: str | None = None) -> TaskProgram:
    if pages < 1:
        raise ValueError("pages must be >= 1")
    if shape not in SHAPES:
        raise ValueError(f"unknown shape {shape!r}; expected one of {SHAPES}")
    rng = random.Random(f"{shape}:{pages}:{seed}")
    blocks = _layout(rng, pages, lines_per_page)
    # a loop needs a prologue, a body and an epilogue; nesting needs room inside
    need = {"straight": 1, "loop": 3, "nested": 7}[shape]
    if len(blocks) < need:
        blocks = _layout(rng, pages, lines_per_page, max_block_lines=1)
        if len(blocks) < need:
            raise ValueError(f"{pages} page(s) of {lines_per_page} lines cannot hold "
                             f"a {shape!r} program")
    ids = [b.id for b in blocks]
    n = len(ids)
    edges = [(ids[k], ids[k + 1]) for k in range(n - 1)]
    loops: list[Loop] = []

    def add_skips(lo: int, hi: int, forbidden: set[int]):
        # skip edges b[k] -> b[k+2] with lo <= k and k + 2 <= hi, never jumping
        # over a block listed in ``forbidden``
        for k in range(lo, hi - 1):
            if k + 1 in forbidden or (ids[k], ids[k + 2]) in edges:
                continue
            if rng.random() < branchiness:
                edges.append((ids[k], ids[k + 2]))

    if shape == "loop":
        header, latch = 1, n - 2
        add_skips(header, latch, set())
        edges.append((ids[latch], ids[header]))
        loops.append(Loop(ids[header], rng.randint(*bounds), ((ids[latch], ids[header]),)))
    elif shape == "nested":
        header, latch = 1, n - 2
        inner_h = header + 1 + (latch - header - 1) // 3
        inner_l = max(inner_h, latch - 1 - (latch - header - 1) // 3)
        # keep both loops single-entry: no skip edge may jump into or over the
        # inner loop boundaries
        forbidden = {inner_h, inner_l, inner_l + 1}
        add_skips(header, inner_h - 1, forbidden)
        add_skips(inner_h, inner_l, forbidden)
        add_skips(inner_l + 1, latch, forbidden)
        edges.append((ids[inner_l], ids[inner_h]))
        edges.append((ids[latch], ids[header]))
        outer_b = rng.randint(max(2, bounds[0] // 2), max(2, bounds[1] // 2))
        inner_b = rng.randint(*bounds)
        loops.append(Loop(ids[header], outer_b, ((ids[latch], ids[header]),)))
        loops.append(Loop(ids[inner_h], inner_b, ((ids[inner_l], ids[inner_h]),)))
    return make_program(task_id or f"synthetic_{shape}_{pages}p", blocks, edges,
                        ids[0], ids[-1], loops, pages, lines_per_page)


def random_program(seed: int, *, max_blocks: int = 12, max_bound: int = 4,
                   max_pages: int = 4, lines_per_page: int = 4,
                   max_block_lines: int = 2) -> TaskProgram:
    """Random reducible CFG with at most ``max_blocks`` blocks."""
    rng = random.Random(seed)
    blocks: list[BasicBlock] = []
    edges: list[tuple[str, str]] = []
    loops: list[Loop] = []

    def block() -> str:
        first = rng.randrange(lines_per_page)
        last = min(lines_per_page - 1, first + rng.randrange(max_block_lines))
        b = BasicBlock(f"n{len(blocks)}", rng.randrange(max_pages), first, last,
                       rng.randint(1, 4))
        blocks.append(b)
        return b.id

    def region(budget: int) -> tuple[str, str]:
        kinds = ["block"]
        if budget >= 2:
            kinds += ["seq", "while", "dowhile"]
        if budget >= 3:
            kinds += ["ite"]
        kind = rng.choice(kinds)
        if kind == "block":
            b = block()
            return b, b
        if kind == "seq":
            start = len(blocks)
            e1, x1 = region(rng.randint(1, budget - 1))
            e2, x2 = region(budget - (len(blocks) - start))
            edges.append((x1, e2))
            return e1, x2
        if kind == "ite":
            c = block()
            start = len(blocks)
            e1, x1 = region(rng.randint(1, budget - 2))
            edges.append((c, e1))
            left = budget - 2 - (len(blocks) - start)
            join = None
            if left >= 1 and rng.random() < 0.6:
                e2, x2 = region(rng.randint(1, left))
                edges.append((c, e2))
                join = block()
                edges.append((x2, join))
            else:
                join = block()
                edges.append((c, join))
            edges.append((x1, join))
            return c, join
        h = block()
        body_e, body_x = region(rng.randint(1, budget - 1))
        edges.append((h, body_e))
        if kind == "while":
            edges.append((body_x, h))
            loops.append(Loop(h, rng.randint(1, max_bound), ((body_x, h),)))
            return h, h
        edges.append((body_x, h))
        loops.append(Loop(h, rng.randint(1, max_bound), ((body_x, h),)))
        return h, body_x

    entry, last = region(max(1, max_blocks - 1))
    final = block()
    edges.append((last, final))
    return make_program(f"rand{seed}", blocks, edges, entry, final, loops,
                        lines_per_page=lines_per_page)
