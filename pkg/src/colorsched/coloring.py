"""Page-coloring heuristics for a task granted ``j`` colors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Coloring
from .program import TaskProgram

HEURISTICS = ("fair", "federated", "random")


@dataclass(frozen=True)
class PageScore:
    page: int
    score: int


def _check_budget(pages: int, budget: int) -> None:
    if not 1 <= budget <= pages:
        raise ValueError(f"color budget {budget} outside [1, {pages}]")


def fair_coloring(pages: int, budget: int) -> Coloring:
    """Consecutive groups of floor(P/j) pages share a color; groups wrap modulo j."""
    _check_budget(pages, budget)
    group = pages // budget
    return Coloring(tuple((p // group) % budget for p in range(pages)))


def page_scores(program: TaskProgram) -> list[PageScore]:
    """Static access weight of each page: instructions weighted by 10**loop depth."""
    scores = [0] * program.page_count
    for b in program.blocks:
        scores[b.page] += b.instr_count * 10 ** program.nesting_level(b.id)
    return [PageScore(p, s) for p, s in enumerate(scores)]


def federated_coloring(scores: Sequence[PageScore] | Sequence[int], budget: int) -> Coloring:
    """The j-1 highest-scored pages get private colors, the rest share color j-1.

    Ties go to the lower page index.
    """
    scores = [s if isinstance(s, PageScore) else PageScore(k, int(s))
              for k, s in enumerate(scores)]
    _check_budget(len(scores), budget)
    ranked = sorted(scores, key=lambda s: (-s.score, s.page))
    colors = [budget - 1] * len(scores)
    for color, s in enumerate(ranked[:budget - 1]):
        colors[s.page] = color
    return Coloring(tuple(colors))


def random_coloring(pages: int, budget: int, seed) -> Coloring:
    """Each page uniform over the j colors; some colors may end up unused."""
    _check_budget(pages, budget)
    rng = np.random.default_rng(seed)
    return Coloring(tuple(int(c) for c in rng.integers(0, budget, size=pages)))


def coloring_for(heuristic: str, program: TaskProgram, budget: int, seed: int = 0) -> Coloring:
    if heuristic == "fair":
        return fair_coloring(program.page_count, budget)
    if heuristic == "federated":
        return federated_coloring(page_scores(program), budget)
    if heuristic == "random":
        return random_coloring(program.page_count, budget, [seed, budget])
    raise ValueError(f"unknown heuristic {heuristic!r}; expected one of {HEURISTICS}")
