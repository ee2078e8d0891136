"""Shared domain types: cache geometry, tasks, colorings and WCET tables."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence


class ConfigError(ValueError):
    """Raised for inconsistent cache or task-set configuration."""


@dataclass(frozen=True)
class CacheConfig:
    """Set-associative instruction cache seen at page granularity.

    ``cache_pages`` is the number of distinct pages that fit into the cache,
    so each color (cache page) holds ``ways`` pages at once.
    """

    ways: int = 2
    cache_pages: int = 32
    lines_per_page: int = 16
    miss_penalty: int = 10

    def __post_init__(self):
        for name in ("ways", "cache_pages", "lines_per_page"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.miss_penalty < 0:
            raise ConfigError("miss_penalty must be non-negative")
        if self.cache_pages % self.ways:
            raise ConfigError(
                f"cache_pages={self.cache_pages} is not divisible by ways={self.ways}")

    @property
    def num_colors(self) -> int:
        return self.cache_pages // self.ways

    def to_json(self) -> str:
        return json.dumps({"v": 1, "ways": self.ways, "cache_pages": self.cache_pages,
                           "lines_per_page": self.lines_per_page,
                           "miss_penalty": self.miss_penalty})

    @classmethod
    def from_dict(cls, doc: dict) -> "CacheConfig":
        if not isinstance(doc, dict):
            raise ConfigError("cache config must be a JSON object")
        if doc.get("v", 1) != 1:
            raise ConfigError(f"unsupported cache config version {doc.get('v')!r}")
        try:
            return cls(ways=int(doc["ways"]), cache_pages=int(doc["cache_pages"]),
                       lines_per_page=int(doc.get("lines_per_page", 16)),
                       miss_penalty=int(doc.get("miss_penalty", 10)))
        except KeyError as exc:
            raise ConfigError(f"cache config is missing field {exc.args[0]!r}") from None

    @classmethod
    def from_json(cls, text: str) -> "CacheConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cache config is not valid JSON: {exc}") from None
        return cls.from_dict(doc)


def num_colors(cache: CacheConfig) -> int:
    return cache.num_colors


def page_color(page_index: int, cache: CacheConfig) -> int:
    """Color of a physical page: its index modulo the number of colors."""
    return page_index % cache.num_colors


def s_max(pages: int, cache: CacheConfig, n_tasks: int) -> int:
    """Largest useful color budget for a task with ``pages`` pages.

    Every other task keeps at least one cache page, hence the
    ``cache_pages - (n_tasks - 1)`` cap.
    """
    if pages < 1 or n_tasks < 1:
        raise ConfigError("pages and n_tasks must be positive")
    room = cache.cache_pages - (n_tasks - 1)
    if room < 1:
        raise ConfigError(
            f"{n_tasks} tasks do not fit in a cache of {cache.cache_pages} pages")
    return max(1, min(pages, room))


@dataclass(frozen=True)
class SporadicTask:
    """A constrained-deadline sporadic task (C, D, T, P).

    ``wcet <= deadline`` is deliberately not enforced: demand-bound tests must
    be able to report such a task as infeasible.
    """

    id: str
    wcet: int
    deadline: int
    period: int
    pages: int = 1

    def __post_init__(self):
        if self.wcet < 1 or self.deadline < 1 or self.period < 1 or self.pages < 1:
            raise ConfigError(f"task {self.id}: parameters must be positive")
        if self.deadline > self.period:
            raise ConfigError(f"task {self.id}: deadline {self.deadline} exceeds "
                              f"period {self.period}")


@dataclass(frozen=True)
class TaskSkeleton:
    """Timing skeleton of a task whose WCET is still to be chosen."""

    id: str
    deadline: int
    period: int

    def __post_init__(self):
        if self.deadline < 1 or self.period < 1:
            raise ConfigError(f"task {self.id}: deadline and period must be positive")
        if self.deadline > self.period:
            raise ConfigError(f"task {self.id}: deadline {self.deadline} exceeds "
                              f"period {self.period}")

    def with_wcet(self, wcet: int, pages: int = 1) -> SporadicTask:
        return SporadicTask(self.id, wcet, self.deadline, self.period, pages)


@dataclass(frozen=True)
class Coloring:
    """Total map page index -> color index, stored densely."""

    colors: tuple[int, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.colors):
            raise ValueError("color indices must be non-negative")

    def __len__(self) -> int:
        return len(self.colors)

    def __getitem__(self, page: int) -> int:
        return self.colors[page]

    @property
    def used(self) -> int:
        return len(set(self.colors))

    @classmethod
    def of(cls, colors: Iterable[int]) -> "Coloring":
        return cls(tuple(int(c) for c in colors))


@dataclass(frozen=True)
class WcetEntry:
    colors: int
    wcet: int
    coloring: Coloring


@dataclass(frozen=True)
class WcetTable:
    """C_i(j) for j = 1..s_max, monotone non-increasing in j."""

    task_id: str
    entries: tuple[WcetEntry, ...]
    heuristic: str = ""
    pages: int = 1

    def __post_init__(self):
        if not self.entries:
            raise ValueError(f"WCET table of {self.task_id} is empty")
        for k, e in enumerate(self.entries, start=1):
            if e.colors != k:
                raise ValueError(f"WCET table of {self.task_id}: entry {k} has j={e.colors}")
            if e.wcet < 1:
                raise ValueError(f"WCET table of {self.task_id}: non-positive WCET")
        for a, b in zip(self.entries, self.entries[1:]):
            if b.wcet > a.wcet:
                raise ValueError(f"WCET table of {self.task_id} is not monotone at "
                                 f"j={b.colors}")

    @property
    def s_max(self) -> int:
        return len(self.entries)

    def wcet(self, j: int) -> int:
        if not 1 <= j <= len(self.entries):
            raise IndexError(f"{self.task_id}: no entry for j={j}")
        return self.entries[j - 1].wcet

    @property
    def wcets(self) -> tuple[int, ...]:
        return tuple(e.wcet for e in self.entries)

    @classmethod
    def from_wcets(cls, task_id: str, wcets: Sequence[int], heuristic: str = "",
                   pages: int | None = None) -> "WcetTable":
        """Build a table from bare values (colorings default to page i -> color 0)."""
        n = pages if pages is not None else len(wcets)
        entries = tuple(WcetEntry(j, int(w), Coloring((0,) * n))
                        for j, w in enumerate(wcets, start=1))
        return cls(task_id, entries, heuristic, n)

