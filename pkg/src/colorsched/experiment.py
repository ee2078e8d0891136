"""Utilization sweep: schedulability and color usage of each allocation method."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .allocator import build_problem, random_allocation, solve
from .edf import edf_feasible
from .model import CacheConfig, ConfigError, SporadicTask, TaskSkeleton
from .program import TaskProgram, program_from_dict, program_to_dict
from .synthetic import synthetic_program
from .wcet import infinite_cache_wcet, wcet_table

log = logging.getLogger(__name__)

METHODS = ("ilp_fair", "ilp_federated", "ilp_random", "random_alloc", "infinite_cache")
DEADLINE_MODES = ("implicit", "constrained")

# Stand-ins for the benchmark tasks: (name, pages, shape).
DEFAULT_TASKS = (
    ("compress", 4, "nested"),
    ("fir", 2, "loop"),
    ("ndes", 4, "nested"),
    ("jfdctint", 3, "loop"),
    ("edn", 4, "nested"),
    ("crc", 2, "loop"),
    ("g723_enc", 8, "nested"),
    ("petrinet", 8, "loop"),
)


def default_programs() -> list[TaskProgram]:
    return [synthetic_program(pages, shape, seed=k, task_id=name)
            for k, (name, pages, shape) in enumerate(DEFAULT_TASKS)]


@dataclass
class SweepConfig:
    programs: list[TaskProgram] = field(default_factory=default_programs)
    cache: CacheConfig = field(default_factory=CacheConfig)
    u_min: float = 0.30
    u_max: float = 1.70
    u_step: float = 0.01
    samples: int = 1000
    deadline_mode: str = "implicit"
    master_seed: int = 0

    def __post_init__(self):
        if not self.programs:
            raise ConfigError("sweep needs at least one program")
        if self.u_step <= 0 or self.u_min <= 0 or self.u_min > self.u_max:
            raise ConfigError("utilization grid needs 0 < min <= max and step > 0")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.deadline_mode not in DEADLINE_MODES:
            raise ConfigError(f"deadline_mode must be one of {DEADLINE_MODES}")
        if len(self.programs) > self.cache.num_colors:
            raise ConfigError(f"{len(self.programs)} tasks exceed {self.cache.num_colors} colors")
        ids = [p.task_id for p in self.programs]
        if len(set(ids)) != len(ids):
            raise ConfigError("program task ids must be distinct")

    @property
    def grid(self) -> list[float]:
        count = int(math.floor((self.u_max - self.u_min) / self.u_step + 1e-9)) + 1
        return [round(self.u_min + k * self.u_step, 10) for k in range(count)]

    def to_dict(self) -> dict:
        return {"programs": [program_to_dict(p) for p in self.programs],
                "cache": json.loads(self.cache.to_json()),
                "u_grid": {"min": self.u_min, "max": self.u_max, "step": self.u_step},
                "samples_per_point": self.samples, "deadline_mode": self.deadline_mode,
                "master_seed": self.master_seed}

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepConfig":
        """Every field is optional. Programs are program documents or
        ``{"pages": P, "shape": S, "seed": s}`` synthetic descriptors."""
        if not isinstance(doc, dict):
            raise ConfigError("sweep config must be a JSON object")
        kw = {}
        if "programs" in doc:
            kw["programs"] = [_program_entry(e, k) for k, e in enumerate(doc["programs"])]
        if "cache" in doc:
            kw["cache"] = CacheConfig.from_dict(doc["cache"])
        grid = doc.get("u_grid", {})
        for key, name in (("min", "u_min"), ("max", "u_max"), ("step", "u_step")):
            if key in grid:
                kw[name] = float(grid[key])
        if "samples_per_point" in doc:
            kw["samples"] = int(doc["samples_per_point"])
        for key in ("deadline_mode", "master_seed"):
            if key in doc:
                kw[key] = doc[key]
        if "master_seed" in kw:
            kw["master_seed"] = int(kw["master_seed"])
        return cls(**kw)


def _program_entry(entry, index: int) -> TaskProgram:
    if isinstance(entry, dict) and "blocks" in entry:
        return program_from_dict(entry)
    if isinstance(entry, dict) and "pages" in entry:
        return synthetic_program(int(entry["pages"]), entry.get("shape", "loop"),
                                 int(entry.get("seed", index)),
                                 task_id=entry.get("id", f"t{index}"))
    raise ConfigError(f"program entry {index} is neither a program nor a synthetic descriptor")


@dataclass(frozen=True)
class SweepRow:
    utilization: float
    method: str
    schedulable_pct: float
    avg_colors_used: float | None


def uunifast(n: int, total_u: float, rng: np.random.Generator) -> list[float]:
    """Uniform draw from the simplex of n positive shares summing to total_u."""
    if n < 1 or total_u <= 0:
        raise ValueError("uunifast needs n >= 1 and total_u > 0")
    shares, rest = [], total_u
    for i in range(1, n):
        r = 0.0
        while r == 0.0:
            r = rng.random()
        nxt = rest * r ** (1.0 / (n - i))
        shares.append(rest - nxt)
        rest = nxt
    shares.append(rest)
    return shares


@dataclass(frozen=True)
class SynthesizedSet:
    tasks: tuple[TaskSkeleton, ...]
    overloaded: tuple[str, ...]     # tasks whose share exceeded 1 (period clamped to C)


def synthesize_taskset(worst_wcets: Sequence[int], ids: Sequence[str],
                       utilizations: Sequence[float], deadline_mode: str,
                       rng: np.random.Generator) -> SynthesizedSet:
    """Periods T = ceil(C(1) / U) (at least C(1)); constrained deadlines drawn
    uniformly from [C + ceil(0.75 (T - C)), T]."""
    if not len(worst_wcets) == len(ids) == len(utilizations):
        raise ValueError("worst WCETs, ids and utilizations must align")
    if deadline_mode not in DEADLINE_MODES:
        raise ValueError(f"deadline_mode must be one of {DEADLINE_MODES}")
    tasks, over = [], []
    for c, tid, u in zip(worst_wcets, ids, utilizations):
        period = math.ceil(c / u)
        if period < c:
            over.append(tid)
            period = c
        if deadline_mode == "implicit":
            deadline = period
        else:
            lo = c + math.ceil(0.75 * (period - c))
            deadline = int(rng.integers(lo, period + 1))
        tasks.append(TaskSkeleton(tid, deadline, period))
    return SynthesizedSet(tuple(tasks), tuple(over))


@dataclass(frozen=True)
class _Prepared:
    ids: tuple[str, ...]
    tables: dict            # heuristic -> tuple of WcetTable
    infinite: tuple[int, ...]
    cache: CacheConfig
    grid: tuple[float, ...]
    samples: int
    deadline_mode: str
    master_seed: int


def prepare(config: SweepConfig) -> _Prepared:
    n = len(config.programs)
    tables = {}
    for h in ("fair", "federated", "random"):
        tables[h] = tuple(wcet_table(p, h, config.cache, n, seed=k)
                          for k, p in enumerate(config.programs))
    infinite = tuple(infinite_cache_wcet(p, config.cache) for p in config.programs)
    return _Prepared(tuple(p.task_id for p in config.programs), tables, infinite,
                     config.cache, tuple(config.grid), config.samples,
                     config.deadline_mode, config.master_seed)


_STATE: _Prepared | None = None


def _init_worker(state: _Prepared) -> None:
    global _STATE
    _STATE = state


def _method_outcomes(state: _Prepared, u_index: int, sample: int) -> dict[str, int | None]:
    """Per method: colors used when schedulable (0 for the color-free method), else None."""
    seq = np.random.SeedSequence([state.master_seed, u_index, sample])
    draw_seq, alloc_seq = seq.spawn(2)
    rng = np.random.default_rng(draw_seq)
    u = state.grid[u_index]
    worst = [t.wcet(1) for t in state.tables["fair"]]
    shares = uunifast(len(worst), u, rng)
    synth = synthesize_taskset(worst, state.ids, shares, state.deadline_mode, rng)
    if synth.overloaded:
        log.debug("u=%s sample %d: share above 1 for %s", u, sample, synth.overloaded)
    out: dict[str, int | None] = {}
    problems = {}
    for h in ("fair", "federated", "random"):
        name = f"ilp_{h}"
        try:
            problems[h] = build_problem(state.tables[h], synth.tasks, state.cache)
            alloc = solve(problems[h])
            out[name] = alloc.total_colors if alloc.feasible else None
        except Exception as exc:  # recorded, never aborts the sweep
            log.warning("u=%s sample %d %s: %s", u, sample, name, exc)
            out[name] = None
    try:
        alloc = random_allocation(problems["random"], alloc_seq)
        out["random_alloc"] = alloc.total_colors if alloc.feasible else None
    except Exception as exc:
        log.warning("u=%s sample %d random_alloc: %s", u, sample, exc)
        out["random_alloc"] = None
    try:
        tasks = [SporadicTask(s.id, c, s.deadline, s.period)
                 for s, c in zip(synth.tasks, state.infinite)]
        out["infinite_cache"] = 0 if edf_feasible(tasks).feasible else None
    except Exception as exc:
        log.warning("u=%s sample %d infinite_cache: %s", u, sample, exc)
        out["infinite_cache"] = None
    return out


def _run_point(u_index: int) -> list[SweepRow]:
    state = _STATE
    assert state is not None
    hits = {m: 0 for m in METHODS}
    colors = {m: 0 for m in METHODS}
    for sample in range(state.samples):
        for m, used in _method_outcomes(state, u_index, sample).items():
            if used is not None:
                hits[m] += 1
                colors[m] += used
    rows = []
    for m in METHODS:
        avg = None
        if m != "infinite_cache" and hits[m]:
            avg = colors[m] / hits[m]
        rows.append(SweepRow(state.grid[u_index], m, 100.0 * hits[m] / state.samples, avg))
    return rows


def run_sweep(config: SweepConfig, jobs: int = 1) -> list[SweepRow]:
    """Rows ordered by grid point then method; identical for any ``jobs``."""
    state = prepare(config)
    indices = range(len(state.grid))
    if jobs <= 1:
        _init_worker(state)
        parts = [_run_point(i) for i in indices]
    else:
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(state,)) as pool:
            parts = list(pool.map(_run_point, indices))
    return [row for part in parts for row in part]


def rows_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["utilization", "method", "schedulable_pct", "avg_colors_used"])
    for r in rows:
        avg = "" if r.avg_colors_used is None else f"{r.avg_colors_used:.4f}"
        w.writerow([f"{r.utilization:.4f}", r.method, f"{r.schedulable_pct:.2f}", avg])
    return buf.getvalue()


def read_rows_csv(text: str) -> list[SweepRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ["utilization", "method", "schedulable_pct", "avg_colors_used"]:
        raise ValueError(f"unexpected sweep CSV header {header}")
    rows = []
    for k, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != 4:
            raise ValueError(f"line {k}: expected 4 fields, got {len(rec)}")
        try:
            rows.append(SweepRow(float(rec[0]), rec[1], float(rec[2]),
                                 float(rec[3]) if rec[3] else None))
        except ValueError:
            raise ValueError(f"line {k}: non-numeric field in {rec}") from None
    return rows

