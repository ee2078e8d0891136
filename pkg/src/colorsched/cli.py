"""Command line: colorsched {wcet-table, allocate, sweep, plot}.

Exit codes: 0 success, 1 valid but infeasible allocation, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .allocator import build_problem, export_lp, solve
from .coloring import HEURISTICS
from .experiment import SweepConfig, read_rows_csv, rows_csv, run_sweep
from .model import CacheConfig, ConfigError, TaskSkeleton
from .plot import render_svg
from .program import ProgramError, load_program
from .wcet import colorings_csv, read_tables_csv, tables_csv, wcet_table

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror or exc}") from None


def _cache(path: str | None) -> CacheConfig:
    return CacheConfig.from_json(_read(path)) if path else CacheConfig()


def load_taskset(text: str) -> list[TaskSkeleton]:
    """``{"tasks": [{"id": str, "deadline": int, "period": int}, ...]}``."""
    try:
        doc = json.loads(text)
        return [TaskSkeleton(str(t["id"]), int(t["deadline"]), int(t["period"]))
                for t in doc["tasks"]]
    except json.JSONDecodeError as exc:
        raise InputError(f"task set is not valid JSON: {exc}") from None
    except (KeyError, TypeError) as exc:
        raise InputError(f"task set entry is missing or malformed: {exc}") from None


def cmd_wcet_table(args) -> int:
    cache = _cache(args.cache)
    program = load_program(_read(args.program), cache.lines_per_page)
    table = wcet_table(program, args.heuristic, cache, args.n_tasks, seed=args.seed)
    _write(args.out, tables_csv([table]))
    if args.dump_colorings:
        _write(args.dump_colorings, colorings_csv([table]))
    return EXIT_OK


def cmd_allocate(args) -> int:
    cache = _cache(args.cache)
    tasks = load_taskset(_read(args.taskset))
    folder = Path(args.tables)
    if not folder.is_dir():
        raise InputError(f"{args.tables} is not a directory")
    tables = []
    for f in sorted(folder.glob("*.csv")):
        tables.extend(read_tables_csv(_read(str(f)), args.heuristic))
    by_id = {t.task_id: t for t in tables}
    if len(by_id) != len(tables):
        raise InputError("several tables for the same task; pass --heuristic")
    missing = [t.id for t in tasks if t.id not in by_id]
    if missing:
        raise InputError(f"no WCET table for tasks {missing}")
    ordered = [by_id[t.id] for t in tasks]
    problem = build_problem(ordered, tasks, cache)
    if args.export_lp:
        _write(args.export_lp, export_lp(problem))
    alloc = solve(problem)
    print(alloc.to_json())
    return EXIT_OK if alloc.feasible else EXIT_INFEASIBLE


def cmd_sweep(args) -> int:
    doc = {}
    if args.config:
        try:
            doc = json.loads(_read(args.config))
        except json.JSONDecodeError as exc:
            raise InputError(f"sweep config is not valid JSON: {exc}") from None
    config = SweepConfig.from_dict(doc)
    seed = os.environ.get("COLORSCHED_SEED")
    if seed is not None:
        try:
            config.master_seed = int(seed)
        except ValueError:
            raise InputError(f"COLORSCHED_SEED must be an integer, got {seed!r}") from None
    if args.jobs < 1:
        raise InputError("--jobs must be >= 1")
    _write(args.out, rows_csv(run_sweep(config, jobs=args.jobs)))
    return EXIT_OK


def cmd_plot(args) -> int:
    rows = read_rows_csv(_read(args.csv))
    if not rows:
        raise InputError(f"{args.csv} has no data rows")
    k = _cache(args.cache).num_colors
    _write(args.out, render_svg(rows, args.metric, k))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="colorsched",
                                 description="Cache-color allocation for EDF task sets.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("wcet-table", help="WCET per number of granted colors")
    p.add_argument("--program", required=True)
    p.add_argument("--cache")
    p.add_argument("--heuristic", required=True,
                   help=f"one of {', '.join(HEURISTICS)}")
    p.add_argument("--n-tasks", type=int, required=True)
    p.add_argument("--seed", type=int, default=0, help="seed of the random heuristic")
    p.add_argument("--out", required=True)
    p.add_argument("--dump-colorings", metavar="PATH")
    p.set_defaults(func=cmd_wcet_table)

    p = sub.add_parser("allocate", help="minimum-color schedulable allocation")
    p.add_argument("--taskset", required=True)
    p.add_argument("--tables", required=True, help="directory of WCET table CSVs")
    p.add_argument("--cache")
    p.add_argument("--heuristic", help="table heuristic to use when several are present")
    p.add_argument("--export-lp", metavar="PATH")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("sweep", help="utilization sweep over all methods")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="SVG chart of a sweep CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--metric", choices=("pct", "colors"), default="pct")
    p.add_argument("--cache", help="cache config giving the color count for --metric colors")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "heuristic", None) and args.heuristic not in HEURISTICS:
        print(f"error: unknown heuristic {args.heuristic!r}; valid: {', '.join(HEURISTICS)}",
              file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, ConfigError, ProgramError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
