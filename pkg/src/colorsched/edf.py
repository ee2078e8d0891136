"""EDF feasibility on one processor via the processor demand criterion.

All arithmetic is on integers (or exact fractions for utilization). Tasks are
any objects with ``wcet``, ``deadline`` and ``period`` attributes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Protocol, Sequence

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_POINT_CAP = 100_000


class TaskLike(Protocol):
    wcet: int
    deadline: int
    period: int


class CheckPointOverflow(RuntimeError):
    """More deadline check points than the configured cap."""


@dataclass(frozen=True)
class CheckPointSet:
    points: tuple[int, ...]
    horizon: int

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


@dataclass(frozen=True)
class DbfResult:
    feasible: bool
    violated_at: int | None = None
    demand: int | None = None
    reason: str = ""

    def __bool__(self):
        return self.feasible


def utilization(tasks: Sequence[TaskLike]) -> Fraction:
    return sum((Fraction(t.wcet, t.period) for t in tasks), Fraction(0))


def hyperperiod(periods: Sequence[int]) -> int:
    return reduce(math.lcm, periods, 1)


def definitive_idle_time(tasks: Sequence[TaskLike]) -> int | None:
    """Length of the synchronous busy period, or None when it never ends (U > 1).

    Least fixed point of L = sum ceil(L / T_i) * C_i, iterated from sum C_i.
    """
    if utilization(tasks) > 1:
        return None
    length = sum(t.wcet for t in tasks)
    while True:
        nxt = sum(-(-length // t.period) * t.wcet for t in tasks)
        if nxt == length:
            return length
        length = nxt


def count_points(tasks: Sequence[TaskLike], horizon: int) -> int:
    return sum((horizon - t.deadline) // t.period + 1 for t in tasks if t.deadline <= horizon)


def dset(tasks: Sequence[TaskLike], horizon: int, cap: int = DEFAULT_POINT_CAP) -> CheckPointSet:
    """Absolute deadlines k*T_i + D_i <= horizon (k >= 0) of the synchronous pattern."""
    return CheckPointSet(tuple(int(t) for t in dset_array(tasks, horizon, cap)), horizon)


def dset_array(tasks: Sequence[TaskLike], horizon: int, cap: int = DEFAULT_POINT_CAP) -> np.ndarray:
    n = count_points(tasks, horizon)
    if n > cap:
        raise CheckPointOverflow(f"{n} check points up to t={horizon} exceed the cap of {cap}")
    parts = [np.arange(t.deadline, horizon + 1, t.period, dtype=np.int64) for t in tasks]
    points = np.unique(np.concatenate(parts)) if parts else np.zeros(0, dtype=np.int64)
    if points.size == 0:
        log.info("no deadline falls in [0, %d]; check-point set is empty", horizon)
    return points


def demand(tasks: Sequence[TaskLike], t: int) -> int:
    """Execution demand of jobs released and due inside [0, t]."""
    return sum(((t - x.deadline) // x.period + 1) * x.wcet for x in tasks if t >= x.deadline)


def dbf_feasible(tasks: Sequence[TaskLike], points: CheckPointSet | Sequence[int]) -> DbfResult:
    pts = tuple(points)
    if not pts:
        log.info("empty check-point set: demand test holds vacuously")
        return DbfResult(True, reason="no check points")
    for t in pts:
        d = demand(tasks, t)
        if d > t:
            return DbfResult(False, t, d, "demand exceeds interval length")
    return DbfResult(True)


def analysis_horizon(worst: Sequence[TaskLike]) -> int:
    """Check-point horizon valid for any WCETs bounded by those of ``worst``.

    The busy period under the largest WCETs bounds every smaller one; the
    hyperperiod is the fallback when that busy period does not end.
    """
    hyper = hyperperiod([t.period for t in worst])
    busy = definitive_idle_time(worst)
    return hyper if busy is None else min(busy, hyper)


def _busy_period(tasks: Sequence[TaskLike], limit: int) -> int | None:
    """Busy-period fixed point, or None once the iterate passes ``limit``."""
    length = sum(t.wcet for t in tasks)
    while length <= limit:
        nxt = sum(-(-length // t.period) * t.wcet for t in tasks)
        if nxt == length:
            return length
        length = nxt
    return None


def feasibility_horizon(tasks: Sequence[TaskLike]) -> int:
    """Horizon past which no first deadline miss can occur, for U <= 1.

    The smallest of the busy period, the hyperperiod and, when U < 1, the
    bound max(D_max, sum (T_i - D_i) U_i / (1 - U)).
    """
    u = utilization(tasks)
    if u > 1:
        raise ValueError("no finite horizon for utilization above 1")
    horizon = hyperperiod([t.period for t in tasks])
    if u < 1:
        slack = sum(Fraction((t.period - t.deadline) * t.wcet, t.period) for t in tasks)
        horizon = min(horizon, max(max(t.deadline for t in tasks), math.floor(slack / (1 - u))))
    busy = _busy_period(tasks, horizon)
    return horizon if busy is None else busy


def _last_deadline_before(tasks: Sequence[TaskLike], t: int) -> int | None:
    best = None
    for x in tasks:
        if x.deadline < t:
            d = (t - x.deadline - 1) // x.period * x.period + x.deadline
            best = d if best is None else max(best, d)
    return best


def qpa_feasible(tasks: Sequence[TaskLike]) -> DbfResult:
    """Exact demand test that walks deadlines backwards from the horizon.

    Visits only a handful of points, so it stays cheap when the horizon holds
    far more deadlines than could be listed.
    """
    u = utilization(tasks)
    if u > 1:
        return DbfResult(False, reason=f"utilization {float(u):.4f} > 1")
    horizon = feasibility_horizon(tasks)
    d_min = min(x.deadline for x in tasks)
    t = _last_deadline_before(tasks, horizon + 1)
    if t is None:
        return DbfResult(True, reason="no check points")
    while True:
        h = demand(tasks, t)
        if h > t:
            return DbfResult(False, t, h, "demand exceeds interval length")
        if h <= d_min:
            return DbfResult(True)
        if h < t:
            t = h
        else:
            t = _last_deadline_before(tasks, t)
            if t is None:
                return DbfResult(True)


def edf_feasible(tasks: Sequence[TaskLike], cap: int = DEFAULT_POINT_CAP) -> DbfResult:
    """Exact test: U <= 1 and no demand overflow up to the feasibility horizon.

    Lists every check point when there are at most ``cap`` of them and falls
    back to the backward walk otherwise.
    """
    u = utilization(tasks)
    if u > 1:
        return DbfResult(False, reason=f"utilization {float(u):.4f} > 1")
    horizon = feasibility_horizon(tasks)
    if count_points(tasks, horizon) > cap:
        return qpa_feasible(tasks)
    return dbf_feasible(tasks, dset(tasks, horizon, cap))
