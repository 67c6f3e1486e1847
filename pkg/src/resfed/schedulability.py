"""Uniprocessor tests for sporadic arbitrary-deadline sequential tasks.

Fixed-priority tests take the analysed task and the list of tasks that
interfere with it (for deadline-monotonic scheduling, the higher-priority
tasks on the same processor; see :func:`dm_interferers`).  The EDF test
takes the whole processor.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

from .timeval import INF, Time, as_time, ceil_div, is_inf, time_to_json, utilization

UNBOUNDED = "unbounded"
MAX_JOBS = 10**6


class AnalysisLimitExceeded(RuntimeError):
    """The busy window or demand check needed more steps than allowed."""


@dataclass(frozen=True)
class SequentialTask:
    E: Fraction
    D: Fraction
    T: Time
    task_id: str = ""
    index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "E", as_time(self.E))
        object.__setattr__(self, "D", as_time(self.D))
        object.__setattr__(self, "T", as_time(self.T))
        if not self.E > 0:
            raise ValueError(f"budget must be positive, got {self.E}")
        if is_inf(self.D) or not self.D > 0:
            raise ValueError(f"deadline must be positive and finite, got {self.D}")

    @property
    def U(self) -> Fraction:
        return utilization(self.E, self.T)

    def dm_key(self):
        # equal deadlines: task id, then server index
        return (self.D, self.task_id, self.index)

    @property
    def name(self) -> str:
        return f"{self.task_id}#{self.index}" if self.task_id else f"#{self.index}"

    def to_json(self):
        return {
            "task": self.task_id,
            "index": self.index,
            "E": time_to_json(self.E),
            "D": time_to_json(self.D),
            "T": time_to_json(self.T),
        }


@dataclass(frozen=True)
class Verdict:
    schedulable: bool
    test: str
    wcrt: Union[Fraction, str, None] = None
    witness: Optional[tuple] = None  # (job index h, finish time R_h)
    detail: str = ""

    def __bool__(self):
        return self.schedulable

    def to_json(self):
        out = {"schedulable": self.schedulable, "test": self.test}
        if self.wcrt is not None:
            out["wcrt"] = self.wcrt if isinstance(self.wcrt, str) else time_to_json(self.wcrt)
        if self.witness is not None:
            out["witness"] = {"job": self.witness[0], "finish": time_to_json(self.witness[1])}
        if self.detail:
            out["detail"] = self.detail
        return out


def dm_interferers(task: SequentialTask, tasks: Sequence[SequentialTask]) -> list:
    key = task.dm_key()
    return [t for t in tasks if t.dm_key() < key]


def _sum_u(tasks) -> Fraction:
    return sum((t.U for t in tasks), Fraction(0))


def _finish_time(h: int, task: SequentialTask, hp, start: Fraction) -> Fraction:
    base = h * task.E
    t = start
    while True:
        demand = base + sum((ceil_div(t, i.T) * i.E for i in hp), Fraction(0))
        if demand == t:
            return t
        t = demand


def busy_window_wcrt(task: SequentialTask, interferers: Sequence[SequentialTask],
                     max_jobs: int = MAX_JOBS) -> Verdict:
    """Exact fixed-priority response-time analysis over the level-k busy window.

    For job ``h`` the finish time ``R_h`` is the least ``t`` with
    ``h*E_k + sum(ceil(t/T_i) * E_i) <= t``; its response is
    ``R_h - (h-1) T_k``.  The window closes at the first ``h`` with
    ``R_h <= h T_k``.
    """
    hp = list(interferers)
    u_hp = _sum_u(hp)
    if u_hp >= 1:
        return Verdict(False, "exact", UNBOUNDED, None,
                       f"higher-priority utilization {u_hp} >= 1: no job of {task.name} ever completes")
    overloaded = u_hp + task.U > 1
    sum_e = sum((i.E for i in hp), Fraction(0))
    worst = Fraction(0)
    witness = None
    prev = Fraction(0)
    h = 1
    while True:
        if h > max_jobs:
            raise AnalysisLimitExceeded(
                f"busy window of {task.name} exceeds {max_jobs} jobs without closing")
        start = max(h * task.E + sum_e, prev + task.E)
        finish = _finish_time(h, task, hp, start)
        response = finish - (h - 1) * task.T if h > 1 else finish
        if response > worst:
            worst = response
        if witness is None and response > task.D:
            witness = (h, finish)
            if overloaded:
                return Verdict(False, "exact", UNBOUNDED, witness,
                               f"utilization {u_hp + task.U} > 1: responses grow without bound")
        if is_inf(task.T) or finish <= h * task.T:
            break
        prev = finish
        h += 1
    return Verdict(witness is None, "exact", worst, witness)


def fbb_test(task: SequentialTask, interferers: Sequence[SequentialTask]) -> Verdict:
    """Linear-time sufficient test with an explicit utilization condition."""
    demand = task.E
    for i in interferers:
        ratio = Fraction(0) if is_inf(i.T) else task.D / i.T
        demand += (1 + ratio) * i.E
    u = task.U + _sum_u(interferers)
    ok = demand <= task.D and u <= 1
    detail = "" if ok else f"demand {demand} vs deadline {task.D}, utilization {u}"
    return Verdict(ok, "fbb", None, None, detail)


def bini_bound(task: SequentialTask, interferers: Sequence[SequentialTask]) -> Fraction:
    """Upper bound on the response time from linearised request bounds."""
    u = _sum_u(interferers)
    if u >= 1:
        raise ValueError(f"bound undefined: interferer utilization {u} >= 1")
    num = task.E + sum((i.E - i.U * i.E for i in interferers), Fraction(0))
    return num / (1 - u)


def combined_test(task: SequentialTask, interferers: Sequence[SequentialTask]) -> Verdict:
    """The fbb demand condition tightened by the linearised bound."""
    u_hp = _sum_u(interferers)
    lhs = task.E + task.D * u_hp + sum((i.E - i.U * i.E for i in interferers), Fraction(0))
    u = task.U + u_hp
    ok = lhs <= task.D and u <= 1
    detail = "" if ok else f"demand {lhs} vs deadline {task.D}, utilization {u}"
    return Verdict(ok, "combined", None, None, detail)


FP_TESTS: dict = {
    "fbb": fbb_test,
    "combined": combined_test,
    "exact": busy_window_wcrt,
}


def fp_test(name: str) -> Callable:
    try:
        return FP_TESTS[name]
    except KeyError:
        raise ValueError(f"unknown test {name!r}; choose from {sorted(FP_TESTS)}") from None


def dm_processor_verdicts(tasks: Sequence[SequentialTask], test: str = "exact") -> list:
    """Run a fixed-priority test for every task on one DM-scheduled processor."""
    fn = fp_test(test)
    ordered = sorted(tasks, key=SequentialTask.dm_key)
    return [fn(t, ordered[:i]) for i, t in enumerate(ordered)]


def dbf(task: SequentialTask, t: Fraction) -> Fraction:
    """Demand of jobs with release and deadline inside ``[0, t]``."""
    if t < task.D:
        return Fraction(0)
    if is_inf(task.T):
        return task.E
    return (math.floor((t - task.D) / task.T) + 1) * task.E


def edf_demand_test(tasks: Sequence[SequentialTask], max_points: int = MAX_JOBS) -> Verdict:
    """Exact EDF test: ``dbf(t) <= t`` at every absolute deadline in the synchronous busy period."""
    tasks = list(tasks)
    if not tasks:
        return Verdict(True, "edf")
    u = _sum_u(tasks)
    if u > 1:
        return Verdict(False, "edf", None, None, f"utilization {u} > 1")
    # length of the synchronous busy period
    t = sum((x.E for x in tasks), Fraction(0))
    steps = 0
    while True:
        w = sum((ceil_div(t, x.T) * x.E for x in tasks), Fraction(0))
        if w == t:
            break
        t = w
        steps += 1
        if steps > max_points:
            raise AnalysisLimitExceeded(f"EDF busy period did not close within {max_points} steps")
    horizon = t
    heap = [(x.D, i) for i, x in enumerate(tasks)]
    heapq.heapify(heap)
    checked = 0
    last = None
    while heap and heap[0][0] <= horizon:
        d, i = heapq.heappop(heap)
        x = tasks[i]
        if not is_inf(x.T):
            heapq.heappush(heap, (d + x.T, i))
        if d == last:
            continue
        last = d
        checked += 1
        if checked > max_points:
            raise AnalysisLimitExceeded(f"EDF demand check exceeds {max_points} testing points")
        demand = sum((dbf(y, d) for y in tasks), Fraction(0))
        if demand > d:
            return Verdict(False, "edf", None, None, f"dbf({d}) = {demand} > {d}")
    return Verdict(True, "edf")
