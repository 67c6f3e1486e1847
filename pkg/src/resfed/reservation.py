"""Reservation servers for DAG tasks and the transformations that size them.

A DAG task served by ``m`` sequential servers with budgets ``E_1..E_m``
(each released with the DAG job and sharing its deadline) finishes in
time whenever every server job receives its budget by the deadline and
``C + L (m - 1) <= sum(E_j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

from .dag_model import DagTask, TaskSet, task_set_from_json
from .schedulability import SequentialTask
from .timeval import INF, Surd, as_time, is_inf, time_from_json, time_to_json

LIGHT = "light"
HEAVY = "heavy"


class InfeasibleTaskError(ValueError):
    def __init__(self, task_id, reason):
        self.task_id = task_id
        self.reason = reason
        super().__init__(f"task {task_id!r}: {reason}")


class TransformError(ValueError):
    """One or more tasks could not be transformed; ``failures`` maps id -> reason."""

    def __init__(self, failures):
        self.failures = dict(failures)
        lines = [f"{tid}: {why}" for tid, why in self.failures.items()]
        super().__init__("; ".join(lines))


@dataclass(frozen=True)
class ReservationServer(SequentialTask):
    """A sequential sporadic task ``(E, D, T)`` serving one DAG task."""

    @property
    def dag_task_id(self):
        return self.task_id


class ConditionResult(NamedTuple):
    holds: bool
    slack: Fraction


def check_reservation_condition(C, L, budgets: Sequence) -> ConditionResult:
    C, L = as_time(C), as_time(L)
    budgets = [as_time(b) for b in budgets]
    if not budgets:
        raise ValueError("at least one budget is required")
    slack = sum(budgets, Fraction(0)) - (C + L * (len(budgets) - 1))
    return ConditionResult(slack >= 0, slack)


def prune_small_reservations(C, L, budgets: Sequence) -> list:
    """Drop every budget below ``L``; each one removed raises the slack by ``L - E``."""
    L = as_time(L)
    kept = [as_time(b) for b in budgets if as_time(b) >= L]
    if not kept:
        raise ValueError("no usable reservation: every budget is below the critical path length")
    return kept


@dataclass(frozen=True)
class ReservationSystem:
    dag_task_id: str
    classification: str
    C: Fraction
    L: Fraction
    servers: tuple = field(default_factory=tuple)

    @property
    def m(self) -> int:
        return len(self.servers)

    @property
    def budgets(self) -> list:
        return [s.E for s in self.servers]

    @property
    def gammas(self) -> list:
        return [s.E / self.L for s in self.servers]

    @property
    def cumulative(self) -> Fraction:
        return sum(self.budgets, Fraction(0))

    @property
    def inflation(self) -> Fraction:
        return self.cumulative / self.C

    def condition(self) -> ConditionResult:
        return check_reservation_condition(self.C, self.L, self.budgets)

    def problems(self) -> list:
        issues = []
        if self.classification == LIGHT:
            if self.m != 1 or self.servers[0].E != self.C:
                issues.append("light system must be a single server with E = C")
        else:
            if not self.condition().holds:
                issues.append(f"reservation condition fails (slack {self.condition().slack})")
            for s in self.servers:
                if not (self.L < s.E <= s.D):
                    issues.append(f"server {s.index}: budget {s.E} outside (L={self.L}, D={s.D}]")
        return issues

    def to_json(self):
        return {
            "task": self.dag_task_id,
            "class": self.classification,
            "C": time_to_json(self.C),
            "L": time_to_json(self.L),
            "gamma": [time_to_json(g) for g in self.gammas],
            "cumulative": time_to_json(self.cumulative),
            "servers": [
                {"index": s.index, "E": time_to_json(s.E), "D": time_to_json(s.D), "T": time_to_json(s.T)}
                for s in self.servers
            ],
        }

    @classmethod
    def from_json(cls, obj, path="$"):
        tid = str(obj["task"])
        servers = tuple(
            ReservationServer(
                time_from_json(s["E"], f"{path}.servers[{j}].E"),
                time_from_json(s["D"], f"{path}.servers[{j}].D"),
                time_from_json(s["T"], f"{path}.servers[{j}].T"),
                tid,
                int(s.get("index", j + 1)),
            )
            for j, s in enumerate(obj["servers"])
        )
        return cls(tid, obj["class"], time_from_json(obj["C"]), time_from_json(obj["L"]), servers)


def make_system(task: DagTask, budgets: Sequence, classification: str = HEAVY) -> ReservationSystem:
    servers = tuple(
        ReservationServer(as_time(e), task.D, task.T, task.id, j + 1) for j, e in enumerate(budgets)
    )
    return ReservationSystem(task.id, classification, task.C, task.L, servers)


def light_system(task: DagTask) -> ReservationSystem:
    return make_system(task, [task.C], LIGHT)


def equal_system(task: DagTask, m: int) -> ReservationSystem:
    return make_system(task, [budgets_for_server_count(task.C, task.L, m)] * m, HEAVY)


@dataclass(frozen=True)
class TransformedTaskSet:
    systems: tuple
    origin: TaskSet
    algorithm: str
    gamma: Optional[Surd] = None
    infeasible: tuple = ()  # (task id, reason)

    @property
    def servers(self) -> list:
        return [s for sys in self.systems for s in sys.servers]

    def system(self, task_id) -> ReservationSystem:
        for s in self.systems:
            if s.dag_task_id == task_id:
                return s
        raise KeyError(task_id)

    def to_json(self):
        return {
            "algorithm": self.algorithm,
            "gamma": None if self.gamma is None else self.gamma.to_json(),
            "systems": [s.to_json() for s in self.systems],
            "infeasible": [{"task": t, "reason": r} for t, r in self.infeasible],
            "origin": self.origin.to_json(),
        }

    @classmethod
    def from_json(cls, obj) -> "TransformedTaskSet":
        gamma = obj.get("gamma")
        return cls(
            tuple(ReservationSystem.from_json(s, f"$.systems[{i}]") for i, s in enumerate(obj["systems"])),
            task_set_from_json(obj["origin"]),
            obj.get("algorithm", "custom"),
            None if gamma is None else Surd.from_json(gamma),
            tuple((i["task"], i["reason"]) for i in obj.get("infeasible", [])),
        )


def _finish(ts, algorithm, gamma, systems, failures, strict):
    if failures and strict:
        raise TransformError(failures)
    return TransformedTaskSet(tuple(systems), ts, algorithm, gamma, tuple(failures.items()))


def _min_deadline(task: DagTask):
    return task.D if is_inf(task.T) else min(task.T, task.D)


def r_min_transform(ts: TaskSet, strict: bool = True) -> TransformedTaskSet:
    """Minimum number of equal servers per heavy task.

    Heavy means ``C > min(T, D)``.  A heavy task with ``L >= D`` cannot be
    served (with ``L = D`` the servers would need ``E > L = D``); with
    ``strict=False`` such tasks are listed in ``infeasible`` instead of
    raising.
    """
    systems, failures = [], {}
    for task in ts:
        if task.C <= _min_deadline(task):
            systems.append(light_system(task))
            continue
        if task.C == task.L and task.L < task.D:
            # a chain: heavy only because T < C; one server is the best possible
            systems.append(make_system(task, [task.C], HEAVY))
            continue
        try:
            m, _ = min_equal_servers(task.C, task.L, task.D, task_id=task.id)
        except InfeasibleTaskError as exc:
            failures[task.id] = exc.reason
            continue
        systems.append(equal_system(task, m))
    return _finish(ts, "r-min", None, systems, failures, strict)


def r_equal_servers(C, L, gamma) -> int:
    """``ceil((C - L) / (L (gamma - 1)))`` evaluated exactly."""
    gamma = Surd.parse(gamma)
    return math.ceil(((as_time(C) - as_time(L)) / as_time(L)) / (gamma - 1))


def r_equal_transform(ts: TaskSet, gamma, strict: bool = True) -> TransformedTaskSet:
    """Equal servers with a constant inflation factor ``gamma``.

    Heavy means ``C > gamma * L``; heavy tasks get
    ``ceil((C-L) / (L (gamma-1)))`` servers of budget ``(C + (m-1) L) / m``.
    """
    gamma = Surd.parse(gamma)
    if not gamma > 1:
        raise ValueError(f"gamma must exceed 1, got {gamma}")
    systems, failures = [], {}
    for task in ts:
        ratio = task.C / task.L
        if not gamma < ratio:
            systems.append(light_system(task))
            continue
        if gamma > task.D / task.L:
            failures[task.id] = f"deadline too tight for gamma={gamma}: gamma*L > D={task.D}"
            continue
        m = r_equal_servers(task.C, task.L, gamma)
        systems.append(equal_system(task, m))
    return _finish(ts, "r-equal", gamma, systems, failures, strict)


def min_equal_servers(C, L, D, task_id="task"):
    """Fewest equal servers and the smallest inflation factor achieving it."""
    C, L, D = as_time(C), as_time(L), as_time(D)
    if L == D and C > L:
        raise InfeasibleTaskError(task_id, "gang-infeasible under the reservation condition: L = D < C")
    if L >= D:
        raise InfeasibleTaskError(task_id, f"critical path L={L} is not below the deadline D={D}")
    if not C > L:
        raise ValueError("C must exceed L")
    m = math.ceil((C - L) / (D - L))
    return m, 1 + (C - L) / (m * L)


def budgets_for_server_count(C, L, m: int, D=None) -> Fraction:
    """Equal budget ``L + (C - L) / m`` for ``m`` servers."""
    C, L = as_time(C), as_time(L)
    if m < 1:
        raise ValueError("m must be at least 1")
    if D is not None:
        D = as_time(D)
        if L < D:
            minimum = max(1, math.ceil((C - L) / (D - L)))
            if m < minimum:
                raise ValueError(f"m={m} is below the minimum {minimum}")
        budget = L + (C - L) / m
        if budget > D:
            raise ValueError(f"budget {budget} exceeds the deadline {D}")
        return budget
    return L + (C - L) / m


def split_cumulative_budget(C, L, D, m: int, weights: Sequence, clamp: bool = True) -> list:
    """Distribute ``C + (m-1) L`` over ``m`` servers by ``weights``, each in ``(L, D]``.

    Out-of-box shares are clamped to the nearest bound and the difference
    is spread equally over the servers that are not clamped: the result
    is ``clip(w_j * total + shift, L, D)`` with the one shift that keeps
    the sum.  With ``clamp=False`` any out-of-box share is an error.
    """
    C, L, D = as_time(C), as_time(L), as_time(D)
    weights = [as_time(w) for w in weights]
    if m < 2:
        raise ValueError("m must be at least 2")
    if len(weights) != m:
        raise ValueError(f"expected {m} weights, got {len(weights)}")
    if any(w < 0 for w in weights) or sum(weights) != 1:
        raise ValueError("weights must be non-negative and sum to 1")
    total = C + (m - 1) * L
    if total > m * D or total <= m * L:
        raise ValueError(f"infeasible split: cumulative budget {total} not in ({m * L}, {m * D}]")
    budgets = [w * total for w in weights]
    if not clamp:
        bad = [j for j, b in enumerate(budgets) if not L < b <= D]
        if bad:
            raise ValueError(f"shares {[str(budgets[j]) for j in bad]} fall outside ({L}, {D}]")
        return budgets
    shift = _clip_shift(budgets, L, D, total)
    budgets = [min(D, max(L, b + shift)) for b in budgets]
    if sum(budgets) != total or not all(L < b <= D for b in budgets):
        raise ValueError(f"weights cannot be clamped into ({L}, {D}] preserving the sum {total}")
    return budgets


def _clip_shift(values, lo, hi, total) -> Fraction:
    """Solve ``sum(clip(v + s, lo, hi)) == total`` for ``s`` exactly."""

    def clipped_sum(s):
        return sum((min(hi, max(lo, v + s)) for v in values), Fraction(0))

    points = sorted({lo - v for v in values} | {hi - v for v in values})
    # clipped_sum is continuous, non-decreasing and linear between breakpoints
    prev = points[0]
    if clipped_sum(prev) >= total:
        return prev
    for p in points[1:]:
        at = clipped_sum(p)
        if at >= total:
            base = clipped_sum(prev)
            return prev + (total - base) * (p - prev) / (at - base)
        prev = p
    return prev


def inflation_bound(gamma) -> Surd:
    """``1 + 1/(gamma - 1)``, the cap on ``C'/C`` under fixed-gamma sizing."""
    gamma = Surd.parse(gamma)
    return 1 + (gamma - 1).reciprocal()
