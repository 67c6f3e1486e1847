"""First-fit partitioning of reservation servers, and the federated baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .dag_model import TaskSet
from .reservation import TransformedTaskSet, r_equal_transform
from .schedulability import (
    SequentialTask,
    Verdict,
    dm_processor_verdicts,
    edf_demand_test,
    fp_test,
)
from .timeval import Surd, is_inf, time_to_json

SPEEDUP_BOUND_DM = Surd(3, 2, 2)  # 3 + 2*sqrt(2)


@dataclass
class Partition:
    processors: list  # processor index -> list of SequentialTask
    unassigned: list
    test: str
    policy: str = "dm"
    verdicts: list = field(default_factory=list)

    @property
    def M(self) -> int:
        return len(self.processors)

    @property
    def feasible(self) -> bool:
        return not self.unassigned

    def processor_of(self, task: SequentialTask) -> Optional[int]:
        for p, tasks in enumerate(self.processors):
            if task in tasks:
                return p
        return None

    def audit(self) -> list:
        """Re-run the per-processor test on the final assignment."""
        return [all(v.schedulable for v in _verdicts(tasks, self.test, self.policy))
                for tasks in self.processors]

    def to_json(self):
        procs = []
        for p, tasks in enumerate(self.processors):
            verdicts = self.verdicts[p] if p < len(self.verdicts) else []
            procs.append({
                "index": p,
                "servers": [t.to_json() for t in tasks],
                "utilization": time_to_json(sum((t.U for t in tasks), Fraction(0))),
                "schedulable": all(v.schedulable for v in verdicts),
                "verdicts": [v.to_json() for v in verdicts],
            })
        return {
            "policy": self.policy,
            "test": self.test,
            "feasible": self.feasible,
            "processors": procs,
            "unassigned": [t.to_json() for t in self.unassigned],
        }

    @classmethod
    def from_json(cls, obj, transformed: TransformedTaskSet) -> "Partition":
        lookup = {(s.task_id, s.index): s for s in transformed.servers}

        def resolve(raw):
            key = (str(raw["task"]), int(raw["index"]))
            if key not in lookup:
                raise ValueError(f"partition references unknown server {key[0]}#{key[1]}")
            return lookup[key]

        procs = [[resolve(s) for s in p["servers"]] for p in obj["processors"]]
        part = cls(procs, [resolve(s) for s in obj.get("unassigned", [])], obj["test"], obj.get("policy", "dm"))
        part.verdicts = [_verdicts(tasks, part.test, part.policy) for tasks in procs]
        return part


def _verdicts(tasks, test, policy):
    if policy == "edf":
        return [edf_demand_test(tasks)] if tasks else []
    return dm_processor_verdicts(tasks, test)


def _check_m(M):
    if not isinstance(M, int) or isinstance(M, bool) or M < 1:
        raise ValueError(f"number of processors must be a positive integer, got {M!r}")


def dm_first_fit(servers: Sequence[SequentialTask], M: int, test: str = "exact") -> Partition:
    """Deadline-monotonic first fit.

    Servers are placed in DM priority order, so every server already on a
    processor has higher priority than the one being admitted and only
    the newcomer needs testing.  Servers of the same DAG task may share a
    processor.
    """
    _check_m(M)
    fn = fp_test(test)
    procs = [[] for _ in range(M)]
    unassigned = []
    for s in sorted(servers, key=SequentialTask.dm_key):
        for tasks in procs:
            if fn(s, tasks).schedulable:
                tasks.append(s)
                break
        else:
            unassigned.append(s)
    part = Partition(procs, unassigned, test, "dm")
    part.verdicts = [dm_processor_verdicts(tasks, test) for tasks in procs]
    return part


def edf_first_fit(servers: Sequence[SequentialTask], M: int) -> Partition:
    """First fit in deadline order with the exact EDF demand test per processor."""
    _check_m(M)
    procs = [[] for _ in range(M)]
    unassigned = []
    for s in sorted(servers, key=SequentialTask.dm_key):
        for tasks in procs:
            if edf_demand_test(tasks + [s]).schedulable:
                tasks.append(s)
                break
        else:
            unassigned.append(s)
    part = Partition(procs, unassigned, "edf", "edf")
    part.verdicts = [[edf_demand_test(tasks)] if tasks else [] for tasks in procs]
    return part


def partition_servers(servers, M, policy="dm", test="exact") -> Partition:
    if policy == "edf":
        return edf_first_fit(servers, M)
    if policy != "dm":
        raise ValueError(f"unknown policy {policy!r}")
    return dm_first_fit(servers, M, test)


# --------------------------------------------------------------------------
# Federated scheduling baseline


@dataclass
class FederatedAllocation:
    dedicated: dict  # heavy task id -> processors granted
    gang: set
    unplaced: list  # (task id, reason)
    residual: int
    light_partition: Optional[Partition]

    @property
    def feasible(self) -> bool:
        light_ok = self.light_partition is None or self.light_partition.feasible
        return not self.unplaced and light_ok

    def to_json(self):
        return {
            "feasible": self.feasible,
            "dedicated": dict(self.dedicated),
            "gang": sorted(self.gang),
            "unplaced": [{"task": t, "reason": r} for t, r in self.unplaced],
            "residual": self.residual,
            "light_partition": None if self.light_partition is None else self.light_partition.to_json(),
        }


def federated_processor_demand(task):
    """Dedicated processors a heavy task needs, and whether it is a gang case.

    Returns ``(None, False)`` when the critical path exceeds the deadline.
    """
    if task.L < task.D:
        return math.ceil((task.C - task.L) / (task.D - task.L)), False
    if task.L == task.D:
        return math.ceil(task.C / task.L), True
    return None, False


def is_heavy(task) -> bool:
    bound = task.D if is_inf(task.T) else min(task.T, task.D)
    return task.C > bound


def federated_baseline(ts: TaskSet) -> FederatedAllocation:
    """Exclusive processors for heavy tasks (in deadline order), first fit for light ones."""
    pool = ts.processors
    dedicated, gang, unplaced = {}, set(), []
    heavy = sorted((t for t in ts if is_heavy(t)), key=lambda t: (t.D, t.id))
    for task in heavy:
        need, is_gang = federated_processor_demand(task)
        if need is None:
            unplaced.append((task.id, f"critical path {task.L} exceeds deadline {task.D}"))
            continue
        if need > pool:
            unplaced.append((task.id, f"needs {need} dedicated processors, {pool} left"))
            continue
        dedicated[task.id] = need
        pool -= need
        if is_gang:
            gang.add(task.id)
    light = [SequentialTask(t.C, t.D, t.T, t.id, 1) for t in ts if not is_heavy(t)]
    if pool >= 1:
        light_part = dm_first_fit(light, pool, "exact")
    else:
        light_part = None
        unplaced.extend((t.task_id, "no processors left for light tasks") for t in light)
    return FederatedAllocation(dedicated, gang, unplaced, pool, light_part)


# --------------------------------------------------------------------------
# Speedup probing


def necessary_conditions(ts: TaskSet) -> list:
    """Violated necessary conditions for feasibility on unit-speed processors.

    Checks total utilization, ``L <= min(T, D)`` per task and, for every
    deadline ``D_k``, that the work of tasks with ``D_i <= D_k`` fits into
    ``M * D_k``.
    """
    M = ts.processors
    problems = []
    if ts.utilization > M:
        problems.append(f"total utilization {ts.utilization} > {M}")
    for t in ts:
        bound = t.D if is_inf(t.T) else min(t.T, t.D)
        if t.L > bound:
            problems.append(f"{t.id}: L={t.L} > min(T, D)={bound}")
    for k in ts:
        demand = sum((t.C for t in ts if t.D <= k.D), Fraction(0))
        if demand > M * k.D:
            problems.append(f"work {demand} due by {k.D} exceeds {M} x {k.D}")
    return problems


def reservation_feasible(ts: TaskSet, gamma, test: str = "combined") -> bool:
    transformed = r_equal_transform(ts, gamma, strict=False)
    if transformed.infeasible:
        return False
    return dm_first_fit(transformed.servers, ts.processors, test).feasible


@dataclass
class SpeedupResult:
    speed: Optional[Fraction]  # None when infeasible at the maximum speed
    probes: list  # (speed, feasible) in probing order

    def to_json(self):
        return {
            "speed": None if self.speed is None else time_to_json(self.speed),
            "probes": [[time_to_json(s), ok] for s, ok in self.probes],
        }


def speedup_probe(ts: TaskSet, gamma="1+sqrt(2)", lo=1, hi=64,
                  rel_precision=Fraction(1, 1000), test: str = "combined") -> SpeedupResult:
    """Smallest speed (found by bisection) at which R-EQUAL plus DM first fit succeeds."""
    lo, hi = Fraction(lo), Fraction(hi)
    probes = []

    def ok(s):
        res = reservation_feasible(ts.scaled(s), gamma, test)
        probes.append((s, res))
        return res

    if ok(lo):
        return SpeedupResult(lo, probes)
    if not ok(hi):
        return SpeedupResult(None, probes)
    while (hi - lo) > rel_precision * lo:
        mid = (lo + hi) / 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return SpeedupResult(hi, probes)
