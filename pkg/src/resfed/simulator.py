"""Discrete-event simulation of DAG jobs executed inside reservation servers.

Time is exact (``Fraction``) and advances from event to event.  Within
one DAG job, subjobs are dispatched by list scheduling over whichever of
the job's servers are in service: a server that is in service runs a
ready subjob if one is available and otherwise spins, burning budget.

Event order at one instant: subjob/job completions first, then
preemptions (``spin_end`` before ``server_preempt``), deadline misses,
releases, server starts, and finally dispatch (``spin_end`` /
``subjob_start`` before ``spin_start``).
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .dag_model import DagStructure, DagTask, _sort_key, structure_or_abstract
from .reservation import ReservationSystem, TransformedTaskSet, check_reservation_condition
from .schedulability import SequentialTask
from .timeval import INF, as_time, is_inf, time_to_json

EVENT_KINDS = (
    "server_start", "server_preempt", "subjob_start", "subjob_finish", "spin_start",
    "spin_end", "job_release", "job_finish", "deadline_miss",
)


@dataclass(frozen=True)
class Event:
    t: Fraction
    kind: str
    server: Optional[int] = None
    subjob: object = None
    task: Optional[str] = None
    job: Optional[int] = None

    def to_json(self):
        out = {"t": time_to_json(self.t), "kind": self.kind}
        for name in ("server", "subjob", "task", "job"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out

    @classmethod
    def from_json(cls, obj):
        from .timeval import time_from_json
        return cls(time_from_json(obj["t"]), obj["kind"], obj.get("server"), obj.get("subjob"),
                   obj.get("task"), obj.get("job"))


@dataclass(frozen=True)
class JobRecord:
    task: str
    job: int
    release: Fraction
    deadline: Fraction
    finish: Optional[Fraction]

    @property
    def missed(self) -> bool:
        return self.finish is None or self.finish > self.deadline

    @property
    def response(self):
        return None if self.finish is None else self.finish - self.release


@dataclass
class SimulationTrace:
    events: list = field(default_factory=list)
    jobs: list = field(default_factory=list)  # JobRecord per DAG job
    server_misses: int = 0

    @property
    def misses(self) -> int:
        return sum(j.missed for j in self.jobs)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_json()) + "\n" for e in self.events)

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def read_jsonl(cls, path) -> "SimulationTrace":
        with open(path, encoding="utf-8") as fh:
            return cls([Event.from_json(json.loads(line)) for line in fh if line.strip()])


class ListSchedulerState:
    """Progress of one DAG job under list scheduling."""

    def __init__(self, structure: DagStructure):
        self.wcet = {n.id: n.wcet for n in structure.nodes}
        self.remaining = dict(self.wcet)
        self.succs = structure.successors()
        self.preds_left = {nid: len(p) for nid, p in structure.predecessors().items()}
        self.ready = {nid for nid, k in self.preds_left.items() if k == 0}
        self.running = {}  # server index -> node id
        self.finished = set()

    @property
    def done(self) -> bool:
        return len(self.finished) == len(self.wcet)

    def dispatch(self, in_service: Sequence[int]):
        """Match in-service servers to ready subjobs.

        Returns ``(preempted, started, idle)``: servers that lost their
        subjob because they left service, ``(server, node)`` pairs newly
        started, and in-service servers left without work.
        """
        serving = set(in_service)
        preempted = [s for s in sorted(self.running) if s not in serving]
        for s in preempted:
            self.ready.add(self.running.pop(s))
        started, idle = [], []
        queue = sorted(self.ready, key=_sort_key)
        for s in sorted(serving):
            if s in self.running:
                continue
            if queue:
                nid = queue.pop(0)
                self.ready.discard(nid)
                self.running[s] = nid
                started.append((s, nid))
            else:
                idle.append(s)
        return preempted, started, idle

    def next_completion(self):
        if not self.running:
            return None
        return min(self.remaining[n] for n in self.running.values())

    def advance(self, dt: Fraction):
        """Run every assigned subjob for ``dt``; return finished ``(server, node)`` pairs."""
        finished = []
        for s, nid in sorted(self.running.items()):
            self.remaining[nid] -= dt
            if self.remaining[nid] == 0:
                finished.append((s, nid))
        for s, nid in finished:
            del self.running[s]
            self.finished.add(nid)
            for succ in self.succs[nid]:
                self.preds_left[succ] -= 1
                if self.preds_left[succ] == 0:
                    self.ready.add(succ)
        return finished


# --------------------------------------------------------------------------
# Adversarial service patterns


@dataclass(frozen=True)
class ServicePattern:
    """Per server, the disjoint ordered intervals in which it is served."""

    intervals: tuple

    def __init__(self, intervals):
        object.__setattr__(self, "intervals", tuple(
            tuple((as_time(a), as_time(b)) for a, b in server) for server in intervals))

    def problems(self, system: ReservationSystem, t0=Fraction(0)) -> list:
        issues = []
        if len(self.intervals) != system.m:
            return [f"pattern has {len(self.intervals)} servers, system has {system.m}"]
        for server, ivs in zip(system.servers, self.intervals):
            end = t0
            total = Fraction(0)
            for a, b in ivs:
                if not a < b:
                    issues.append(f"server {server.index}: empty interval [{a}, {b})")
                if a < end:
                    issues.append(f"server {server.index}: intervals overlap or are unordered at {a}")
                total += b - a
                end = b
            if ivs and ivs[-1][1] > t0 + server.D:
                issues.append(f"server {server.index}: service after the deadline {t0 + server.D}")
            if total != server.E:
                issues.append(f"server {server.index}: pattern delivers {total}, budget is {server.E}")
        return issues


def random_pattern(system: ReservationSystem, rng: np.random.Generator, t0=Fraction(0),
                   max_pieces: int = 10, resolution: int = 100) -> ServicePattern:
    """Split each budget into 1..max_pieces random pieces placed without overlap before the deadline."""
    intervals = []
    for server in system.servers:
        k = int(rng.integers(1, max_pieces + 1))
        w = [int(x) for x in rng.integers(1, resolution + 1, k)]
        g = [int(x) for x in rng.integers(0, resolution + 1, k + 1)]
        pieces = [server.E * Fraction(x, sum(w)) for x in w]
        slack = server.D - server.E
        gaps = [slack * Fraction(x, sum(g)) if sum(g) else Fraction(0) for x in g]
        t = t0
        ivs = []
        for piece, gap in zip(pieces, gaps):
            t += gap
            ivs.append((t, t + piece))
            t += piece
        intervals.append(ivs)
    return ServicePattern(intervals)


def simulate_adversarial(dag: DagTask, system: ReservationSystem, pattern: ServicePattern,
                         t0=Fraction(0)) -> SimulationTrace:
    """Run one DAG job by list scheduling over a fixed service pattern."""
    if dag.structure is None:
        raise ValueError(f"task {dag.id!r} has no explicit structure")
    t0 = as_time(t0)
    problems = pattern.problems(system, t0)
    if problems:
        raise ValueError("; ".join(problems))
    index = [s.index for s in system.servers]
    state = ListSchedulerState(dag.structure)
    deadline = t0 + dag.D
    ev = []

    def emit(t, kind, server=None, subjob=None):
        ev.append(Event(t, kind, server, subjob, dag.id, 0))

    points = sorted({t0} | {x for ivs in pattern.intervals for iv in ivs for x in iv})
    emit(t0, "job_release")
    serving, spinning = set(), set()
    finish = None
    t = t0
    while True:
        now = {index[j] for j, ivs in enumerate(pattern.intervals) if any(a <= t < b for a, b in ivs)}
        for s in sorted(serving - now):
            if s in spinning:
                spinning.discard(s)
                emit(t, "spin_end", s)
            emit(t, "server_preempt", s)
        for s in sorted(now - serving):
            emit(t, "server_start", s)
        serving = now
        _, started, idle = state.dispatch(sorted(serving))
        for s, nid in started:
            if s in spinning:
                spinning.discard(s)
                emit(t, "spin_end", s)
            emit(t, "subjob_start", s, nid)
        for s in idle:
            if s not in spinning:
                spinning.add(s)
                emit(t, "spin_start", s)
        later = [p for p in points if p > t]
        candidates = later[:1]
        nxt = state.next_completion()
        if nxt is not None:
            candidates.append(t + nxt)
        if not candidates:
            break
        t_next = min(candidates)
        for s, nid in state.advance(t_next - t):
            emit(t_next, "subjob_finish", s, nid)
        if finish is None and state.done:
            finish = t_next
            emit(t_next, "job_finish")
        t = t_next
    if finish is None or finish > deadline:
        ev.append(Event(deadline if finish is None else finish, "deadline_miss", None, None, dag.id, 0))
        if finish is None:
            ev.sort(key=lambda e: e.t)
    return SimulationTrace(ev, [JobRecord(dag.id, 0, t0, deadline, finish)])


def find_counterexample(dag: DagTask, system: ReservationSystem, tries: int = 1000, seed: int = 0,
                        max_pieces: int = 10):
    """Randomized adversary: look for a service pattern under which the job misses.

    Returns ``(pattern, trace)`` for the first miss, or ``None``.
    """
    rng = np.random.default_rng(seed)
    # all servers served back to back from the release
    first = ServicePattern([[(Fraction(0), s.E)] for s in system.servers])
    trace = simulate_adversarial(dag, system, first)
    if trace.misses:
        return first, trace
    for _ in range(tries):
        pattern = random_pattern(system, rng, max_pieces=int(rng.integers(1, max_pieces + 1)),
                                 resolution=int(rng.choice([2, 4, 10, 100])))
        trace = simulate_adversarial(dag, system, pattern)
        if trace.misses:
            return pattern, trace
    return None


# --------------------------------------------------------------------------
# Partitioned scheduling of all servers


@dataclass(eq=False)
class _ServerJob:
    server: SequentialTask
    job: int
    release: Fraction
    deadline: Fraction
    remaining: Fraction
    missed: bool = False

    @property
    def key(self):
        return (self.server.task_id, self.server.index, self.job)


def _release_times(task: DagTask, horizon: Fraction, arrival: str, rng) -> list:
    if is_inf(task.T):
        return [Fraction(0)]
    times, t = [], Fraction(0)
    while t < horizon:
        times.append(t)
        step = task.T
        if arrival == "sporadic":
            step += task.T * Fraction(int(rng.integers(0, 51)), 100)
        t += step
    return times


def simulate_partitioned(ts: TransformedTaskSet, partition, policy: str = "dm", horizon=None,
                         arrival: str = "synchronous", seed: int = 0) -> SimulationTrace:
    """Preemptive DM or EDF on every processor of a partition.

    DAG jobs are released in ``[0, horizon)``; simulation continues until
    every released server job has consumed its budget.  Each DAG job is
    served only by the server jobs released with it.
    """
    if policy not in ("dm", "edf"):
        raise ValueError(f"unknown policy {policy!r}")
    if arrival not in ("synchronous", "sporadic"):
        raise ValueError(f"unknown arrival model {arrival!r}")
    horizon = as_time(horizon if horizon is not None else 0)
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    if horizon == 0 or not ts.systems:
        return SimulationTrace()
    if partition.unassigned:
        raise ValueError("partition is infeasible: some servers are unassigned")
    known = {(s.task_id, s.index) for s in ts.servers}
    where = {}
    for p, servers in enumerate(partition.processors):
        for s in servers:
            if (s.task_id, s.index) not in known:
                raise ValueError(f"partition references unknown server {s.task_id}#{s.index}")
            where[(s.task_id, s.index)] = p
    missing = known - set(where)
    if missing:
        raise ValueError(f"servers not in the partition: {sorted(missing)}")

    rng = np.random.default_rng(seed)
    origin = {t.id: t for t in ts.origin}
    structures = {sid: structure_or_abstract(origin[sid]) for sid in (s.dag_task_id for s in ts.systems)}
    releases = []
    for sys in ts.systems:
        for k, r in enumerate(_release_times(origin[sys.dag_task_id], horizon, arrival, rng)):
            releases.append((r, sys.dag_task_id, k))
    releases.sort(key=lambda x: (x[0], x[1], x[2]))
    releases = deque(releases)
    systems = {sys.dag_task_id: sys for sys in ts.systems}

    queues = {key: deque() for key in where}
    dag_jobs = {}  # (task, job) -> ListSchedulerState
    records = {}
    open_deadlines = set()  # ("dag", task, job) or ("srv", key)
    ev = []
    running = {}  # processor -> _ServerJob
    spinning = set()  # server job keys
    server_misses = 0

    def key_of(sj: _ServerJob):
        if policy == "dm":
            return (sj.server.D, sj.server.task_id, sj.server.index, sj.release)
        return (sj.deadline, sj.server.task_id, sj.server.index, sj.release)

    t = Fraction(0)
    while True:
        # deadline checks at t (completions at t were handled before)
        for item in sorted(open_deadlines, key=str):
            if item[0] == "dag":
                _, tid, k = item
                rec = records[(tid, k)]
                if rec["deadline"] == t:
                    open_deadlines.discard(item)
                    if rec["finish"] is None:
                        ev.append(Event(t, "deadline_miss", None, None, tid, k))
            else:
                sj = item[1]
                if sj.deadline == t:
                    open_deadlines.discard(item)
                    if sj.remaining > 0:
                        sj.missed = True
                        server_misses += 1
                        ev.append(Event(t, "deadline_miss", sj.server.index, None, sj.server.task_id, sj.job))
        while releases and releases[0][0] == t:
            _, tid, k = releases.popleft()
            task = origin[tid]
            dag_jobs[(tid, k)] = ListSchedulerState(structures[tid])
            records[(tid, k)] = {"release": t, "deadline": t + task.D, "finish": None}
            open_deadlines.add(("dag", tid, k))
            ev.append(Event(t, "job_release", None, None, tid, k))
            for srv in systems[tid].servers:
                sj = _ServerJob(srv, k, t, t + srv.D, srv.E)
                queues[(tid, srv.index)].append(sj)
                open_deadlines.add(("srv", sj))

        chosen = {}
        for p in range(len(partition.processors)):
            heads = [q[0] for key, q in queues.items() if q and where[key] == p]
            if heads:
                chosen[p] = min(heads, key=key_of)
        for p, sj in sorted(running.items()):
            if chosen.get(p) is not sj:
                if sj.key in spinning:
                    spinning.discard(sj.key)
                    ev.append(Event(t, "spin_end", sj.server.index, None, sj.server.task_id, sj.job))
                if sj.remaining > 0:
                    ev.append(Event(t, "server_preempt", sj.server.index, None, sj.server.task_id, sj.job))
        for p, sj in sorted(chosen.items()):
            if running.get(p) is not sj:
                ev.append(Event(t, "server_start", sj.server.index, None, sj.server.task_id, sj.job))
        running = chosen

        by_job = {}
        for sj in running.values():
            by_job.setdefault((sj.server.task_id, sj.job), []).append(sj)
        for job_key, state in dag_jobs.items():
            sjs = by_job.get(job_key, [])
            _, started, idle = state.dispatch([sj.server.index for sj in sjs])
            tid, k = job_key
            for s, nid in started:
                if (tid, s, k) in spinning:
                    spinning.discard((tid, s, k))
                    ev.append(Event(t, "spin_end", s, None, tid, k))
                ev.append(Event(t, "subjob_start", s, nid, tid, k))
            for s in idle:
                if (tid, s, k) not in spinning:
                    spinning.add((tid, s, k))
                    ev.append(Event(t, "spin_start", s, None, tid, k))

        candidates = []
        if releases:
            candidates.append(releases[0][0])
        for sj in running.values():
            candidates.append(t + sj.remaining)
        for state in dag_jobs.values():
            nxt = state.next_completion()
            if nxt is not None:
                candidates.append(t + nxt)
        for item in open_deadlines:
            d = records[(item[1], item[2])]["deadline"] if item[0] == "dag" else item[1].deadline
            if d > t:
                candidates.append(d)
        if not candidates:
            break
        t_next = min(candidates)
        dt = t_next - t
        for sj in running.values():
            sj.remaining -= dt
        for job_key, state in list(dag_jobs.items()):
            tid, k = job_key
            for s, nid in state.advance(dt):
                ev.append(Event(t_next, "subjob_finish", s, nid, tid, k))
            if state.done and records[job_key]["finish"] is None:
                records[job_key]["finish"] = t_next
                ev.append(Event(t_next, "job_finish", None, None, tid, k))
        for p, sj in sorted(running.items()):
            if sj.remaining == 0:
                if sj.key in spinning:
                    spinning.discard(sj.key)
                    ev.append(Event(t_next, "spin_end", sj.server.index, None, sj.server.task_id, sj.job))
                ev.append(Event(t_next, "server_preempt", sj.server.index, None, sj.server.task_id, sj.job))
                queues[(sj.server.task_id, sj.server.index)].popleft()
        # a finished DAG job whose servers are all exhausted needs no more bookkeeping
        for job_key in [jk for jk, st in dag_jobs.items() if st.done]:
            tid, k = job_key
            if not any(sj.job == k for q in (queues[(tid, s.index)] for s in systems[tid].servers) for sj in q):
                del dag_jobs[job_key]
        t = t_next

    jobs = [JobRecord(tid, k, r["release"], r["deadline"], r["finish"])
            for (tid, k), r in sorted(records.items(), key=lambda x: (x[1]["release"], x[0]))]
    return SimulationTrace(ev, jobs, server_misses)


# --------------------------------------------------------------------------
# Uniprocessor fixed-priority reference simulation


@dataclass(frozen=True)
class FpSimResult:
    schedulable: bool
    wcrt: Optional[Fraction]  # None when a job missed its deadline
    responses: tuple


def simulate_fp_busy_window(task: SequentialTask, higher: Sequence[SequentialTask],
                            max_jobs: int = 10**5) -> FpSimResult:
    """Synchronous periodic release of ``higher`` (in priority order) and ``task``.

    Simulates the level-``task`` busy window and records the response time
    of every job of ``task`` in it.  Stops at the first deadline miss,
    detected when the oldest pending job of ``task`` passes its deadline.
    """
    tasks = list(higher) + [task]
    k = len(tasks) - 1
    next_release = [Fraction(0)] * len(tasks)
    pending = [deque() for _ in tasks]
    responses = []
    t = Fraction(0)
    while True:
        if t > 0 and not any(pending):
            # idle instant: the busy window closes before the releases at t
            return FpSimResult(True, max(responses), tuple(responses))
        for i, x in enumerate(tasks):
            if next_release[i] is not INF and next_release[i] == t:
                pending[i].append([t, x.E])
                next_release[i] = INF if is_inf(x.T) else t + x.T
        active = next((i for i in range(len(tasks)) if pending[i]), None)
        job = pending[active][0]
        candidates = [r for r in next_release if r is not INF] + [t + job[1]]
        if pending[k]:
            limit = pending[k][0][0] + task.D
            if limit <= t:
                return FpSimResult(False, None, tuple(responses))
            candidates.append(limit)
        t_next = min(candidates)
        job[1] -= t_next - t
        t = t_next
        if job[1] == 0:
            pending[active].popleft()
            if active == k:
                responses.append(t - job[0])
                if len(responses) >= max_jobs:
                    raise RuntimeError(f"busy window exceeds {max_jobs} jobs")


# --------------------------------------------------------------------------
# Trace audit


@dataclass(frozen=True)
class Violation:
    t: Fraction
    kind: str
    detail: str


@dataclass
class AuditReport:
    violations: list = field(default_factory=list)
    finish: Optional[Fraction] = None
    missed: bool = False

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def earliest(self) -> Optional[Violation]:
        return min(self.violations, key=lambda v: v.t) if self.violations else None

    def to_json(self):
        return {
            "ok": self.ok,
            "missed": self.missed,
            "finish": None if self.finish is None else time_to_json(self.finish),
            "violations": [{"t": time_to_json(v.t), "kind": v.kind, "detail": v.detail} for v in self.violations],
        }


def audit_trace(trace: SimulationTrace, dag: DagTask, system: ReservationSystem,
                job: Optional[int] = None, require_full_budget: bool = True) -> AuditReport:
    """Check one DAG job's part of a trace from the events alone.

    Verifies event ordering, precedence, one subjob per in-service server
    and one server per subjob, work conservation (no spinning while a
    ready subjob waits), per-subjob execution equal to its wcet,
    per-server budget accounting and, when every server got its full
    budget before the deadline and the reservation condition holds, that
    the job met its deadline.
    """
    structure = structure_or_abstract(dag)
    wcet = {n.id: n.wcet for n in structure.nodes}
    preds = structure.predecessors()
    succs = structure.successors()
    events = [e for e in trace.events if e.task == dag.id and (job is None or e.job == job)]
    if job is None:
        jobs = {e.job for e in events}
        if len(jobs) > 1:
            raise ValueError(f"trace holds several jobs of {dag.id!r}; pass job=")
    report = AuditReport()
    bad = report.violations
    if not events:
        bad.append(Violation(Fraction(0), "empty", f"no events for task {dag.id!r}"))
        return report
    budgets = {s.index: s.E for s in system.servers}

    t0 = None
    serving, spinning = set(), set()
    executing = {}  # server -> node
    finished = {}
    preds_left = {n: len(p) for n, p in preds.items()}
    available = {n for n, c in preds_left.items() if c == 0}
    executed = {n: Fraction(0) for n in wcet}
    service = {s: Fraction(0) for s in budgets}
    busy = {s: Fraction(0) for s in budgets}
    miss_event = False

    prev_t = events[0].t
    i = 0
    while i < len(events):
        t = events[i].t
        if t < prev_t:
            bad.append(Violation(t, "ordering", f"event time {t} after {prev_t}"))
        prev_t = t
        while i < len(events) and events[i].t == t:
            e = events[i]
            i += 1
            s = e.server
            if e.kind == "job_release":
                t0 = t
            elif e.kind == "server_start":
                if s not in budgets:
                    bad.append(Violation(t, "unknown_server", f"server {s}"))
                    continue
                if s in serving:
                    bad.append(Violation(t, "double_start", f"server {s} already in service"))
                serving.add(s)
            elif e.kind == "server_preempt":
                serving.discard(s)
                executing.pop(s, None)
                spinning.discard(s)
            elif e.kind == "subjob_start":
                x = e.subjob
                if s not in serving:
                    bad.append(Violation(t, "dispatch_outside_service", f"subjob {x} on idle server {s}"))
                if s in executing or s in spinning:
                    bad.append(Violation(t, "server_overlap", f"server {s} already busy"))
                if x in executing.values():
                    bad.append(Violation(t, "subjob_overlap", f"subjob {x} runs on two servers"))
                if x in finished:
                    bad.append(Violation(t, "restart", f"subjob {x} already finished"))
                elif preds_left.get(x, 1) != 0:
                    bad.append(Violation(t, "precedence", f"subjob {x} started before its predecessors finished"))
                executing[s] = x
            elif e.kind == "subjob_finish":
                x = e.subjob
                if executing.get(s) != x:
                    bad.append(Violation(t, "finish_mismatch", f"subjob {x} was not running on server {s}"))
                executing.pop(s, None)
                if executed.get(x) != wcet.get(x):
                    bad.append(Violation(t, "execution_time", f"subjob {x} ran {executed.get(x)}, wcet {wcet.get(x)}"))
                finished[x] = t
                available.discard(x)
                for y in succs.get(x, []):
                    preds_left[y] -= 1
                    if preds_left[y] == 0:
                        available.add(y)
            elif e.kind == "spin_start":
                if s not in serving or s in executing or s in spinning:
                    bad.append(Violation(t, "bad_spin", f"server {s} cannot spin here"))
                spinning.add(s)
            elif e.kind == "spin_end":
                spinning.discard(s)
            elif e.kind == "job_finish":
                report.finish = t
                if len(finished) != len(wcet):
                    bad.append(Violation(t, "early_finish", "job_finish before all subjobs finished"))
            elif e.kind == "deadline_miss":
                if s is None:
                    miss_event = True
            else:
                bad.append(Violation(t, "unknown_event", e.kind))
        if i >= len(events):
            break
        t_next = events[i].t
        if t_next == t:
            continue
        dt = t_next - t
        for s in serving:
            if (s in executing) == (s in spinning):
                bad.append(Violation(t, "idle_in_service", f"server {s} neither runs a subjob nor spins"))
        for s in set(executing) | spinning:
            if s not in serving:
                bad.append(Violation(t, "work_outside_service", f"server {s}"))
        if spinning:
            waiting = available - set(executing.values())
            if waiting:
                bad.append(Violation(t, "work_conservation",
                                     f"servers {sorted(spinning)} spin while {sorted(waiting, key=_sort_key)} are ready"))
        if t0 is not None and serving and (t < t0 or t_next > t0 + dag.D):
            bad.append(Violation(t, "service_window", f"service outside [{t0}, {t0 + dag.D})"))
        for s in serving:
            service[s] += dt
        for s, x in executing.items():
            executed[x] += dt
            busy[s] += dt
        for s in spinning:
            busy[s] += dt
    t_end = events[-1].t
    if serving:
        bad.append(Violation(t_end, "unterminated", f"servers {sorted(serving)} still in service at trace end"))
    for s, E in budgets.items():
        if busy[s] != service[s]:
            bad.append(Violation(t_end, "accounting", f"server {s}: executed+spun {busy[s]} != service {service[s]}"))
        if service[s] > E or (require_full_budget and service[s] != E):
            bad.append(Violation(t_end, "budget", f"server {s}: service {service[s]} vs budget {E}"))
    if t0 is None:
        bad.append(Violation(events[0].t, "no_release", "trace has no job_release"))
        return report
    deadline = t0 + dag.D
    report.missed = report.finish is None or report.finish > deadline
    if report.missed != miss_event:
        bad.append(Violation(deadline, "miss_flag", "deadline_miss event disagrees with the finish time"))
    full = all(service[s] == E for s, E in budgets.items())
    if full and check_reservation_condition(dag.C, dag.L, list(budgets.values())).holds and report.missed:
        bad.append(Violation(deadline, "guarantee",
                             "servers delivered their budgets and the reservation condition holds, "
                             "yet the job missed its deadline"))
    return report
