import json
from fractions import Fraction

import numpy as np
import pytest

from resfed.dag_model import DagStructure, DagTask, TaskSet
from resfed.fixtures import reference_task, reference_task_set, spin_trap_task
from resfed.partitioner import dm_first_fit, edf_first_fit
from resfed.reservation import HEAVY, make_system, r_min_transform
from resfed.schedulability import dm_processor_verdicts
from resfed.simulator import (
    Event,
    ListSchedulerState,
    ServicePattern,
    SimulationTrace,
    audit_trace,
    find_counterexample,
    random_pattern,
    simulate_adversarial,
    simulate_partitioned,
)

F = Fraction


def reference_system():
    return r_min_transform(reference_task_set()).systems[0]


def test_list_scheduler_dispatch_order():
    st = ListSchedulerState(DagStructure([(0, 1), (1, 2), (2, 3)], [(0, 2)]))
    _, started, idle = st.dispatch([2, 1])
    assert started == [(1, 0), (2, 1)] and idle == []
    finished = st.advance(F(1))
    assert finished == [(1, 0)]
    assert st.ready == {2}
    preempted, started, idle = st.dispatch([1])  # server 2 leaves service
    assert preempted == [2] and started == [(1, 1)] and idle == []


@pytest.mark.parametrize("seed", range(5))
def test_reference_random_patterns_meet_the_deadline(seed):
    dag, system = reference_task(), reference_system()
    rng = np.random.default_rng(seed)
    for _ in range(100):
        pattern = random_pattern(system, rng)
        trace = simulate_adversarial(dag, system, pattern)
        report = audit_trace(trace, dag, system)
        assert report.ok, report.violations
        assert report.finish <= 9 and trace.misses == 0


def test_contiguous_service_spins():
    dag, system = reference_task(), reference_system()
    pattern = ServicePattern([[(0, F(15, 2))], [(0, F(15, 2))]])
    trace = simulate_adversarial(dag, system, pattern)
    kinds = [e.kind for e in trace.events]
    assert "spin_start" in kinds  # only node 0 is ready at the release
    # hand schedule: 0 on [0,1), 1 on [1,4), 2 on [1,3), 3 on [3,5), 4 on [4,5), 5 on [5,6)
    assert trace.jobs[0].finish == 6
    assert audit_trace(trace, dag, system).ok


def test_single_node_contiguous():
    dag = DagTask.from_structure("one", DagStructure([(0, 4)]), D=10, T=10)
    system = make_system(dag, [4], "light")
    trace = simulate_adversarial(dag, system, ServicePattern([[(3, 7)]]))
    assert trace.jobs[0].finish == 7


def test_adversarial_preconditions():
    system = reference_system()
    with pytest.raises(ValueError, match="structure"):
        simulate_adversarial(DagTask("abs", 10, 5, 9, 12), system, ServicePattern([[(0, F(15, 2))]] * 2))
    with pytest.raises(ValueError, match="servers"):
        simulate_adversarial(reference_task(), system, ServicePattern([[(0, F(15, 2))]]))
    with pytest.raises(ValueError, match="overlap"):
        simulate_adversarial(reference_task(), system,
                             ServicePattern([[(0, 4), (3, F(13, 2))], [(0, F(15, 2))]]))
    with pytest.raises(ValueError, match="budget"):
        simulate_adversarial(reference_task(), system, ServicePattern([[(0, 7)], [(0, F(15, 2))]]))
    with pytest.raises(ValueError, match="deadline"):
        simulate_adversarial(reference_task(), system, ServicePattern([[(2, F(19, 2))], [(0, F(15, 2))]]))


def test_under_budget_system_can_miss():
    dag = spin_trap_task()
    system = make_system(dag, [7, 7], HEAVY)
    assert not system.condition().holds  # 14 < 15
    found = find_counterexample(dag, system, tries=200, seed=1)
    assert found is not None
    pattern, trace = found
    assert trace.misses == 1
    report = audit_trace(trace, dag, system)
    assert report.ok and report.missed  # a legal schedule, just too little budget


def test_trap_is_safe_with_enough_budget():
    dag = spin_trap_task()
    system = make_system(dag, [F(15, 2), F(15, 2)], HEAVY)
    assert find_counterexample(dag, system, tries=300, seed=2) is None


def test_reference_partitioned_two_periods():
    tr = r_min_transform(reference_task_set())
    part = dm_first_fit(tr.servers, 2)
    trace = simulate_partitioned(tr, part, "dm", horizon=24)
    assert len(trace.jobs) == 2 and trace.misses == 0
    for job in trace.jobs:
        assert job.finish <= job.release + 9
        assert audit_trace(trace, reference_task(), tr.systems[0], job=job.job).ok


def test_light_task_finish_equals_wcrt():
    ts = TaskSet([DagTask("hi", 2, 1, 4, 4), DagTask("lo", 3, 2, 9, 8)], 1)
    tr = r_min_transform(ts)
    part = dm_first_fit(tr.servers, 1)
    trace = simulate_partitioned(tr, part, "dm", horizon=8)
    lo = [j for j in trace.jobs if j.task == "lo"][0]
    verdict = dm_processor_verdicts(part.processors[0], "exact")[1]
    assert lo.response == verdict.wcrt == 7


def test_empty_and_invalid_inputs():
    tr = r_min_transform(reference_task_set())
    part = dm_first_fit(tr.servers, 2)
    assert simulate_partitioned(tr, part, "dm", horizon=0).events == []
    empty = r_min_transform(TaskSet([], 1))
    assert simulate_partitioned(empty, dm_first_fit([], 1), horizon=10).events == []
    with pytest.raises(ValueError):
        simulate_partitioned(tr, part, "dm", horizon=-1)
    with pytest.raises(ValueError):
        simulate_partitioned(tr, part, "fifo", horizon=10)
    other = r_min_transform(TaskSet([DagTask("x", 10, 5, 9, 12)], 2))
    with pytest.raises(ValueError, match="unknown server"):
        simulate_partitioned(other, part, horizon=10)
    lone = dm_first_fit(tr.servers, 1)
    with pytest.raises(ValueError, match="infeasible"):
        simulate_partitioned(tr, lone, horizon=10)


@pytest.mark.parametrize("policy", ["dm", "edf"])
def test_sporadic_runs_are_clean_and_deterministic(policy):
    ts = TaskSet([reference_task(), DagTask("b", 3, 1, 6, 8), DagTask("c", 12, 3, 10, 20)], 5)
    tr = r_min_transform(ts)
    part = dm_first_fit(tr.servers, 5) if policy == "dm" else edf_first_fit(tr.servers, 5)
    assert part.feasible
    a = simulate_partitioned(tr, part, policy, horizon=60, arrival="sporadic", seed=5)
    b = simulate_partitioned(tr, part, policy, horizon=60, arrival="sporadic", seed=5)
    assert a.to_jsonl() == b.to_jsonl()
    assert a.misses == 0 and a.server_misses == 0
    origin = {t.id: t for t in ts}
    for job in a.jobs:
        assert audit_trace(a, origin[job.task], tr.system(job.task), job=job.job,
                           require_full_budget=False).ok


def test_trace_jsonl(tmp_path):
    dag, system = reference_task(), reference_system()
    trace = simulate_adversarial(dag, system, ServicePattern([[(0, F(15, 2))], [(1, F(17, 2))]]))
    lines = trace.to_jsonl().splitlines()
    first = json.loads(lines[0])
    assert first["t"] == {"num": 0, "den": 1} and first["kind"] == "job_release"
    starts = [json.loads(x) for x in lines if '"subjob_start"' in x]
    assert {"t", "kind", "server", "subjob"} <= set(starts[0])
    path = tmp_path / "trace.jsonl"
    trace.write_jsonl(path)
    assert SimulationTrace.read_jsonl(path).events == trace.events
    times = [e.t for e in trace.events]
    assert times == sorted(times)


def _hand_trace(events):
    return SimulationTrace([Event(F(t), k, s, x, "ref", 0) for t, k, s, x in events])


def test_audit_flags_spinning_with_ready_work():
    dag, system = reference_task(), make_system(reference_task(), [F(15, 2), F(15, 2)])
    ev = [(0, "job_release", None, None), (0, "server_start", 1, None), (0, "server_start", 2, None),
          (0, "subjob_start", 1, 0), (0, "spin_start", 2, None), (1, "subjob_finish", 1, 0),
          # nodes 1, 2 and 3 are ready but server 2 keeps spinning
          (1, "subjob_start", 1, 1), (2, "spin_end", 2, None), (2, "subjob_start", 2, 2)]
    report = audit_trace(_hand_trace(ev), dag, system)
    assert not report.ok
    assert report.earliest.kind == "work_conservation" and report.earliest.t == 1


def test_audit_flags_precedence_and_accounting():
    dag, system = reference_task(), make_system(reference_task(), [F(15, 2), F(15, 2)])
    ev = [(0, "job_release", None, None), (0, "server_start", 1, None), (0, "subjob_start", 1, 5),
          (1, "subjob_finish", 1, 5), (1, "server_preempt", 1, None)]
    kinds = {v.kind for v in audit_trace(_hand_trace(ev), dag, system).violations}
    assert "precedence" in kinds and "budget" in kinds and "miss_flag" in kinds


def test_audit_flags_guarantee_violation():
    # a trace claiming full budgets and a legal schedule but a late finish
    dag = DagTask.from_structure("ref", DagStructure([(0, 2)]), D=3, T=3)
    system = make_system(dag, [2], "light")
    ev = [(0, "job_release", None, None), (0, "server_start", 1, None), (0, "subjob_start", 1, 0),
          (2, "subjob_finish", 1, 0), (2, "job_finish", None, None), (2, "spin_start", 1, None),
          (2, "server_preempt", 1, None)]
    assert audit_trace(_hand_trace(ev), dag, system).ok
    late = DagTask.from_structure("ref", DagStructure([(0, 2)]), D=F(3, 2), T=3)
    kinds = {v.kind for v in audit_trace(_hand_trace(ev), late, system).violations}
    assert "service_window" in kinds or "guarantee" in kinds
