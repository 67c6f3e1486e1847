from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resfed.schedulability import (
    UNBOUNDED,
    AnalysisLimitExceeded,
    SequentialTask,
    bini_bound,
    busy_window_wcrt,
    combined_test,
    dbf,
    dm_interferers,
    dm_processor_verdicts,
    edf_demand_test,
    fbb_test,
    fp_test,
)
from resfed.simulator import simulate_fp_busy_window
from resfed.timeval import INF

F = Fraction


def S(E, D, T, name="t", index=0):
    return SequentialTask(F(E), F(D), T if T is INF else F(T), name, index)


def test_lone_task():
    v = busy_window_wcrt(S(2, 3, 4), [])
    assert v.schedulable and v.wcrt == 2


def test_multi_job_busy_window_matches_simulation():
    hi, lo = S(2, 4, 4, "hi"), S(3, 8, 4, "lo")
    v = busy_window_wcrt(lo, [hi])
    sim = simulate_fp_busy_window(lo, [hi])
    assert v.schedulable == sim.schedulable
    # U = 1.25: the window never closes, the third job misses
    assert not v.schedulable and v.wcrt == UNBOUNDED
    assert v.witness[0] >= 2


def test_arbitrary_deadline_window_spans_jobs():
    # hand-checked: finishes at 6, 12, 14 give responses 6, 7, 4; 14 <= 3 * 5 closes the window
    hi, lo = S(4, 7, 7, "hi"), S(2, 8, 5, "lo")
    v = busy_window_wcrt(lo, [hi])
    assert v.schedulable and v.wcrt == 7
    assert simulate_fp_busy_window(lo, [hi]).responses == (6, 7, 4)
    tight = S(2, 6, 5, "lo")
    v = busy_window_wcrt(tight, [hi])
    assert not v.schedulable and v.witness == (2, 12)


def test_deadline_shorter_than_work():
    v = busy_window_wcrt(S(5, 3, 10), [])
    assert not v.schedulable and v.witness == (1, 5)


def test_saturated_interferers():
    v = busy_window_wcrt(S(1, 10, 10), [S(2, 2, 2, "h")])
    assert not v.schedulable and v.wcrt == UNBOUNDED


def test_infinite_period_one_job():
    v = busy_window_wcrt(S(3, 10, INF), [S(2, 4, 4, "h")])
    # t = 3 + 2 ceil(t/4): 5 -> 7 -> 7
    assert v.schedulable and v.wcrt == 7


def test_iteration_cap_is_reported():
    # U = 1: the level-lo window lasts the hyperperiod, three jobs of lo
    hi, lo = S(3, 6, 6, "hi"), S(1, 40, 2, "lo")
    assert busy_window_wcrt(lo, [hi]).wcrt == 4
    with pytest.raises(AnalysisLimitExceeded):
        busy_window_wcrt(lo, [hi], max_jobs=2)


def test_fbb_examples():
    assert fbb_test(S(7, 7, 7), []).schedulable
    assert not fbb_test(S(8, 7, 7), []).schedulable
    a, b = S(F(13, 2), 7, 7, "tight", 1), S(F(13, 2), 7, 7, "tight", 2)
    v = fbb_test(b, [a])
    assert not v.schedulable and "39/2" in v.detail  # 6.5 + 2 * 6.5


def test_bini_examples():
    assert bini_bound(S(3, 9, 9), []) == 3
    k, i = S(1, 10, 10, "k"), S(2, 4, 4, "i")
    assert bini_bound(k, [i]) == 4
    assert bini_bound(k, [i]) >= busy_window_wcrt(k, [i]).wcrt
    with pytest.raises(ValueError, match="undefined"):
        bini_bound(k, [S(4, 4, 4)])


def test_combined_empty():
    assert combined_test(S(7, 7, 7), []).schedulable
    assert not combined_test(S(7, 6, 7), []).schedulable
    assert not combined_test(S(7, 8, 6), []).schedulable


def test_dm_tie_break():
    a, b, c = S(1, 5, 9, "b", 1), S(1, 5, 9, "a", 2), S(1, 5, 9, "a", 1)
    order = sorted([a, b, c], key=SequentialTask.dm_key)
    assert [(t.task_id, t.index) for t in order] == [("a", 1), ("a", 2), ("b", 1)]
    assert dm_interferers(a, [a, b, c]) == [b, c]


def test_processor_verdicts_and_fp_test():
    vs = dm_processor_verdicts([S(2, 4, 4, "a"), S(1, 8, 8, "b")], "exact")
    assert all(vs) and vs[1].wcrt == 3
    with pytest.raises(ValueError):
        fp_test("rta")


def tasksets(max_n=4):
    task = st.builds(
        lambda e, t, d: SequentialTask(F(e, 10) * t / 10, F(d, 10) * t, F(t)),
        st.integers(1, 9), st.integers(1, 30), st.integers(3, 20),
    )
    return st.lists(task, min_size=1, max_size=max_n)


def _with_names(tasks):
    return sorted((SequentialTask(t.E, t.D, t.T, f"s{i}") for i, t in enumerate(tasks)),
                  key=SequentialTask.dm_key)


@settings(max_examples=300, deadline=None)
@given(tasksets())
def test_soundness_chain(raw):
    tasks = _with_names(raw)
    for k, task in enumerate(tasks):
        hp = tasks[:k]
        exact = busy_window_wcrt(task, hp)
        if fbb_test(task, hp).schedulable:
            assert exact.schedulable
            assert combined_test(task, hp).schedulable
        if combined_test(task, hp).schedulable:
            assert exact.schedulable
        if exact.schedulable:
            assert exact.wcrt >= task.E
            assert bini_bound(task, hp) >= exact.wcrt


@settings(max_examples=200, deadline=None)
@given(tasksets())
def test_exact_matches_simulation(raw):
    tasks = _with_names(raw)
    for k, task in enumerate(tasks):
        v = busy_window_wcrt(task, tasks[:k])
        sim = simulate_fp_busy_window(task, tasks[:k])
        assert v.schedulable == sim.schedulable
        if v.schedulable:
            assert v.wcrt == sim.wcrt


def test_dbf():
    t = S(2, 5, 4)
    assert [dbf(t, F(x)) for x in (4, 5, 8, 9, 13)] == [0, 2, 2, 4, 6]
    assert dbf(S(2, 5, INF), F(100)) == 2


def edf_brute_force(tasks, horizon):
    """Oracle: check dbf at every integer point up to ``horizon``."""
    return all(sum(dbf(t, F(x)) for t in tasks) <= x for x in range(1, horizon + 1))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 6), st.integers(1, 12), st.integers(1, 12)), min_size=1, max_size=4))
def test_edf_against_brute_force(raw):
    tasks = [S(e, d, t) for e, d, t in raw]
    if sum(t.U for t in tasks) > 1:
        assert not edf_demand_test(tasks).schedulable
        return
    # integer parameters: the hyperperiod plus the largest deadline covers every testing point
    hyper = int(np.lcm.reduce([int(t.T) for t in tasks]))
    horizon = hyper + max(int(t.D) for t in tasks)
    assert edf_demand_test(tasks).schedulable == edf_brute_force(tasks, horizon)


@settings(max_examples=200, deadline=None)
@given(tasksets())
def test_edf_dominates_dm(raw):
    tasks = _with_names(raw)
    if all(dm_processor_verdicts(tasks, "exact")):
        assert edf_demand_test(tasks).schedulable


def test_edf_examples():
    assert edf_demand_test([]).schedulable
    two = [S(F(13, 2), 7, 7, "a"), S(F(13, 2), 7, 7, "b")]
    assert not edf_demand_test(two).schedulable
    assert edf_demand_test([S(1, 2, 2), S(2, 4, 4)]).schedulable  # U = 1 exactly
