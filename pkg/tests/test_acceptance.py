"""The nine acceptance criteria, each at its stated size and tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line to the terminal, even
under output capture.  Run ``python tests/test_acceptance.py`` for the lines
alone.
"""

import math
import sys
import time
from fractions import Fraction

import pytest

from resfed.dag_model import DagTask, TaskSet
from resfed.experiments import (
    agreement_campaign,
    condition_campaign,
    exclusive_allocation_experiment,
    gamma_grid_optimum,
    inflation_campaign,
    soundness_campaign,
    speedup_campaign,
)
from resfed.fixtures import exclusive_allocation_task_set, tight_task_set
from resfed.partitioner import federated_baseline
from resfed.reservation import budgets_for_server_count, r_min_transform, split_cumulative_budget

F = Fraction
SEED = 0


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            sys.stdout.write(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {detail}\n")
        assert ok, detail
    return emit


def _timed(fn):
    start = time.perf_counter()
    value = fn()
    return value, time.perf_counter() - start


def test_criterion_1_r_min_reference_task(report):
    def run():
        return r_min_transform(TaskSet([DagTask("ref", 10, 5, 9, 12)], 2)).systems[0]
    system, dt = _timed(run)
    ok = system.m == 2 and system.budgets == [F(15, 2), F(15, 2)] and dt < 1
    report(1, ok, f"m={system.m} E={[str(e) for e in system.budgets]} ({dt:.3f}s)")


def test_criterion_2_r_min_tight_task(report):
    def run():
        system = r_min_transform(tight_task_set()).systems[0]
        return system, split_cumulative_budget(8, 5, 7, 2, [F(6, 13), F(7, 13)])
    (system, split), dt = _timed(run)
    ok = (system.m == 2 and system.cumulative == 13 and system.budgets == [F(13, 2)] * 2
          and split == [6, 7] and dt < 1)
    report(2, ok, f"m={system.m} cumulative={system.cumulative} split={[str(x) for x in split]} ({dt:.3f}s)")


def test_criterion_3_equal_budgets(report):
    values, dt = _timed(lambda: [budgets_for_server_count(8, 5, m) for m in (2, 3, 4)])
    expected = [5 + F(3, m) for m in (2, 3, 4)]
    ok = values == expected == [F(13, 2), 6, F(23, 4)] and dt < 1
    report(3, ok, f"E(2..4)={[str(v) for v in values]} ({dt:.3f}s)")


def test_criterion_4_exclusive_allocation(report):
    def run():
        return federated_baseline(exclusive_allocation_task_set()), exclusive_allocation_experiment()
    (fed, exp), dt = _timed(run)
    ok = (not fed.feasible and fed.dedicated.get("tau1") == 10 and len(fed.unplaced) == 9
          and exp.summary["federated_feasible"] is False and dt < 1)
    report(4, ok, f"feasible={fed.feasible} tau1={fed.dedicated.get('tau1')} "
                  f"unplaced={len(fed.unplaced)} ({dt:.3f}s)")


def test_criterion_5_condition_campaign(report):
    result, dt = _timed(lambda: condition_campaign(10_000, SEED))
    s = result.summary
    ok = s["runs"] == 10_000 and s["misses"] == 0 and s["audit_failures"] == 0
    report(5, ok, f"runs={s['runs']} misses={s['misses']} audit_failures={s['audit_failures']} ({dt:.0f}s)")


def test_criterion_6_inflation_bounds(report):
    result, dt = _timed(lambda: inflation_campaign(("3/2", "2", "1+sqrt(2)", "3"), 10_000, SEED))
    parts = []
    ok = result.ok and len(result.rows) == 4
    for row in result.rows:
        ok &= row["violations"] == 0 and row["near_cprime_bound"] > 0 and row["near_e_bound"] > 0
        parts.append(f"gamma={row['gamma']}: C'/C<={float(row['max_cprime_ratio']):.4f}"
                     f"/{row['cprime_bound']:.4f} E/L<={float(row['max_e_ratio']):.4f}")
    report(6, ok, "; ".join(parts) + f" ({dt:.0f}s)")


def test_criterion_7_soundness_chain(report):
    result, dt = _timed(lambda: soundness_campaign(10_000, SEED))
    s = result.summary
    ok = len(result.rows) == 10_000 and result.ok
    # the campaign must exercise both outcomes to mean anything
    ok &= 0 < sum(r["exact"] for r in result.rows) < 10_000
    detail = " ".join(f"{k}={v}" for k, v in s.items() if k != "ok")
    report(7, ok, f"sets=10000 {detail} ({dt:.0f}s)")


def test_criterion_8_exact_vs_simulation(report):
    result, dt = _timed(lambda: agreement_campaign(1000, SEED))
    ok = len(result.rows) == 1000 and result.summary["disagreements"] == 0
    report(8, ok, f"sets=1000 disagreements={result.summary['disagreements']} ({dt:.0f}s)")


def test_criterion_9_speedup(report):
    g, value = gamma_grid_optimum(F(1, 1000), 10)
    target = 1 / (3 + 2 * math.sqrt(2))
    grid_ok = abs(float(value) - target) <= 1e-6 and abs(float(g) - (1 + math.sqrt(2))) <= 1e-3
    result, dt = _timed(lambda: speedup_campaign(1000, SEED))
    worst = result.summary["max_speed"]
    ok = grid_ok and len(result.rows) == 1000 and worst is not None and worst <= F(58285, 10000)
    report(9, ok, f"argmax={g} value={float(value):.9f} target={target:.9f} "
                  f"max s*={float(worst) if worst is not None else None:.4f} over 1000 sets ({dt:.0f}s)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
