"""Walk one parallel task from DAG to servers to processors to a trace.

Run: python demos/reservation_walkthrough.py
"""

from resfed import audit_trace, dm_first_fit, r_min_transform, simulate_partitioned
from resfed.fixtures import reference_task_set


def main():
    ts = reference_task_set()
    task = ts.task("ref")
    print(f"task C={task.C} L={task.L} D={task.D} T={task.T} on M={ts.processors}")

    transformed = r_min_transform(ts)
    system = transformed.system("ref")
    cond = system.condition()
    print(f"R-MIN: {system.m} servers, budgets {[str(e) for e in system.budgets]}, slack {cond.slack}")

    part = dm_first_fit(transformed.servers, ts.processors)
    for i, servers in enumerate(part.processors):
        print(f"  P{i}: " + ", ".join(f"{s.task_id}#{s.index} E={s.E}" for s in servers))

    trace = simulate_partitioned(transformed, part, "dm", horizon=2 * task.T)
    for job in trace.jobs:
        report = audit_trace(trace, task, system, job=job.job, require_full_budget=False)
        print(f"  job {job.job}: released {job.release}, finished {job.finish}, "
              f"deadline {job.deadline}, audit {'ok' if report.ok else report.earliest}")


if __name__ == "__main__":
    main()
