"""Shave budget below the reservation condition and find a service pattern that breaks it.

Run: python demos/under_budget.py
"""

from fractions import Fraction

from resfed.fixtures import spin_trap_task
from resfed.reservation import HEAVY, make_system
from resfed.simulator import find_counterexample


def main():
    dag = spin_trap_task()
    for budget in (Fraction(15, 2), Fraction(7)):
        system = make_system(dag, [budget, budget], HEAVY)
        cond = system.condition()
        found = find_counterexample(dag, system, tries=500, seed=0)
        print(f"budgets 2 x {budget}: condition slack {cond.slack}, "
              f"{'miss found' if found else 'no miss in 500 patterns'}")
        if found:
            pattern, trace = found
            for i, ivs in enumerate(pattern.intervals, 1):
                print(f"  server {i}: " + " ".join(f"[{a}, {b})" for a, b in ivs))
            job = trace.jobs[0]
            finish = "never (budget ran out)" if job.finish is None else job.finish
            print(f"  job finishes: {finish}, deadline {job.deadline}")


if __name__ == "__main__":
    main()
