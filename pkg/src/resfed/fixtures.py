"""Hand-built task sets used by tests, demos and the ``experiment`` command."""

from __future__ import annotations

from fractions import Fraction

from .dag_model import DagStructure, DagTask, TaskSet
from .timeval import INF


def reference_structure() -> DagStructure:
    """A six-node DAG with C=10 and L=5.

    Two critical paths of weight 5: 0-1-5 and 0-2-4-5.
    """
    nodes = [(0, 1), (1, 3), (2, 2), (3, 2), (4, 1), (5, 1)]
    edges = [(0, 1), (0, 2), (0, 3), (2, 4), (1, 5), (3, 5), (4, 5)]
    return DagStructure(nodes, edges)


def reference_task() -> DagTask:
    return DagTask.from_structure("ref", reference_structure(), D=9, T=12)


def reference_task_set(processors: int = 2) -> TaskSet:
    return TaskSet([reference_task()], processors)


def tight_task() -> DagTask:
    """Implicit-deadline abstract task with C=8, L=5, D=T=7."""
    return DagTask("tight", C=8, L=5, D=7, T=7)


def tight_task_set(processors: int = 2) -> TaskSet:
    return TaskSet([tight_task()], processors)


def exclusive_allocation_task_set(n: int = 10, processors: int = 10, k: int = 2) -> TaskSet:
    """Exclusive-allocation counterexample.

    Task 1 has C=M, D=1; task i>=2 has C = K^(i-2) (K-1) M and D = K^(i-1);
    every period is unbounded.  Each task consists of M independent
    subtasks of equal weight C/M, so L = C/M.
    """
    tasks = []
    for i in range(1, n + 1):
        if i == 1:
            cost, deadline = Fraction(processors), Fraction(1)
        else:
            cost = Fraction(k ** (i - 2) * (k - 1) * processors)
            deadline = Fraction(k ** (i - 1))
        sub = cost / processors
        structure = DagStructure([(j, sub) for j in range(processors)], [])
        tasks.append(DagTask.from_structure(f"tau{i}", structure, deadline, INF))
    return TaskSet(tasks, processors)


def spin_trap_task() -> DagTask:
    """C=10, L=5: two parallel nodes of 5/2 (lowest ids) and a unit chain of five.

    Serving two servers together from the release lets list scheduling
    spend 5/2 on the parallel pair before the chain starts, after
    which one server spins while the other walks the chain.
    """
    half = Fraction(5, 2)
    nodes = [(0, half), (1, half)] + [(i, 1) for i in range(2, 7)]
    edges = [(i, i + 1) for i in range(2, 6)]
    return DagTask.from_structure("trap", DagStructure(nodes, edges), D=9, T=12)
