"""Reservation-based federated scheduling of sporadic DAG tasks.

Heavy DAG tasks are served by a few sequential reservation servers sized
so that list scheduling inside them meets the deadline; the servers are
then partitioned onto processors like ordinary sporadic tasks.
"""

from .dag_model import DagStructure, DagTask, TaskSet, critical_path, work
from .partitioner import dm_first_fit, edf_first_fit, federated_baseline, speedup_probe
from .reservation import (
    ReservationSystem,
    TransformedTaskSet,
    budgets_for_server_count,
    check_reservation_condition,
    r_equal_transform,
    r_min_transform,
    split_cumulative_budget,
)
from .schedulability import SequentialTask, busy_window_wcrt, combined_test, fbb_test
from .simulator import audit_trace, simulate_adversarial, simulate_partitioned
from .timeval import INF, Surd

__version__ = "0.1.0"
