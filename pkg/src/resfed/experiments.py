"""Canned experiments and randomized campaigns.

Every repetition is a pure function of ``(seed, index)``: its RNG is
``numpy.random.default_rng([seed, index])``.  Campaigns can therefore run
in a process pool and still produce identical output.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial

import numpy as np

from .dag_model import (
    DagTask,
    GeneratorConfig,
    TaskSet,
    generate_task_set,
    random_layered_dag,
    uunifast,
)
from .fixtures import exclusive_allocation_task_set
from .partitioner import (
    dm_first_fit,
    edf_first_fit,
    federated_baseline,
    necessary_conditions,
    speedup_probe,
)
from .reservation import (
    HEAVY,
    inflation_bound,
    make_system,
    r_equal_servers,
    r_min_transform,
)
from .schedulability import (
    SequentialTask,
    bini_bound,
    busy_window_wcrt,
    combined_test,
    fbb_test,
)
from .simulator import audit_trace, random_pattern, simulate_adversarial, simulate_fp_busy_window
from .timeval import Surd

SCHEMA_VERSION = 1


@dataclass
class ExperimentResult:
    name: str
    seed: int
    columns: list
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return bool(self.summary.get("ok", True))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema_version={SCHEMA_VERSION} experiment={self.name} seed={self.seed}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_cell(row.get(c)) for c in self.columns])
        return buf.getvalue()


def _cell(value):
    if isinstance(value, Fraction):
        return str(value) if value.denominator == 1 else f"{float(value):.9g}"
    if isinstance(value, float):
        return f"{value:.9g}"
    return "" if value is None else value


def run_indexed(fn, seed: int, count: int, workers: int = 1) -> list:
    """``[fn(seed, i) for i in range(count)]``, optionally in a process pool."""
    if workers <= 1:
        return [fn(seed, i) for i in range(count)]
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(partial(fn, seed), range(count), chunksize=max(1, count // (8 * workers))))


def _rng(seed, index):
    return np.random.default_rng([seed, index])


def _grid(rng, lo, hi, steps=100) -> Fraction:
    return Fraction(lo) + (Fraction(hi) - Fraction(lo)) * Fraction(int(rng.integers(0, steps + 1)), steps)


# --------------------------------------------------------------------------
# Reservation-condition campaign


def random_condition_system(rng, nodes=(5, 50), max_servers=8):
    """A random DAG job plus a reservation system satisfying the condition.

    Budgets are ``L + x_j`` with ``sum(x_j) = C - L + slack`` (the slack is
    zero half of the time, making the condition tight); the deadline is
    the largest budget plus a random margin.
    """
    n = int(rng.integers(nodes[0], nodes[1] + 1))
    layers = int(rng.integers(1, min(n, 12) + 1))
    structure = random_layered_dag(rng, n, layers, float(rng.uniform(0.05, 0.6)), (1, 10))
    probe = DagTask.from_structure("j", structure, D=1 << 30, T=1 << 30)
    C, L = probe.C, probe.L
    m = int(rng.integers(1, max_servers + 1))
    slack = Fraction(0) if rng.random() < 0.5 else L * Fraction(int(rng.integers(1, 101)), 100)
    extra = C - L + slack
    if rng.random() < 0.3:
        shares = [Fraction(1)] * m
    else:
        shares = [Fraction(int(x)) for x in rng.integers(0, 21, m)]
        if not any(shares):
            shares[0] = Fraction(1)
    total = sum(shares)
    budgets = [L + extra * s / total for s in shares]
    margin = Fraction(0) if rng.random() < 0.25 else max(budgets) * Fraction(int(rng.integers(1, 101)), 100)
    D = max(budgets) + margin
    dag = DagTask.from_structure("j", structure, D=D, T=D)
    return dag, make_system(dag, budgets, HEAVY if m > 1 else "light")


def condition_unit(seed: int, index: int) -> dict:
    rng = _rng(seed, index)
    dag, system = random_condition_system(rng)
    pattern = random_pattern(system, rng, max_pieces=10, resolution=int(rng.choice([2, 10, 100])))
    trace = simulate_adversarial(dag, system, pattern)
    report = audit_trace(trace, dag, system)
    first = report.earliest
    return {
        "index": index,
        "nodes": len(dag.structure.nodes),
        "m": system.m,
        "C": dag.C,
        "L": dag.L,
        "D": dag.D,
        "slack": system.condition().slack,
        "finish": report.finish,
        "missed": int(trace.misses > 0),
        "audit_ok": int(report.ok),
        "violation": "" if first is None else f"{first.kind}@{first.t}: {first.detail}",
    }


def condition_campaign(runs: int = 10_000, seed: int = 0, workers: int = 1) -> ExperimentResult:
    rows = run_indexed(condition_unit, seed, runs, workers)
    misses = sum(r["missed"] for r in rows)
    failures = sum(1 - r["audit_ok"] for r in rows)
    cols = ["index", "nodes", "m", "C", "L", "D", "slack", "finish", "missed", "audit_ok", "violation"]
    return ExperimentResult("theorem1-campaign", seed, cols, rows,
                            {"runs": runs, "misses": misses, "audit_failures": failures,
                             "ok": misses == 0 and failures == 0})


# --------------------------------------------------------------------------
# Inflation bounds


def random_heavy_task(rng, gamma: Surd, max_ratio=1000):
    """``(C, L)`` with ``C > gamma L`` and ``C/L`` log-uniform up to ``max_ratio``."""
    L = Fraction(int(rng.integers(1, 101)))
    lo = math.log(float(gamma))
    while True:
        ratio = math.exp(rng.uniform(lo, math.log(max_ratio)))
        C = Fraction(round(ratio * float(L) * 1000), 1000)
        if C > gamma * L:
            return C, L


def inflation_campaign(gammas=("3/2", "2", "1+sqrt(2)", "3"), tasks: int = 10_000, seed: int = 0,
                       near: Fraction = Fraction(1, 100)) -> ExperimentResult:
    rows = []
    ok = True
    for g_index, text in enumerate(gammas):
        gamma = Surd.parse(text)
        rng = _rng(seed, g_index)
        c_bound, e_bound = inflation_bound(gamma), gamma
        worst_c, worst_e = Fraction(0), Fraction(0)
        violations = near_c = near_e = 0
        for _ in range(tasks):
            C, L = random_heavy_task(rng, gamma)
            m = r_equal_servers(C, L, gamma)
            cprime = C + (m - 1) * L
            c_ratio, e_ratio = cprime / C, cprime / m / L
            worst_c, worst_e = max(worst_c, c_ratio), max(worst_e, e_ratio)
            if m < 2 or c_ratio > c_bound or e_ratio > e_bound:
                violations += 1
            near_c += c_ratio >= c_bound * (1 - near)
            near_e += e_ratio >= e_bound * (1 - near)
        ok = ok and violations == 0 and near_c > 0 and near_e > 0
        rows.append({
            "gamma": str(gamma),
            "tasks": tasks,
            "max_cprime_ratio": worst_c,
            "cprime_bound": float(c_bound),
            "max_e_ratio": worst_e,
            "e_bound": float(e_bound),
            "violations": violations,
            "near_cprime_bound": near_c,
            "near_e_bound": near_e,
        })
    cols = list(rows[0]) if rows else []
    return ExperimentResult("inflation-bounds", seed, cols, rows, {"ok": ok})


# --------------------------------------------------------------------------
# Uniprocessor campaigns


def random_sequential_set(rng, n_range=(1, 6), u_range=(0.1, 0.95), overload: float = 0.0,
                          period_range=(1, 100), ratio_range=(Fraction(3, 10), Fraction(2))):
    """Sequential tasks with UUniFast utilizations; integer periods, grid deadlines.

    With probability ``overload`` the total utilization is drawn from
    ``(1, 1.2]`` instead.
    """
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    total = rng.uniform(1.0, 1.2) if rng.random() < overload else rng.uniform(*u_range)
    tasks = []
    for i, u in enumerate(uunifast(rng, n, total)):
        T = Fraction(int(rng.integers(period_range[0], period_range[1] + 1)))
        E = max(Fraction(round(u * 1000), 1000), Fraction(1, 1000)) * T
        D = T * _grid(rng, *ratio_range)
        tasks.append(SequentialTask(E, D, T, f"s{i + 1}", 1))
    return sorted(tasks, key=SequentialTask.dm_key)


def soundness_unit(seed: int, index: int) -> dict:
    rng = _rng(seed, index)
    tasks = random_sequential_set(rng, overload=0.1)
    v = {"fbb_not_exact": 0, "combined_not_exact": 0, "fbb_not_combined": 0, "bini_below_exact": 0}
    exact_all = fbb_all = comb_all = True
    for k, task in enumerate(tasks):
        hp = tasks[:k]
        exact = busy_window_wcrt(task, hp)
        fbb = fbb_test(task, hp).schedulable
        comb = combined_test(task, hp).schedulable
        exact_all &= exact.schedulable
        fbb_all &= fbb
        comb_all &= comb
        v["fbb_not_exact"] += fbb and not exact.schedulable
        v["combined_not_exact"] += comb and not exact.schedulable
        v["fbb_not_combined"] += fbb and not comb
    if exact_all:
        for k, task in enumerate(tasks):
            wcrt = busy_window_wcrt(task, tasks[:k]).wcrt
            if bini_bound(task, tasks[:k]) < wcrt:
                v["bini_below_exact"] += 1
    v["fbb_not_exact"] += fbb_all and not exact_all
    v["combined_not_exact"] += comb_all and not exact_all
    v["fbb_not_combined"] += fbb_all and not comb_all
    return {"index": index, "n": len(tasks), "utilization": sum(t.U for t in tasks),
            "exact": int(exact_all), "fbb": int(fbb_all), "combined": int(comb_all), **v}


def soundness_campaign(sets: int = 10_000, seed: int = 0, workers: int = 1) -> ExperimentResult:
    rows = run_indexed(soundness_unit, seed, sets, workers)
    keys = ["fbb_not_exact", "combined_not_exact", "fbb_not_combined", "bini_below_exact"]
    summary = {k: sum(r[k] for r in rows) for k in keys}
    summary["ok"] = not any(summary.values())
    cols = ["index", "n", "utilization", "exact", "fbb", "combined"] + keys
    return ExperimentResult("test-soundness", seed, cols, rows, summary)


def agreement_unit(seed: int, index: int) -> dict:
    rng = _rng(seed, index)
    tasks = random_sequential_set(rng, u_range=(0.1, 0.98), period_range=(1, 50))
    disagreements = 0
    detail = ""
    for k, task in enumerate(tasks):
        verdict = busy_window_wcrt(task, tasks[:k])
        sim = simulate_fp_busy_window(task, tasks[:k])
        same = sim.schedulable == verdict.schedulable
        if same and verdict.schedulable:
            same = sim.wcrt == verdict.wcrt
        if not same:
            disagreements += 1
            detail = detail or f"{task.name}: analysis {verdict.wcrt}, simulation {sim.wcrt}"
    return {"index": index, "n": len(tasks), "utilization": sum(t.U for t in tasks),
            "disagreements": disagreements, "detail": detail}


def agreement_campaign(sets: int = 1000, seed: int = 0, workers: int = 1) -> ExperimentResult:
    rows = run_indexed(agreement_unit, seed, sets, workers)
    bad = sum(r["disagreements"] for r in rows)
    return ExperimentResult("exact-vs-simulation", seed,
                            ["index", "n", "utilization", "disagreements", "detail"], rows,
                            {"disagreements": bad, "ok": bad == 0})


# --------------------------------------------------------------------------
# Multiprocessor campaigns


def _random_dag_set(rng, processors, n_tasks, utilization, seed):
    cfg = GeneratorConfig(processors=processors, n_tasks=n_tasks, total_utilization=utilization,
                          period_range=(10, 100), dt_ratio=(Fraction(1, 2), Fraction(2)),
                          nodes_range=(3, 15), layers_range=(2, 5), edge_prob=0.3,
                          util_resolution=1000)
    return generate_task_set(cfg, seed)


def acceptance_unit(processors, n_tasks, level, seed, index):
    gen_seed = int(_rng(seed, index).integers(0, 2**32))
    ts = _random_dag_set(None, processors, n_tasks, level, gen_seed)
    transformed = r_min_transform(ts, strict=False)
    out = {}
    for test in ("fbb", "combined", "exact"):
        out[test] = int(not transformed.infeasible and dm_first_fit(transformed.servers, processors, test).feasible)
    out["edf"] = int(not transformed.infeasible and edf_first_fit(transformed.servers, processors).feasible)
    out["federated"] = int(federated_baseline(ts).feasible)
    return out


def acceptance_ratio(processors: int = 4, n_tasks: int = 6, sets: int = 50, seed: int = 0,
                     levels=None, workers: int = 1) -> ExperimentResult:
    """Fraction of random DAG task sets accepted per total utilization level."""
    if levels is None:
        levels = [Fraction(processors * k, 10) for k in range(1, 11)]
    rows = []
    edf_ge_dm = True
    for li, level in enumerate(levels):
        fn = partial(acceptance_unit, processors, n_tasks, Fraction(level))
        results = run_indexed(fn, seed * 1000 + li, sets, workers)
        row = {"utilization": Fraction(level), "sets": sets}
        for key in ("fbb", "combined", "exact", "edf", "federated"):
            row[key] = Fraction(sum(r[key] for r in results), sets)
        edf_ge_dm &= row["edf"] >= row["exact"]
        rows.append(row)
    return ExperimentResult("acceptance-ratio", seed,
                            ["utilization", "sets", "fbb", "combined", "exact", "edf", "federated"], rows,
                            {"edf_at_least_dm": edf_ge_dm})


def speedup_unit(seed: int, index: int, gamma="1+sqrt(2)") -> dict:
    rng = _rng(seed, index)
    for _ in range(1000):
        processors = int(rng.choice([2, 4]))
        n_tasks = int(rng.integers(2, 7))
        level = Fraction(int(rng.integers(2, 10)) * processors, 10)
        ts = _random_dag_set(rng, processors, n_tasks, level, int(rng.integers(0, 2**32)))
        if not necessary_conditions(ts):
            break
    else:
        raise RuntimeError("no task set passed the necessary conditions")
    result = speedup_probe(ts, gamma)
    return {"index": index, "processors": processors, "tasks": n_tasks, "utilization": ts.utilization,
            "speed": result.speed, "probes": len(result.probes)}


def speedup_campaign(sets: int = 1000, seed: int = 0, workers: int = 1) -> ExperimentResult:
    rows = run_indexed(speedup_unit, seed, sets, workers)
    speeds = [r["speed"] for r in rows]
    worst = None if any(s is None for s in speeds) else max(speeds, default=Fraction(0))
    bound = Fraction(58285, 10000)
    return ExperimentResult("speedup-probe", seed,
                            ["index", "processors", "tasks", "utilization", "speed", "probes"], rows,
                            {"max_speed": worst, "ok": worst is not None and worst <= bound})


def gamma_grid_optimum(step: Fraction = Fraction(1, 1000), top: int = 10):
    """Grid maximiser of ``(g-1)/(g^2+g)`` over ``(1, top]``."""
    best, best_g = Fraction(-1), None
    g = 1 + step
    while g <= top:
        value = (g - 1) / (g * g + g)
        if value > best:
            best, best_g = value, g
        g += step
    return best_g, best


# --------------------------------------------------------------------------
# Exclusive-allocation counterexample


def exclusive_allocation_experiment(seed: int = 0) -> ExperimentResult:
    ts = exclusive_allocation_task_set()
    fed = federated_baseline(ts)
    transformed = r_min_transform(ts, strict=False)
    part = dm_first_fit(transformed.servers, ts.processors, "exact")
    infeasible = dict(transformed.infeasible)
    rows = []
    for task in ts:
        reason = dict(fed.unplaced).get(task.id, "")
        row = {
            "task": task.id, "C": task.C, "L": task.L, "D": task.D,
            "federated_processors": fed.dedicated.get(task.id, 0),
            "federated_status": "unplaced" if reason else "placed",
            "reservation_m": 0, "reservation_E": None, "reservation_status": "",
        }
        if task.id in infeasible:
            row["reservation_status"] = infeasible[task.id]
        else:
            system = transformed.system(task.id)
            row["reservation_m"] = system.m
            row["reservation_E"] = system.servers[0].E
            placed = sum(part.processor_of(s) is not None for s in system.servers)
            row["reservation_status"] = f"{placed}/{system.m} servers placed"
        rows.append(row)
    summary = {
        "federated_feasible": fed.feasible,
        "tau1_processors": fed.dedicated.get("tau1", 0),
        "federated_unplaced": len(fed.unplaced),
        "reservation_infeasible": sorted(infeasible),
        "reservation_unassigned_servers": len(part.unassigned),
    }
    return ExperimentResult("table1", seed, list(rows[0]), rows, summary)


EXPERIMENTS = {
    "table1": "federated vs reservation-based allocation on the exclusive-allocation counterexample",
    "theorem1-campaign": "randomized adversarial service patterns, audited",
    "inflation-bounds": "observed C'/C and E/L against their caps",
    "acceptance-ratio": "schedulable fraction per utilization level for each test",
    "speedup-probe": "minimal speed for R-EQUAL plus DM first fit",
    "test-soundness": "fbb / combined / linearised bound against the exact test",
    "exact-vs-simulation": "busy-window analysis against a synchronous DM simulation",
}


def run_experiment(name: str, seed: int = 0, reps=None, workers: int = 1, processors=None,
                   gamma=None) -> ExperimentResult:
    if name == "table1":
        return exclusive_allocation_experiment(seed)
    if name == "theorem1-campaign":
        return condition_campaign(reps or 10_000, seed, workers)
    if name == "inflation-bounds":
        gammas = (gamma,) if gamma else ("3/2", "2", "1+sqrt(2)", "3")
        return inflation_campaign(gammas, reps or 10_000, seed)
    if name == "acceptance-ratio":
        return acceptance_ratio(processors or 4, sets=reps or 50, seed=seed, workers=workers)
    if name == "speedup-probe":
        return speedup_campaign(reps or 1000, seed, workers)
    if name == "test-soundness":
        return soundness_campaign(reps or 10_000, seed, workers)
    if name == "exact-vs-simulation":
        return agreement_campaign(reps or 1000, seed, workers)
    raise ValueError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
