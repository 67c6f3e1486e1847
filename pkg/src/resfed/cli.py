"""``resfed`` command line: generate, transform, analyze, simulate, experiment.

Exit status is 0 on success, 1 when the result itself reports a problem
(infeasible tasks, deadline misses, audit or campaign failures) and 2 on
usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .dag_model import DagTask, GeneratorConfig, ValidationError, generate_task_set, load_task_set, \
    structure_or_abstract, task_set_from_json
from .experiments import EXPERIMENTS, run_experiment
from .partitioner import Partition, partition_servers
from .reservation import TransformedTaskSet, r_equal_transform, r_min_transform
from .simulator import audit_trace, find_counterexample, simulate_partitioned
from .timeval import Surd, as_time, is_inf, precision_from_env


class InputError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return str(x) if x.denominator == 1 else f"{x} (~{float(x):.4g})"
    return str(x)


def _frac(obj) -> Fraction:
    return Fraction(obj["num"], obj["den"])


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _time_arg(text):
    try:
        value = as_time(text)
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if is_inf(value) or value < 0:
        raise argparse.ArgumentTypeError(f"must be a finite non-negative time, got {text!r}")
    return value


def _gamma_arg(text):
    try:
        gamma = Surd.parse(text)
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if not gamma > 1:
        raise argparse.ArgumentTypeError(f"gamma must exceed 1, got {text!r}")
    return gamma


def _read_json(path):
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _load_transformed(path, note=True) -> TransformedTaskSet:
    obj = _read_json(path)
    try:
        if "systems" in obj:
            return TransformedTaskSet.from_json(obj)
        ts = task_set_from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None
    if note:
        print(f"note: {path} is an untransformed task set; applying r-min", file=sys.stderr)
    return r_min_transform(ts, strict=False)


# --------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = GeneratorConfig(processors=args.processors or 4, n_tasks=args.n_tasks,
                          total_utilization=as_time(args.utilization))
    try:
        ts = generate_task_set(cfg, args.seed)
    except ValidationError as exc:
        raise InputError(str(exc)) from None
    out = ts.to_json()
    out["seed"] = args.seed
    _write(args.output, json.dumps(out, indent=2) + "\n")
    return 0


def render_transform(obj) -> str:
    lines = [f"{'task':<10} {'class':<6} {'m':>3} {'E':>14} {'C_prime':>14} {'C_prime/C':>10}"]
    for s in obj["systems"]:
        budgets = [_frac(x["E"]) for x in s["servers"]]
        cum, C = _frac(s["cumulative"]), _frac(s["C"])
        E = budgets[0] if len(set(budgets)) == 1 else "mixed"
        lines.append(f"{s['task']:<10} {s['class']:<6} {len(budgets):>3} {str(E):>14} {str(cum):>14} "
                     f"{float(cum / C):>10.4f}")
    for item in obj["infeasible"]:
        lines.append(f"{item['task']:<10} INFEASIBLE: {item['reason']}")
    return "\n".join(lines) + "\n"


def cmd_transform(args) -> int:
    try:
        ts = load_task_set(args.input)
    except OSError as exc:
        raise InputError(f"cannot read {args.input}: {exc.strerror}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{args.input}: {exc}") from None
    if args.algo == "r-equal":
        gamma = args.gamma if args.gamma is not None else Surd.parse("1+sqrt(2)")
        transformed = r_equal_transform(ts, gamma, strict=False)
    else:
        if args.gamma is not None:
            print("note: --gamma is ignored by r-min", file=sys.stderr)
        transformed = r_min_transform(ts, strict=False)
    obj = transformed.to_json()
    if args.output:
        _write(args.output, json.dumps(obj, indent=2) + "\n")
    sys.stdout.write(render_transform(obj))
    if transformed.gamma is not None and not transformed.gamma.is_rational:
        prec = precision_from_env()
        print(f"gamma = {transformed.gamma} <= {transformed.gamma.upper_bound(prec)}")
    return 1 if transformed.infeasible else 0


def render_partition(report) -> str:
    lines = [f"policy={report['policy']} test={report['test']} M={report['M']} "
             f"feasible={str(report['feasible']).lower()}"]
    for p in report["processors"]:
        names = ", ".join(f"{s['task']}#{s['index']}" for s in p["servers"]) or "-"
        lines.append(f"  P{p['index']}: U={float(_frac(p['utilization'])):.4f} "
                     f"ok={str(p['schedulable']).lower()}  [{names}]")
    if report["unassigned"]:
        lines.append("  unassigned: " + ", ".join(f"{s['task']}#{s['index']}" for s in report["unassigned"]))
    for item in report["infeasible_tasks"]:
        lines.append(f"  infeasible task {item['task']}: {item['reason']}")
    return "\n".join(lines) + "\n"


def analyze(transformed: TransformedTaskSet, M: int, policy: str, test: str):
    part = partition_servers(transformed.servers, M, policy, test)
    report = part.to_json()
    report["M"] = M
    report["infeasible_tasks"] = [{"task": t, "reason": r} for t, r in transformed.infeasible]
    report["feasible"] = part.feasible and not transformed.infeasible
    return part, report


def cmd_analyze(args) -> int:
    transformed = _load_transformed(args.input)
    M = args.processors or transformed.origin.processors
    part, report = analyze(transformed, M, args.policy, args.test)
    if args.output:
        _write(args.output, json.dumps(report, indent=2) + "\n")
    sys.stdout.write(render_partition(report))
    # the final assignment must pass the test it was built with
    return 0 if all(part.audit()) else 1


def _dag_with_structure(task: DagTask) -> DagTask:
    if task.structure is not None:
        return task
    return DagTask.from_structure(task.id, structure_or_abstract(task), task.D, task.T)


def cmd_simulate(args) -> int:
    transformed = _load_transformed(args.input)
    origin = {t.id: t for t in transformed.origin}
    if args.adversarial:
        return _simulate_adversarial(args, transformed, origin)
    if args.partition:
        try:
            part = Partition.from_json(_read_json(args.partition), transformed)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{args.partition}: {exc}") from None
    else:
        part, _ = analyze(transformed, args.processors or transformed.origin.processors, args.policy, args.test)
    if not part.feasible:
        raise InputError("partition is infeasible; nothing to simulate")
    horizon = args.horizon
    if horizon is None:
        periods = [t.T for t in transformed.origin if not is_inf(t.T)]
        horizon = 2 * max(periods) if periods else max((t.D for t in transformed.origin), default=Fraction(0))
    try:
        trace = simulate_partitioned(transformed, part, args.policy, horizon, args.arrival, args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.output:
        trace.write_jsonl(args.output)
    failures = 0
    for job in trace.jobs:
        system = transformed.system(job.task)
        report = audit_trace(trace, origin[job.task], system, job=job.job, require_full_budget=False)
        if not report.ok:
            failures += 1
            v = report.earliest
            print(f"audit {job.task}/{job.job}: {v.kind} at {v.t}: {v.detail}", file=sys.stderr)
    print(f"jobs={len(trace.jobs)} misses={trace.misses} server_misses={trace.server_misses} "
          f"audit_failures={failures} horizon={horizon} policy={args.policy} seed={args.seed}")
    return 1 if trace.misses or trace.server_misses or failures else 0


def _simulate_adversarial(args, transformed, origin) -> int:
    found = 0
    for system in transformed.systems:
        dag = _dag_with_structure(origin[system.dag_task_id])
        cond = system.condition()
        result = find_counterexample(dag, system, tries=args.reps or 1000, seed=args.seed)
        status = "condition holds" if cond.holds else f"condition fails by {-cond.slack}"
        if result is None:
            print(f"{system.dag_task_id}: no miss in {args.reps or 1000} patterns ({status})")
            continue
        found += 1
        pattern, trace = result
        print(f"{system.dag_task_id}: counterexample found ({status})")
        for server, ivs in zip(system.servers, pattern.intervals):
            print(f"  server {server.index}: " + " ".join(f"[{a}, {b})" for a, b in ivs))
        if args.output:
            trace.write_jsonl(args.output)
    return 1 if found else 0


def cmd_experiment(args) -> int:
    try:
        result = run_experiment(args.name, seed=args.seed, reps=args.reps, workers=args.workers,
                                processors=args.processors,
                                gamma=None if args.gamma is None else str(args.gamma))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _write(args.output, result.to_csv())
    summary = ", ".join(f"{k}={_fmt(v)}" for k, v in result.summary.items())
    print(f"{result.name}: {summary}", file=sys.stderr if args.output in (None, "-") else sys.stdout)
    return 0 if result.ok else 1


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="resfed", description="Reservation-based federated scheduling of DAG tasks.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="random DAG task set")
    g.add_argument("--processors", type=_positive_int)
    g.add_argument("--n-tasks", type=_positive_int, default=5)
    g.add_argument("--utilization", default="2")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--output")
    g.set_defaults(fn=cmd_generate)

    t = sub.add_parser("transform", help="DAG tasks to reservation servers")
    t.add_argument("--input", required=True)
    t.add_argument("--algo", choices=["r-min", "r-equal"], default="r-min")
    t.add_argument("--gamma", type=_gamma_arg)
    t.add_argument("--output")
    t.set_defaults(fn=cmd_transform)

    a = sub.add_parser("analyze", help="partition servers onto processors")
    a.add_argument("--input", required=True)
    a.add_argument("--processors", type=_positive_int)
    a.add_argument("--test", choices=["fbb", "combined", "exact"], default="exact")
    a.add_argument("--policy", choices=["dm", "edf"], default="dm")
    a.add_argument("--output")
    a.set_defaults(fn=cmd_analyze)

    s = sub.add_parser("simulate", help="simulate a partition, or search adversarial service patterns")
    s.add_argument("--input", required=True)
    s.add_argument("--partition")
    s.add_argument("--processors", type=_positive_int)
    s.add_argument("--test", choices=["fbb", "combined", "exact"], default="exact")
    s.add_argument("--policy", choices=["dm", "edf"], default="dm")
    s.add_argument("--horizon", type=_time_arg)
    s.add_argument("--arrival", choices=["synchronous", "sporadic"], default="synchronous")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--adversarial", action="store_true")
    s.add_argument("--reps", type=_positive_int, help="patterns tried per task in --adversarial mode")
    s.add_argument("--output")
    s.set_defaults(fn=cmd_simulate)

    e = sub.add_parser("experiment", help="canned experiments, CSV output")
    e.add_argument("name", choices=sorted(EXPERIMENTS))
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--reps", type=_positive_int)
    e.add_argument("--workers", type=_positive_int, default=1)
    e.add_argument("--processors", type=_positive_int)
    e.add_argument("--gamma", type=_gamma_arg)
    e.add_argument("--output")
    e.set_defaults(fn=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"resfed: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
