"""Sporadic arbitrary-deadline DAG tasks: structure, validation, generation, JSON."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .timeval import INF, Time, as_time, is_inf, time_from_json, time_to_json, utilization


class ValidationError(ValueError):
    """Raised when a structure, task or file violates a model invariant.

    ``problems`` lists every violation found, not just the first.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class CycleError(ValidationError):
    def __init__(self, edge):
        self.edge = edge
        super().__init__([f"cycle detected: back edge {edge[0]!r} -> {edge[1]!r}"])


@dataclass(frozen=True)
class Node:
    id: int
    wcet: Fraction


@dataclass(frozen=True)
class DagStructure:
    nodes: tuple
    edges: tuple

    def __init__(self, nodes: Iterable, edges: Iterable = ()):
        built = []
        for n in nodes:
            if isinstance(n, Node):
                built.append(Node(n.id, as_time(n.wcet)))
            else:
                nid, wcet = n
                built.append(Node(nid, as_time(wcet)))
        object.__setattr__(self, "nodes", tuple(built))
        object.__setattr__(self, "edges", tuple((u, v) for u, v in edges))
        problems = self._problems()
        if problems:
            raise ValidationError(problems)
        back = _find_back_edge(self.ids, self.edges)
        if back is not None:
            raise CycleError(back)

    @property
    def ids(self):
        return [n.id for n in self.nodes]

    def wcet_of(self, nid) -> Fraction:
        return self._wcets()[nid]

    def _wcets(self):
        return {n.id: n.wcet for n in self.nodes}

    def _problems(self):
        problems = []
        ids = self.ids
        if not ids:
            problems.append("structure has no nodes")
        if len(set(ids)) != len(ids):
            problems.append("duplicate node ids")
        for n in self.nodes:
            if is_inf(n.wcet) or n.wcet <= 0:
                problems.append(f"node {n.id!r}: wcet must be positive, got {n.wcet}")
        known = set(ids)
        seen = set()
        for u, v in self.edges:
            if u not in known or v not in known:
                problems.append(f"edge ({u!r}, {v!r}) references an unknown node")
            if u == v:
                problems.append(f"self-loop on node {u!r}")
            if (u, v) in seen:
                problems.append(f"duplicate edge ({u!r}, {v!r})")
            seen.add((u, v))
        return problems

    def predecessors(self):
        preds = {nid: [] for nid in self.ids}
        for u, v in self.edges:
            preds[v].append(u)
        return preds

    def successors(self):
        succs = {nid: [] for nid in self.ids}
        for u, v in self.edges:
            succs[u].append(v)
        return succs

    def topological_order(self):
        return _topological_order(self.ids, self.edges)

    def scaled(self, factor: Fraction) -> "DagStructure":
        return DagStructure([(n.id, n.wcet * factor) for n in self.nodes], self.edges)

    def to_json(self):
        return {
            "nodes": [{"id": n.id, "wcet": time_to_json(n.wcet)} for n in self.nodes],
            "edges": [[u, v] for u, v in self.edges],
        }


def _topological_order(ids, edges):
    indeg = {nid: 0 for nid in ids}
    succs = {nid: [] for nid in ids}
    for u, v in edges:
        succs[u].append(v)
        indeg[v] += 1
    ready = sorted((nid for nid, d in indeg.items() if d == 0), key=_sort_key)
    order = []
    while ready:
        nid = ready.pop(0)
        order.append(nid)
        for s in succs[nid]:
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
        ready.sort(key=_sort_key)
    if len(order) != len(ids):
        return None
    return order


def _sort_key(nid):
    return (str(type(nid)), nid)


def _find_back_edge(ids, edges):
    succs = {nid: [] for nid in ids}
    for u, v in edges:
        succs[u].append(v)
    state = {nid: 0 for nid in ids}  # 0 new, 1 on stack, 2 done
    for root in ids:
        if state[root]:
            continue
        stack = [(root, iter(succs[root]))]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            for nxt in it:
                if state[nxt] == 1:
                    return (node, nxt)
                if state[nxt] == 0:
                    state[nxt] = 1
                    stack.append((nxt, iter(succs[nxt])))
                    break
            else:
                state[node] = 2
                stack.pop()
    return None


def work(structure: DagStructure) -> Fraction:
    """Total execution time: the sum of all node wcets."""
    return sum((n.wcet for n in structure.nodes), Fraction(0))


def critical_path(structure: DagStructure) -> Fraction:
    """Weight of the heaviest source-to-sink path, both end nodes included."""
    order = structure.topological_order()
    if order is None:
        raise CycleError(_find_back_edge(structure.ids, structure.edges))
    wcets = structure._wcets()
    preds = structure.predecessors()
    finish = {}
    for nid in order:
        start = max((finish[p] for p in preds[nid]), default=Fraction(0))
        finish[nid] = start + wcets[nid]
    return max(finish.values())


@dataclass(frozen=True)
class DagTask:
    """One sporadic DAG task.

    ``C`` is the work and ``L`` the critical-path length.  When a
    structure is given, both are derived from it and any explicitly
    supplied value must agree.
    """

    id: str
    C: Fraction
    L: Fraction
    D: Fraction
    T: Time
    structure: Optional[DagStructure] = None

    def __post_init__(self):
        for name in ("C", "L", "D"):
            value = getattr(self, name)
            if is_inf(value):
                raise ValidationError(f"task {self.id!r}: {name} must be finite")
            object.__setattr__(self, name, as_time(value))
        object.__setattr__(self, "T", as_time(self.T))
        problems = []
        if self.structure is not None:
            c, l = work(self.structure), critical_path(self.structure)
            if c != self.C:
                problems.append(f"task {self.id!r}: declared C={self.C} but node wcets sum to {c}")
            if l != self.L:
                problems.append(f"task {self.id!r}: declared L={self.L} but critical path is {l}")
        if not self.L > 0:
            problems.append(f"task {self.id!r}: L must be positive, got {self.L}")
        if self.C < self.L:
            problems.append(f"task {self.id!r}: C={self.C} is smaller than L={self.L}")
        if not self.D > 0:
            problems.append(f"task {self.id!r}: D must be positive, got {self.D}")
        if not is_inf(self.T) and not self.T > 0:
            problems.append(f"task {self.id!r}: T must be positive, got {self.T}")
        if problems:
            raise ValidationError(problems)

    @classmethod
    def from_structure(cls, id, structure: DagStructure, D, T) -> "DagTask":
        return cls(id, work(structure), critical_path(structure), D, T, structure)

    @property
    def U(self) -> Fraction:
        return utilization(self.C, self.T)

    @property
    def utilization(self) -> Fraction:
        return self.U

    def scaled(self, speed) -> "DagTask":
        """The same task on a processor ``speed`` times faster."""
        speed = as_time(speed)
        structure = self.structure.scaled(1 / speed) if self.structure is not None else None
        return replace(self, C=self.C / speed, L=self.L / speed, structure=structure)

    def to_json(self):
        out = {
            "id": self.id,
            "C": time_to_json(self.C),
            "L": time_to_json(self.L),
            "D": time_to_json(self.D),
            "T": time_to_json(self.T),
        }
        if self.structure is not None:
            out["structure"] = self.structure.to_json()
        return out


@dataclass(frozen=True)
class TaskSet:
    tasks: tuple
    processors: int = 1

    def __init__(self, tasks: Iterable[DagTask], processors: int = 1):
        object.__setattr__(self, "tasks", tuple(tasks))
        object.__setattr__(self, "processors", processors)
        problems = []
        ids = [t.id for t in self.tasks]
        dup = sorted({i for i in ids if ids.count(i) > 1})
        if dup:
            problems.append(f"duplicate task ids: {dup}")
        if not isinstance(processors, int) or isinstance(processors, bool) or processors < 1:
            problems.append(f"processors must be a positive integer, got {processors!r}")
        if problems:
            raise ValidationError(problems)

    def __iter__(self):
        return iter(self.tasks)

    def __len__(self):
        return len(self.tasks)

    def task(self, task_id) -> DagTask:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(task_id)

    @property
    def utilization(self) -> Fraction:
        return sum((t.U for t in self.tasks), Fraction(0))

    def scaled(self, speed) -> "TaskSet":
        return TaskSet([t.scaled(speed) for t in self.tasks], self.processors)

    def to_json(self):
        return {"processors": self.processors, "tasks": [t.to_json() for t in self.tasks]}


# --------------------------------------------------------------------------
# JSON I/O


def task_set_from_json(data) -> TaskSet:
    problems = []
    if not isinstance(data, dict):
        raise ValidationError("$: expected an object")
    processors = data.get("processors")
    if not isinstance(processors, int) or isinstance(processors, bool):
        problems.append(f"$.processors: expected a positive integer, got {processors!r}")
    raw_tasks = data.get("tasks")
    if not isinstance(raw_tasks, list):
        problems.append("$.tasks: expected a list")
        raise ValidationError(problems)
    tasks = []
    for i, raw in enumerate(raw_tasks):
        path = f"$.tasks[{i}]"
        try:
            tasks.append(_task_from_json(raw, path))
        except ValidationError as exc:
            problems.extend(f"{path}: {p}" for p in exc.problems)
        except (ValueError, TypeError, KeyError) as exc:
            problems.append(f"{path}: {exc}")
    if problems:
        raise ValidationError(problems)
    try:
        return TaskSet(tasks, processors)
    except ValidationError as exc:
        raise ValidationError([f"$: {p}" for p in exc.problems]) from None


def _task_from_json(raw, path):
    if not isinstance(raw, dict):
        raise ValidationError("expected an object")
    if "id" not in raw:
        raise ValidationError("missing 'id'")
    structure = None
    if raw.get("structure") is not None:
        s = raw["structure"]
        if not isinstance(s, dict) or not isinstance(s.get("nodes"), list):
            raise ValidationError("structure: expected an object with a 'nodes' list")
        nodes = [
            (n["id"], time_from_json(n["wcet"], f"{path}.structure.nodes[{j}].wcet"))
            for j, n in enumerate(s["nodes"])
        ]
        edges = [tuple(e) for e in s.get("edges", [])]
        for j, e in enumerate(edges):
            if len(e) != 2:
                raise ValidationError(f"structure.edges[{j}]: expected a [pred, succ] pair")
        structure = DagStructure(nodes, edges)

    def field_(name):
        if name in raw:
            return time_from_json(raw[name], f"{path}.{name}")
        if structure is not None and name == "C":
            return work(structure)
        if structure is not None and name == "L":
            return critical_path(structure)
        raise ValidationError(f"missing '{name}'")

    return DagTask(str(raw["id"]), field_("C"), field_("L"), field_("D"), field_("T"), structure)


def load_task_set(path) -> TaskSet:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return task_set_from_json(data)


def save_task_set(ts: TaskSet, path) -> None:
    Path(path).write_text(json.dumps(ts.to_json(), indent=2) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# Random generation


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters for :func:`generate_task_set`.

    Per-task utilizations are drawn with UUniFast-discard and rounded to
    ``1/util_resolution``; the last share absorbs the rounding so the
    total is exact.  Node weights are integers from ``weight_range``
    scaled so that ``C = u * T`` holds exactly for an integer period.
    """

    processors: int = 4
    n_tasks: int = 5
    total_utilization: Fraction = Fraction(2)
    max_task_utilization: Optional[Fraction] = None  # defaults to `processors`
    period_range: tuple = (10, 100)
    dt_ratio: tuple = (Fraction(1, 2), Fraction(1))
    nodes_range: tuple = (5, 20)
    layers_range: tuple = (2, 5)
    edge_prob: float = 0.3
    weight_range: tuple = (1, 10)
    util_resolution: int = 10**6
    max_attempts: int = 10_000

    def cap(self) -> Fraction:
        if self.max_task_utilization is None:
            return Fraction(self.processors)
        return as_time(self.max_task_utilization)

    def check(self):
        problems = []
        total = as_time(self.total_utilization)
        if self.n_tasks < 1:
            problems.append("n_tasks must be at least 1")
        if self.processors < 1:
            problems.append("processors must be at least 1")
        if not total > 0:
            problems.append("total_utilization must be positive")
        if self.n_tasks >= 1 and total > self.n_tasks * self.cap():
            problems.append(
                f"total_utilization {total} exceeds n_tasks x max_task_utilization "
                f"= {self.n_tasks * self.cap()}"
            )
        lo, hi = self.period_range
        if not 1 <= lo <= hi:
            problems.append("period_range must satisfy 1 <= lo <= hi")
        lo, hi = self.nodes_range
        if not 1 <= lo <= hi:
            problems.append("nodes_range must satisfy 1 <= lo <= hi")
        lo, hi = self.layers_range
        if not 1 <= lo <= hi:
            problems.append("layers_range must satisfy 1 <= lo <= hi")
        lo, hi = self.weight_range
        if not 1 <= lo <= hi:
            problems.append("weight_range must satisfy 1 <= lo <= hi")
        lo, hi = (as_time(x) for x in self.dt_ratio)
        if not 0 < lo <= hi:
            problems.append("dt_ratio must satisfy 0 < lo <= hi")
        if not 0 <= self.edge_prob <= 1:
            problems.append("edge_prob must lie in [0, 1]")
        if problems:
            raise ValidationError(problems)


def uunifast(rng: np.random.Generator, n: int, total: float) -> list:
    shares = []
    remaining = total
    for i in range(1, n):
        nxt = remaining * rng.random() ** (1.0 / (n - i))
        shares.append(remaining - nxt)
        remaining = nxt
    shares.append(remaining)
    return shares


def _exact_utilizations(rng, cfg: GeneratorConfig) -> list:
    total = as_time(cfg.total_utilization)
    cap = cfg.cap()
    res = cfg.util_resolution
    for _ in range(cfg.max_attempts):
        raw = uunifast(rng, cfg.n_tasks, float(total))
        head = [Fraction(round(u * res), res) for u in raw[:-1]]
        last = total - sum(head, Fraction(0))
        shares = head + [last]
        if all(0 < u <= cap for u in shares):
            return shares
    raise ValidationError(
        f"could not draw {cfg.n_tasks} utilizations in (0, {cap}] summing to {total} "
        f"within {cfg.max_attempts} attempts"
    )


def random_layered_dag(rng: np.random.Generator, n_nodes: int, n_layers: int, edge_prob: float,
                       weight_range=(1, 10)) -> DagStructure:
    """Layered Erdos-Renyi DAG: edges only go from lower to higher layers."""
    n_layers = max(1, min(n_layers, n_nodes))
    layer = list(range(n_layers)) + [int(x) for x in rng.integers(0, n_layers, n_nodes - n_layers)]
    layer.sort()
    lo, hi = weight_range
    weights = [int(w) for w in rng.integers(lo, hi + 1, n_nodes)]
    edges = []
    for u in range(n_nodes):
        for v in range(u + 1, n_nodes):
            if layer[u] < layer[v] and rng.random() < edge_prob:
                edges.append((u, v))
    return DagStructure(list(zip(range(n_nodes), weights)), edges)


def generate_task_set(config: GeneratorConfig, seed: int) -> TaskSet:
    config.check()
    rng = np.random.default_rng(seed)
    shares = _exact_utilizations(rng, config)
    lo_r, hi_r = (as_time(x) for x in config.dt_ratio)
    tasks = []
    for i, u in enumerate(shares):
        n_nodes = int(rng.integers(config.nodes_range[0], config.nodes_range[1] + 1))
        n_layers = int(rng.integers(config.layers_range[0], config.layers_range[1] + 1))
        shape = random_layered_dag(rng, n_nodes, n_layers, config.edge_prob, config.weight_range)
        period = Fraction(int(rng.integers(config.period_range[0], config.period_range[1] + 1)))
        ratio = lo_r + (hi_r - lo_r) * Fraction(int(rng.integers(0, 101)), 100)
        cost = u * period
        structure = shape.scaled(cost / work(shape))
        tasks.append(DagTask.from_structure(f"t{i + 1}", structure, period * ratio, period))
    return TaskSet(tasks, config.processors)


def abstract_structure(C: Fraction, L: Fraction) -> DagStructure:
    """A concrete DAG with the given work and critical-path length.

    One node of weight ``L`` plus ``k = ceil((C-L)/L)`` independent nodes
    sharing ``C - L`` equally.  Used to simulate tasks given only (C, L).
    """
    nodes = [(0, L)]
    rest = C - L
    if rest > 0:
        k = -(-rest // L)
        nodes += [(j + 1, rest / k) for j in range(int(k))]
    return DagStructure(nodes, [])


def structure_or_abstract(task: DagTask) -> DagStructure:
    return task.structure if task.structure is not None else abstract_structure(task.C, task.L)


def dm_order(tasks: Sequence[DagTask]) -> list:
    return sorted(tasks, key=lambda t: (t.D, t.id))
