"""Problem data model, objectives and the schedule feasibility oracle.

A problem instance consists of jobs made of ordered tasks. Every task needs a
station (chosen from its alternatives), a setup worker (only if the station
requires setups) and a processing worker. Jobs are linked by precedence
relations so that the overall task graph is a DAG (bill of materials).

Identifiers are positional: ``jobs[i].id == i``, ``stations[k].id == k`` and
``workers[w].id == w``. A task is addressed by the pair ``(job, task_index)``.
"""

from __future__ import annotations

import hashlib
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

TaskId = tuple[int, int]

SETUP = "setup"
PROCESSING = "processing"

# Durations and attention loads are floats; comparisons use this slack.
EPS = 1e-9

FACTOR_MIN = -1.0
FACTOR_MAX = 0.5


@dataclass(frozen=True)
class TaskAlternative:
    """One admissible station for a task together with its capable workers.

    ``setup_workers`` maps worker -> setup duration on this station and
    ``processing_workers`` maps worker -> processing duration. Stations that
    do not require setups carry an empty ``setup_workers`` map.
    """

    station: int
    setup_workers: Mapping[int, float] = field(default_factory=dict)
    processing_workers: Mapping[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class TaskSpec:
    release_time: float
    alternatives: tuple[TaskAlternative, ...]
    # station -> attention a worker must spend while processing (1.0 = manual)
    automation_degree_by_station: Mapping[int, float] = field(default_factory=dict)

    def alternative(self, station: int) -> TaskAlternative:
        for alt in self.alternatives:
            if alt.station == station:
                return alt
        raise KeyError(f"station {station} is not an alternative for this task")

    @property
    def stations(self) -> tuple[int, ...]:
        return tuple(alt.station for alt in self.alternatives)


@dataclass(frozen=True)
class Job:
    id: int
    tasks: tuple[TaskSpec, ...]
    due_date: float | None = None

    @property
    def last_task(self) -> int:
        return len(self.tasks) - 1


@dataclass(frozen=True)
class Station:
    id: int
    slots: int = 1
    requires_setup: bool = True
    # (predecessor task, successor task) -> factor in [-1, 0.5]; missing = 0
    sequence_factor: Mapping[tuple[TaskId, TaskId], float] = field(default_factory=dict)

    def factor(self, prev: TaskId | None, task: TaskId) -> float:
        if prev is None:
            return 0.0
        return self.sequence_factor.get((prev, task), 0.0)


@dataclass(frozen=True)
class Worker:
    id: int

    capacity = 1.0


@dataclass(frozen=True)
class ProblemInstance:
    jobs: tuple[Job, ...]
    stations: tuple[Station, ...]
    workers: tuple[Worker, ...]
    # pairs (predecessor job, successor job)
    job_precedence: frozenset[tuple[int, int]] = frozenset()
    objective_weights: tuple[float, float] = (0.5, 0.5)
    name: str = ""

    @cached_property
    def tasks(self) -> tuple[TaskId, ...]:
        return tuple((job.id, j) for job in self.jobs for j in range(len(job.tasks)))

    def task(self, tid: TaskId) -> TaskSpec:
        return self.jobs[tid[0]].tasks[tid[1]]

    @cached_property
    def job_predecessors(self) -> dict[int, tuple[int, ...]]:
        preds: dict[int, list[int]] = defaultdict(list)
        for a, b in sorted(self.job_precedence):
            preds[b].append(a)
        return {job.id: tuple(preds.get(job.id, ())) for job in self.jobs}

    @cached_property
    def job_successors(self) -> dict[int, tuple[int, ...]]:
        succs: dict[int, list[int]] = defaultdict(list)
        for a, b in sorted(self.job_precedence):
            succs[a].append(b)
        return {job.id: tuple(succs.get(job.id, ())) for job in self.jobs}

    @cached_property
    def task_predecessors(self) -> dict[TaskId, tuple[TaskId, ...]]:
        """Direct predecessors in the task DAG (within-job chain plus job links)."""
        preds: dict[TaskId, tuple[TaskId, ...]] = {}
        for job in self.jobs:
            for j in range(len(job.tasks)):
                if j > 0:
                    preds[(job.id, j)] = ((job.id, j - 1),)
                else:
                    preds[(job.id, 0)] = tuple(
                        (p, self.jobs[p].last_task)
                        for p in self.job_predecessors[job.id]
                        if 0 <= p < len(self.jobs)
                    )
        return preds

    @cached_property
    def task_successors(self) -> dict[TaskId, tuple[TaskId, ...]]:
        succs: dict[TaskId, list[TaskId]] = {t: [] for t in self.tasks}
        for t, preds in self.task_predecessors.items():
            for p in preds:
                if p in succs:
                    succs[p].append(t)
        return {t: tuple(v) for t, v in succs.items()}

    def automation(self, tid: TaskId, station: int) -> float:
        return self.task(tid).automation_degree_by_station.get(station, 1.0)

    def setup_needed(self, station: int) -> bool:
        return self.stations[station].requires_setup

    @cached_property
    def fingerprint(self) -> str:
        """Stable digest of the instance content (used to match genomes)."""
        h = hashlib.sha1()
        h.update(repr(self.objective_weights).encode())
        h.update(repr(sorted(self.job_precedence)).encode())
        for job in self.jobs:
            h.update(repr((job.id, job.due_date)).encode())
            for spec in job.tasks:
                h.update(repr(spec.release_time).encode())
                h.update(repr(sorted(spec.automation_degree_by_station.items())).encode())
                for alt in spec.alternatives:
                    h.update(
                        repr(
                            (
                                alt.station,
                                sorted(alt.setup_workers.items()),
                                sorted(alt.processing_workers.items()),
                            )
                        ).encode()
                    )
        for st in self.stations:
            h.update(repr((st.id, st.slots, st.requires_setup)).encode())
            h.update(repr(sorted(st.sequence_factor.items())).encode())
        h.update(repr(len(self.workers)).encode())
        return h.hexdigest()


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Issue:
    kind: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


@dataclass
class ValidationReport:
    issues: list[Issue] = field(default_factory=list)

    def add(self, kind: str, message: str) -> None:
        self.issues.append(Issue(kind, message))

    @property
    def ok(self) -> bool:
        return not self.issues

    def __bool__(self) -> bool:
        return self.ok

    def __len__(self) -> int:
        return len(self.issues)

    def __iter__(self):
        return iter(self.issues)

    def kinds(self) -> list[str]:
        return [i.kind for i in self.issues]


def _find_cycle(nodes: Iterable, succs: Mapping) -> list | None:
    """Return one directed cycle as a node list, or None if the graph is acyclic."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in nodes}
    for root in color:
        if color[root] != WHITE:
            continue
        stack = [(root, iter(succs.get(root, ())))]
        path = [root]
        color[root] = GREY
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = BLACK
                stack.pop()
                path.pop()
                continue
            if nxt not in color:
                continue
            if color[nxt] == GREY:
                return path[path.index(nxt):] + [nxt]
            if color[nxt] == WHITE:
                color[nxt] = GREY
                stack.append((nxt, iter(succs.get(nxt, ()))))
                path.append(nxt)
    return None


def validate_instance(instance: ProblemInstance) -> ValidationReport:
    """Collect every violated structural invariant of ``instance``."""
    report = ValidationReport()
    n_jobs = len(instance.jobs)
    n_st = len(instance.stations)
    n_wk = len(instance.workers)

    for i, job in enumerate(instance.jobs):
        if job.id != i:
            report.add("job id", f"job at position {i} has id {job.id}")
    for k, st in enumerate(instance.stations):
        if st.id != k:
            report.add("station id", f"station at position {k} has id {st.id}")
        if st.slots < 1:
            report.add("slots", f"station {k} has {st.slots} slots")
        for (a, b), s in st.sequence_factor.items():
            if not (FACTOR_MIN <= s <= FACTOR_MAX) or math.isnan(s):
                report.add(
                    "factor out of [-1, 0.5]",
                    f"station {k} factor {a}->{b} = {s}",
                )
    for w, wk in enumerate(instance.workers):
        if wk.id != w:
            report.add("worker id", f"worker at position {w} has id {wk.id}")

    w1, w2 = instance.objective_weights
    if not (0 <= w1 <= 1 and 0 <= w2 <= 1) or abs(w1 + w2 - 1) > 1e-9:
        report.add("objective weights", f"weights {instance.objective_weights} must lie in [0,1] and sum to 1")

    for a, b in instance.job_precedence:
        if not (0 <= a < n_jobs and 0 <= b < n_jobs):
            report.add("job precedence", f"pair ({a}, {b}) references a missing job")
        elif a == b:
            report.add("cyclic job precedence", f"job {a} precedes itself")
    job_succs = defaultdict(list)
    for a, b in instance.job_precedence:
        if a != b:
            job_succs[a].append(b)
    cycle = _find_cycle(range(n_jobs), job_succs)
    if cycle:
        report.add("cyclic job precedence", " -> ".join(map(str, cycle)))

    for job in instance.jobs:
        if not job.tasks:
            report.add("empty job", f"job {job.id} has no tasks")
        if job.due_date is not None:
            if job_succs.get(job.id):
                report.add("due date", f"job {job.id} has a due date but also successor jobs")
            if job.due_date < 0 or math.isnan(job.due_date):
                report.add("due date", f"job {job.id} due date {job.due_date} is negative")
        for j, spec in enumerate(job.tasks):
            where = f"task ({job.id}, {j})"
            if spec.release_time < 0 or math.isnan(spec.release_time):
                report.add("release time", f"{where} release {spec.release_time} < 0")
            if not spec.alternatives:
                report.add("empty alternative set", f"{where} has no station alternatives")
            seen = set()
            for alt in spec.alternatives:
                if alt.station in seen:
                    report.add("duplicate station", f"{where} lists station {alt.station} twice")
                seen.add(alt.station)
                if not 0 <= alt.station < n_st:
                    report.add("unknown station", f"{where} references station {alt.station}")
                    continue
                needs_setup = instance.stations[alt.station].requires_setup
                if not alt.processing_workers:
                    report.add("empty worker set", f"{where} has no processing worker on station {alt.station}")
                if needs_setup and not alt.setup_workers:
                    report.add("empty worker set", f"{where} has no setup worker on station {alt.station}")
                for kind, mapping in (("setup", alt.setup_workers), ("processing", alt.processing_workers)):
                    for w, d in mapping.items():
                        if not 0 <= w < n_wk:
                            report.add("unknown worker", f"{where} {kind} references worker {w}")
                        if not d > 0 or math.isinf(d):
                            report.add("duration", f"{where} {kind} duration {d} on station {alt.station} must be > 0")
            for k, u in spec.automation_degree_by_station.items():
                if not 0 <= u <= 1:
                    report.add("automation degree", f"{where} automation {u} on station {k} outside [0, 1]")
    return report


# ---------------------------------------------------------------------------
# topology


class CycleError(ValueError):
    def __init__(self, task):
        super().__init__(f"task graph contains a cycle through {task}")
        self.task = task


def layer_dag(nodes: Iterable, preds: Mapping) -> dict:
    """Group index (1-based) of each node: sources are group 1 and a node joins
    group g once all of its direct predecessors were visited in groups < g."""
    remaining = list(nodes)
    group: dict = {}
    g = 0
    while remaining:
        g += 1
        layer = [v for v in remaining if all(p in group for p in preds.get(v, ()))]
        if not layer:
            raise CycleError(remaining[0])
        for v in layer:
            group[v] = g
        chosen = set(layer)
        remaining = [v for v in remaining if v not in chosen]
    return group


def topology_groups(instance: ProblemInstance) -> dict[TaskId, int]:
    return layer_dag(instance.tasks, instance.task_predecessors)


# ---------------------------------------------------------------------------
# schedules and objectives


@dataclass(frozen=True)
class Operation:
    job: int
    task: int
    kind: str
    station: int
    worker: int
    start: float
    end: float
    slot: int | None = 0

    @property
    def task_id(self) -> TaskId:
        return (self.job, self.task)

    @property
    def key(self) -> tuple[int, int, str]:
        return (self.job, self.task, self.kind)


@dataclass
class Schedule:
    operations: dict[tuple[int, int, str], Operation] = field(default_factory=dict)
    tardiness: dict[int, float] = field(default_factory=dict)

    def add(self, op: Operation) -> None:
        self.operations[op.key] = op

    def __len__(self) -> int:
        return len(self.operations)

    def __iter__(self):
        return iter(self.operations.values())

    def processing(self, tid: TaskId) -> Operation | None:
        return self.operations.get((tid[0], tid[1], PROCESSING))

    def setup(self, tid: TaskId) -> Operation | None:
        return self.operations.get((tid[0], tid[1], SETUP))

    def sorted_operations(self) -> list[Operation]:
        return sorted(self.operations.values(), key=lambda o: (o.start, o.end, o.job, o.task, o.kind != SETUP))


def makespan(schedule: Schedule) -> float:
    if not schedule.operations:
        raise ValueError("makespan is undefined for an empty schedule")
    return max(op.end for op in schedule.operations.values())


def job_tardiness(schedule: Schedule, instance: ProblemInstance) -> dict[int, float]:
    out = {}
    for job in instance.jobs:
        if job.due_date is None:
            continue
        op = schedule.processing((job.id, job.last_task))
        if op is None:
            continue
        out[job.id] = max(0.0, op.end - job.due_date)
    return out


def total_tardiness(schedule: Schedule, instance: ProblemInstance) -> float:
    return sum(job_tardiness(schedule, instance).values())


@dataclass
class ScheduleMetrics:
    makespan: float
    total_tardiness: float
    flow_times: dict[TaskId, float] = field(default_factory=dict)
    wait_times: dict[TaskId, float] = field(default_factory=dict)
    # station -> [(time, tasks in system)], step function right-continuous
    wip_series: dict[int, list[tuple[float, int]]] = field(default_factory=dict)
    # station -> [(time, cumulative completions)]
    throughput_series: dict[int, list[tuple[float, int]]] = field(default_factory=dict)

    @property
    def mean_flow_time(self) -> float:
        return sum(self.flow_times.values()) / len(self.flow_times) if self.flow_times else 0.0

    @property
    def mean_wait_time(self) -> float:
        return sum(self.wait_times.values()) / len(self.wait_times) if self.wait_times else 0.0

    def average_wip(self, station: int, horizon: float | None = None) -> float:
        """Time-averaged number of tasks in the station's system over [0, horizon]."""
        horizon = self.makespan if horizon is None else horizon
        series = self.wip_series.get(station, [(0.0, 0)])
        area = 0.0
        for (t0, level), (t1, _) in zip(series, series[1:] + [(horizon, 0)]):
            area += level * (min(t1, horizon) - min(t0, horizon))
        return area / horizon if horizon > 0 else 0.0

    def throughput_rate(self, station: int, horizon: float | None = None) -> float:
        """Completions per time unit at ``station`` over [0, horizon]."""
        horizon = self.makespan if horizon is None else horizon
        series = [n for t, n in self.throughput_series.get(station, []) if t <= horizon]
        return (series[-1] if series else 0) / horizon if horizon > 0 else 0.0


def ready_times(schedule: Schedule, instance: ProblemInstance) -> dict[TaskId, float]:
    """Time each task's material is released and all predecessors are processed."""
    out = {}
    for tid in instance.tasks:
        t = instance.task(tid).release_time
        for p in instance.task_predecessors[tid]:
            op = schedule.processing(p)
            if op is not None:
                t = max(t, op.end)
        out[tid] = t
    return out


def compute_metrics(schedule: Schedule, instance: ProblemInstance) -> ScheduleMetrics:
    """Objectives plus the logistic accumulators of a decoded schedule.

    A task is "in the system" of its station from its ready time until its
    processing completes; flow time is measured over the same interval, so
    time-averaged WIP, throughput and mean flow time obey Little's law.
    """
    ready = ready_times(schedule, instance)
    flow, wait = {}, {}
    deltas: dict[int, list[tuple[float, int]]] = defaultdict(list)
    completions: dict[int, list[float]] = defaultdict(list)
    for tid in instance.tasks:
        op = schedule.processing(tid)
        if op is None:
            continue
        flow[tid] = op.end - ready[tid]
        wait[tid] = op.start - ready[tid]
        deltas[op.station].append((ready[tid], +1))
        deltas[op.station].append((op.end, -1))
        completions[op.station].append(op.end)

    wip_series = {}
    for k in range(len(instance.stations)):
        level, series = 0, [(0.0, 0)]
        for t, d in sorted(deltas.get(k, []), key=lambda e: (e[0], e[1])):
            level += d
            if series[-1][0] == t:
                series[-1] = (t, level)
            else:
                series.append((t, level))
        wip_series[k] = series
    tp_series = {}
    for k in range(len(instance.stations)):
        series, n = [(0.0, 0)], 0
        for t in sorted(completions.get(k, [])):
            n += 1
            if series[-1][0] == t:
                series[-1] = (t, n)
            else:
                series.append((t, n))
        tp_series[k] = series

    return ScheduleMetrics(
        makespan=makespan(schedule),
        total_tardiness=total_tardiness(schedule, instance),
        flow_times=flow,
        wait_times=wait,
        wip_series=wip_series,
        throughput_series=tp_series,
    )


def scalarize(
    metrics: ScheduleMetrics,
    baseline: ScheduleMetrics,
    weights: tuple[float, float] = (0.5, 0.5),
) -> float:
    """Weighted sum of makespan and tardiness, each normalized by a baseline.

    The tardiness baseline is floored at one time unit so that instances whose
    baseline has no tardiness stay well defined. Lower is better.
    """
    if not baseline.makespan > 0:
        raise ValueError("baseline makespan must be positive")
    if baseline.total_tardiness < 0:
        raise ValueError("baseline tardiness must be non-negative")
    w1, w2 = weights
    return w1 * metrics.makespan / baseline.makespan + w2 * metrics.total_tardiness / max(
        baseline.total_tardiness, 1.0
    )


# ---------------------------------------------------------------------------
# feasibility oracle


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


def _close(a: float, b: float, tol: float = 1e-7) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def _ge(a: float, b: float) -> bool:
    """a >= b up to float slack."""
    return a >= b - 1e-7 * max(1.0, abs(a), abs(b))


def _load_sweep(intervals: list[tuple[float, float, float]]) -> tuple[float, float] | None:
    """Max of summed loads over time; returns (time, load) of the first
    overload above 1.0 or None. Ends are processed before starts at equal times."""
    events = []
    for s, e, load in intervals:
        if e - s <= 0:
            continue
        events.append((s, 1, load))
        events.append((e, 0, -load))
    events.sort(key=lambda x: (x[0], x[1]))
    level = 0.0
    for t, _, d in events:
        level += d
        if level > 1.0 + 1e-7:
            return t, level
    return None


def check_schedule_feasibility(instance: ProblemInstance, schedule: Schedule) -> list[Violation]:
    """Check ``schedule`` against every constraint family of the model.

    Returns one :class:`Violation` per broken constraint instance; an empty
    list means the schedule is feasible.
    """
    out: list[Violation] = []
    add = lambda kind, msg: out.append(Violation(kind, msg))  # noqa: E731
    ops = schedule.operations

    # structure: exactly the required operations, sane intervals
    for tid in instance.tasks:
        p = ops.get((tid[0], tid[1], PROCESSING))
        if p is None:
            add("StructuralViolation", f"missing processing operation of task {tid}")
            continue
        s = ops.get((tid[0], tid[1], SETUP))
        if 0 <= p.station < len(instance.stations) and instance.stations[p.station].requires_setup:
            if s is None:
                add("StructuralViolation", f"missing setup operation of task {tid} on station {p.station}")
        elif s is not None:
            add("StructuralViolation", f"task {tid} has a setup on station {p.station} which needs none")
    known = set(instance.tasks)
    for key, op in ops.items():
        if (op.job, op.task) not in known or op.kind not in (SETUP, PROCESSING) or key != op.key:
            add("StructuralViolation", f"unexpected operation {key}")
        if op.start < -1e-9 or not _ge(op.end, op.start):
            add("StructuralViolation", f"operation {key} has interval [{op.start}, {op.end}]")
    if out:
        return out

    # station / worker assignment validity and durations
    for tid in instance.tasks:
        spec = instance.task(tid)
        p = ops[(tid[0], tid[1], PROCESSING)]
        s = ops.get((tid[0], tid[1], SETUP))
        try:
            alt = spec.alternative(p.station)
        except KeyError:
            add("AssignmentViolation", f"task {tid} assigned to non-alternative station {p.station}")
            continue
        if s is not None and s.station != p.station:
            add("AssignmentViolation", f"task {tid} setup on station {s.station} but processing on {p.station}")
        if p.worker not in alt.processing_workers:
            add("AssignmentViolation", f"worker {p.worker} cannot process task {tid} on station {p.station}")
        elif not _close(p.end - p.start, alt.processing_workers[p.worker]):
            add(
                "DurationViolation",
                f"task {tid} processing lasts {p.end - p.start}, expected {alt.processing_workers[p.worker]}",
            )
        if s is not None and s.worker not in alt.setup_workers:
            add("AssignmentViolation", f"worker {s.worker} cannot set up task {tid} on station {p.station}")
        nslots = instance.stations[p.station].slots
        for op in (p, s):
            if op is None:
                continue
            if nslots > 1 and op.slot is None:
                add("StructuralViolation", f"operation {op.key} on multi-slot station {op.station} lacks a slot")
            elif op.slot is not None and not 0 <= op.slot < nslots:
                add("AssignmentViolation", f"operation {op.key} uses slot {op.slot} of station {op.station}")
        if s is not None and s.slot != p.slot and nslots > 1:
            add("SetupAdjacencyViolation", f"task {tid} set up on slot {s.slot} but processed on slot {p.slot}")

    # release times
    for tid in instance.tasks:
        p = ops[(tid[0], tid[1], PROCESSING)]
        r = instance.task(tid).release_time
        if not _ge(p.start, r):
            add("ReleaseTimeViolation", f"task {tid} processing starts at {p.start} before release {r}")

    # setup before processing
    for tid in instance.tasks:
        s = ops.get((tid[0], tid[1], SETUP))
        p = ops[(tid[0], tid[1], PROCESSING)]
        if s is not None and not _ge(p.start, s.end):
            add("SetupOrderViolation", f"task {tid} processing starts at {p.start} before its setup ends at {s.end}")

    # within-job order and job precedence
    for job in instance.jobs:
        for j in range(1, len(job.tasks)):
            prev = ops[(job.id, j - 1, PROCESSING)]
            cur = ops[(job.id, j, PROCESSING)]
            if not _ge(cur.start, prev.end):
                add("TaskOrderViolation", f"task {(job.id, j)} starts at {cur.start} before {(job.id, j - 1)} ends at {prev.end}")
        first = ops[(job.id, 0, PROCESSING)]
        for pj in instance.job_predecessors[job.id]:
            last = ops[(pj, instance.jobs[pj].last_task, PROCESSING)]
            if not _ge(first.start, last.end):
                add(
                    "JobPrecedenceViolation",
                    f"job {job.id} starts at {first.start} before predecessor job {pj} ends at {last.end}",
                )

    # worker attention: setups take the worker fully, processing takes u
    by_worker: dict[int, list[tuple[float, float, float]]] = defaultdict(list)
    for op in ops.values():
        load = 1.0 if op.kind == SETUP else instance.automation((op.job, op.task), op.station)
        by_worker[op.worker].append((op.start, op.end, load))
    for w, intervals in sorted(by_worker.items()):
        hit = _load_sweep(intervals)
        if hit is not None:
            add("WorkerCapacityViolation", f"worker {w} attention {hit[1]:.6g} > 1 at time {hit[0]}")

    # station slots: per-slot exclusivity and overall concurrency
    by_slot: dict[tuple[int, int], list[Operation]] = defaultdict(list)
    by_station: dict[int, list[tuple[float, float, float]]] = defaultdict(list)
    for op in ops.values():
        by_station[op.station].append((op.start, op.end, 1.0 / instance.stations[op.station].slots))
        by_slot[(op.station, op.slot if op.slot is not None else 0)].append(op)
    for k, intervals in sorted(by_station.items()):
        hit = _load_sweep(intervals)
        if hit is not None:
            add(
                "StationCapacityViolation",
                f"station {k} runs {round(hit[1] * instance.stations[k].slots)} operations at time {hit[0]} "
                f"with {instance.stations[k].slots} slot(s)",
            )

    for (k, q), slot_ops in sorted(by_slot.items()):
        seq = sorted(slot_ops, key=lambda o: (o.start, o.end, o.kind != SETUP))
        for a, b in zip(seq, seq[1:]):
            if not _ge(b.start, a.end) and a.end - a.start > 0 and b.end - b.start > 0:
                add("StationCapacityViolation", f"{a.key} and {b.key} overlap on station {k} slot {q}")
        # a setup must be directly followed by its own processing on the slot
        for idx, op in enumerate(seq):
            if op.kind != SETUP:
                continue
            nxt = seq[idx + 1] if idx + 1 < len(seq) else None
            if nxt is None or nxt.kind != PROCESSING or nxt.task_id != op.task_id:
                add(
                    "SetupAdjacencyViolation",
                    f"setup of task {op.task_id} on station {k} slot {q} is not directly followed by its processing",
                )
        # sequence-dependent setup durations
        prev: TaskId | None = None
        station = instance.stations[k]
        for op in seq:
            if op.kind == PROCESSING:
                prev = op.task_id
                continue
            alt = instance.task(op.task_id).alternative(k)
            base = alt.setup_workers.get(op.worker)
            if base is None:
                continue
            expected = setup_time(base, station.factor(prev, op.task_id))
            if not _close(op.end - op.start, expected):
                add(
                    "DurationViolation",
                    f"setup of task {op.task_id} lasts {op.end - op.start}, expected {expected} "
                    f"(predecessor {prev})",
                )

    # tardiness bookkeeping, when the schedule carries it
    if schedule.tardiness:
        for job_id, sigma in job_tardiness(schedule, instance).items():
            got = schedule.tardiness.get(job_id)
            if got is None or not _close(got, sigma):
                add("TardinessViolation", f"job {job_id} tardiness {got}, expected {sigma}")
    return out


def setup_time(base: float, factor: float) -> float:
    return max(0.0, base * (1.0 + factor))
