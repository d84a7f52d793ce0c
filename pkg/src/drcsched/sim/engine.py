"""Event-driven decoder turning a genome into a schedule.

Every station owns ``slots`` identical workplaces. A free slot sorts the
station's wait queue with a dispatching rule and commits to the first task
whose predecessors are all committed somewhere. The committed task is set up
right away (left-shifted setup) if the station needs setups, then waits until
its material is released and its predecessors are processed, and finally runs
its processing operation. Workers are shared through a FIFO request queue and
may serve several operations at once as long as the summed attention stays
within 1.0 (setup = 1.0, processing = automation degree of the task).

Committing only tasks whose predecessors are already committed makes the
decoder deadlock-free: commitments form a topological order of the task DAG.
"""

from __future__ import annotations

import enum
import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from ..genome import DispatchRule, Genome
from ..instance import (
    EPS,
    PROCESSING,
    SETUP,
    Operation,
    ProblemInstance,
    Schedule,
    TaskId,
    compute_metrics,
    job_tardiness,
    setup_time,
    topology_groups,
)


class Flip(str, enum.Enum):
    SF = "SF"  # move the second-priority task to another station
    WF = "WF"  # give the first-priority task another processing worker
    NF = "NF"


class Phase(str, enum.Enum):
    FREE = "Free"
    SETUP = "Setup"
    WAITING = "Waiting"
    PROCESSING = "Processing"


class DeadlockError(RuntimeError):
    def __init__(self, blocked: Sequence[TaskId]):
        super().__init__(f"no event can fire while tasks remain unfinished: {list(blocked)}")
        self.blocked = list(blocked)


class Policy(Protocol):
    def decide(self, features: np.ndarray, state: "SimState", station: int) -> tuple[DispatchRule, Flip]: ...


@dataclass(frozen=True)
class DecisionPoint:
    time: float
    station: int
    candidates: tuple[TaskId, ...]
    features: np.ndarray
    rule: DispatchRule
    flip: Flip
    flip_applied: bool


@dataclass(frozen=True)
class TraceEvent:
    time: float
    station: int
    worker: int
    job: int
    task: int
    kind: str
    phase: str  # "start" | "end"


class SimResult(tuple):
    """(schedule, metrics, decisions) plus the possibly updated genome, the
    final simulation state and the optional event trace."""

    def __new__(cls, schedule, metrics, decisions, genome, state, trace):
        self = super().__new__(cls, (schedule, metrics, decisions))
        self.schedule = schedule
        self.metrics = metrics
        self.decisions = decisions
        self.genome = genome
        self.state = state
        self.trace = trace
        return self


# ---------------------------------------------------------------------------
# compiled instance view


class Compiled:
    """Index-based, read-only view of an instance for fast decoding."""

    def __init__(self, instance: ProblemInstance):
        self.instance = instance
        self.tasks: list[TaskId] = list(instance.tasks)
        self.index = {t: i for i, t in enumerate(self.tasks)}
        n = len(self.tasks)
        self.preds = [[self.index[p] for p in instance.task_predecessors[t]] for t in self.tasks]
        self.succs = [[self.index[s] for s in instance.task_successors[t]] for t in self.tasks]
        self.release = [instance.task(t).release_time for t in self.tasks]
        self.job_of = [t[0] for t in self.tasks]
        self.job_tasks = [[self.index[(job.id, j)] for j in range(len(job.tasks))] for job in instance.jobs]
        self.due = [job.due_date for job in instance.jobs]
        self.job_preds = [list(instance.job_predecessors[job.id]) for job in instance.jobs]
        groups = topology_groups(instance)
        self.group = [groups[t] for t in self.tasks]
        # task -> station -> (setup map, processing map, automation)
        self.alt: list[dict[int, tuple[dict, dict, float]]] = []
        for t in self.tasks:
            spec = instance.task(t)
            self.alt.append(
                {
                    a.station: (dict(a.setup_workers), dict(a.processing_workers), instance.automation(t, a.station))
                    for a in spec.alternatives
                }
            )
        self.n_stations = len(instance.stations)
        self.n_workers = len(instance.workers)
        self.slots = [st.slots for st in instance.stations]
        self.needs_setup = [st.requires_setup for st in instance.stations]
        self.factor = [
            {(self.index[a], self.index[b]): s for (a, b), s in st.sequence_factor.items() if a in self.index and b in self.index}
            for st in instance.stations
        ]
        # stations that may host a direct successor of each task
        self.succ_stations = [sorted({k for s in self.succs[i] for k in self.alt[s]}) for i in range(n)]


_COMPILED: dict[str, Compiled] = {}


def compile_instance(instance: ProblemInstance) -> Compiled:
    key = instance.fingerprint
    c = _COMPILED.get(key)
    if c is None:
        if len(_COMPILED) > 64:
            _COMPILED.clear()
        c = _COMPILED[key] = Compiled(instance)
    return c


def setup_duration(
    prev_task: TaskId | None,
    task: TaskId,
    station: int,
    worker: int,
    instance: ProblemInstance,
) -> float:
    """Raw setup duration of ``worker`` scaled by the station's sequence factor
    for the task processed directly before (none = neutral)."""
    try:
        base = instance.task(task).alternative(station).setup_workers[worker]
    except KeyError:
        raise ValueError(f"worker {worker} cannot set up task {task} on station {station}") from None
    return setup_time(base, instance.stations[station].factor(prev_task, task))


# ---------------------------------------------------------------------------
# state


@dataclass
class Slot:
    station: int
    index: int
    phase: Phase = Phase.FREE
    task: int | None = None
    last: int | None = None  # last task processed here (setup state)
    waiting_ready: bool = False


@dataclass
class SimState:
    c: Compiled
    station: list[int]
    setup_worker: list[int | None]
    proc_worker: list[int]
    rules: list[DispatchRule]
    clock: float = 0.0
    heap: list = field(default_factory=list)
    seq: int = 0
    arrival_seq: int = 0

    def __post_init__(self):
        n = len(self.c.tasks)
        self.committed = [False] * n
        self.done = [False] * n
        self.n_pred_committed = [0] * n
        self.n_pred_done = [0] * n
        self.slot_of: list[Slot | None] = [None] * n
        self.arrival = [0] * n
        self.queue: list[list[int]] = [[] for _ in range(self.c.n_stations)]
        self.slots = [[Slot(k, q) for q in range(self.c.slots[k])] for k in range(self.c.n_stations)]
        self.load = [0.0] * self.c.n_workers
        self.fifo: list[deque] = [deque() for _ in range(self.c.n_workers)]
        self.dispatch_pending = [False] * self.c.n_stations
        self.completed_at = [0] * self.c.n_stations
        self.n_done = 0
        self.op_start: dict[tuple[int, str], tuple[float, int, int, int]] = {}
        self.operations: list[Operation] = []
        self.commit_order: list[int] = []
        for t in range(n):
            self._enqueue(t, self.station[t])

    # -- helpers used by rules and features ---------------------------------

    def proc_duration(self, t: int) -> float:
        return self.c.alt[t][self.station[t]][1][self.proc_worker[t]]

    def setup_base(self, t: int) -> float:
        ws = self.setup_worker[t]
        if ws is None or not self.c.needs_setup[self.station[t]]:
            return 0.0
        return self.c.alt[t][self.station[t]][0][ws]

    def attention(self, t: int) -> float:
        return self.c.alt[t][self.station[t]][2]

    def job_remaining(self, job: int) -> float:
        return sum(self.proc_duration(t) for t in self.c.job_tasks[job] if not self.done[t])

    def chain_remaining(self, job: int, _memo: dict | None = None) -> float:
        """Remaining processing work on the longest chain of unfinished jobs ending in ``job``."""
        memo = {} if _memo is None else _memo
        if job in memo:
            return memo[job]
        own = self.job_remaining(job)
        up = max((self.chain_remaining(p, memo) for p in self.c.job_preds[job]), default=0.0)
        memo[job] = own + up
        return memo[job]

    def slack(self, job: int, memo: dict | None = None) -> float | None:
        due = self.c.due[job]
        if due is None:
            return None
        return due - self.clock - self.chain_remaining(job, memo)

    def available(self, k: int) -> list[int]:
        return [t for t in self.queue[k] if self.n_pred_committed[t] == len(self.c.preds[t])]

    def is_ready(self, t: int) -> bool:
        return self.n_pred_done[t] == len(self.c.preds[t]) and self.c.release[t] <= self.clock + EPS

    def processable(self, k: int) -> list[int]:
        """Tasks the station could start next: queued with every predecessor
        committed (setups may run ahead of material release)."""
        return self.available(k)

    def task_wip(self, t: int) -> float:
        return self.proc_duration(t) + self.setup_base(t)

    def station_wip(self) -> list[float]:
        wip = [0.0] * self.c.n_stations
        for t, d in enumerate(self.done):
            if not d:
                wip[self.station[t]] += self.task_wip(t)
        return wip

    def worker_wip(self) -> list[float]:
        """Attention-weighted unfinished work per worker."""
        wip = [0.0] * self.c.n_workers
        for t, d in enumerate(self.done):
            if d:
                continue
            wip[self.proc_worker[t]] += self.proc_duration(t) * self.attention(t)
            ws = self.setup_worker[t]
            if ws is not None and self.c.needs_setup[self.station[t]]:
                wip[ws] += self.setup_base(t)
        return wip

    def throughput(self, k: int) -> float:
        return self.completed_at[k] / self.clock if self.clock > 0 else 0.0

    def task_id(self, t: int) -> TaskId:
        return self.c.tasks[t]

    # -- event plumbing -----------------------------------------------------

    def push(self, time: float, prio: int, kind: str, data) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (time, prio, self.seq, kind, data))

    def _enqueue(self, t: int, k: int) -> None:
        self.arrival_seq += 1
        self.arrival[t] = self.arrival_seq
        self.queue[k].append(t)

    def request_dispatch(self, k: int) -> None:
        if not self.dispatch_pending[k]:
            self.dispatch_pending[k] = True
            self.push(self.clock, 1, "dispatch", k)


# ---------------------------------------------------------------------------
# dispatching rules


def sort_queue(rule: DispatchRule, queue: Sequence[int], state: SimState) -> list[int]:
    """Order task indices by ``rule``; ties break on (job, task index)."""
    tid = state.c.tasks
    if rule == DispatchRule.SPT:
        key = lambda t: (state.proc_duration(t), tid[t])  # noqa: E731
    elif rule == DispatchRule.LPT:
        key = lambda t: (-state.proc_duration(t), tid[t])  # noqa: E731
    elif rule == DispatchRule.MTWR:
        rem = {j: state.job_remaining(j) for j in {state.c.job_of[t] for t in queue}}
        key = lambda t: (-rem[state.c.job_of[t]], tid[t])  # noqa: E731
    elif rule == DispatchRule.STR:
        memo: dict = {}
        slack = {j: state.slack(j, memo) for j in {state.c.job_of[t] for t in queue}}

        def key(t):
            s = slack[state.c.job_of[t]]
            return (s is None, 0.0 if s is None else s, tid[t])

    elif rule == DispatchRule.FIFO:
        key = lambda t: (state.arrival[t], tid[t])  # noqa: E731
    else:
        raise ValueError(f"unknown rule {rule}")
    return sorted(queue, key=key)


# ---------------------------------------------------------------------------
# flips


def apply_flip(action: Flip, order: list[int], state: SimState, station: int) -> tuple[list[int], bool]:
    """Apply a station or worker flip to the sorted candidate list.

    Returns the (possibly shortened) order and whether the flip took effect.
    Flips without a valid alternative degrade to no flip.
    """
    c = state.c
    if action == Flip.SF:
        if len(order) < 2:
            return order, False
        t = order[1]
        options = [k for k in c.alt[t] if k != station]
        if not options:
            return order, False
        wip = state.station_wip()
        k2 = min(options, key=lambda k: (wip[k], k))
        setups, procs, _ = c.alt[t][k2]
        wwip = state.worker_wip()
        wp = state.proc_worker[t]
        if wp not in procs:
            wp = min(procs, key=lambda w: (wwip[w], w))
        ws = state.setup_worker[t]
        if c.needs_setup[k2]:
            if ws not in setups:
                ws = min(setups, key=lambda w: (wwip[w], w))
        else:
            ws = None
        state.queue[station].remove(t)
        state.station[t] = k2
        state.proc_worker[t] = wp
        state.setup_worker[t] = ws
        state._enqueue(t, k2)
        state.request_dispatch(k2)
        return [x for x in order if x != t], True
    if action == Flip.WF:
        if not order:
            return order, False
        t = order[0]
        procs = c.alt[t][station][1]
        options = [w for w in procs if w != state.proc_worker[t]]
        if not options:
            return order, False
        wwip = state.worker_wip()
        state.proc_worker[t] = min(options, key=lambda w: (wwip[w], w))
        return order, True
    return order, False


# ---------------------------------------------------------------------------
# main loop


class _Engine:
    def __init__(self, state: SimState, policy: Policy | None, trace: bool):
        self.s = state
        self.policy = policy
        self.trace: list[TraceEvent] | None = [] if trace else None
        self.decisions: list[DecisionPoint] = []

    # workers ---------------------------------------------------------------
    def request(self, w: int, amount: float, token) -> None:
        self.s.fifo[w].append((amount, token))
        self.grant(w)

    def grant(self, w: int) -> None:
        s = self.s
        q = s.fifo[w]
        while q and s.load[w] + q[0][0] <= 1.0 + EPS:
            amount, token = q.popleft()
            s.load[w] += amount
            self.start(*token)

    def release(self, w: int, amount: float) -> None:
        s = self.s
        s.load[w] -= amount
        if s.load[w] < EPS:
            s.load[w] = 0.0
        self.grant(w)

    # operations ------------------------------------------------------------
    def start(self, kind: str, slot: Slot) -> None:
        s = self.s
        t = slot.task
        k = slot.station
        if kind == SETUP:
            ws = s.setup_worker[t]
            base = s.c.alt[t][k][0][ws]
            prev = slot.last
            factor = s.c.factor[k].get((prev, t), 0.0) if prev is not None else 0.0
            dur = setup_time(base, factor)
            slot.phase = Phase.SETUP
            s.op_start[(t, SETUP)] = (s.clock, k, ws, slot.index)
            self.log(k, ws, t, SETUP, "start")
            s.push(s.clock + dur, 0, "setup_end", slot)
        else:
            wp = s.proc_worker[t]
            dur = s.c.alt[t][k][1][wp]
            slot.phase = Phase.PROCESSING
            s.op_start[(t, PROCESSING)] = (s.clock, k, wp, slot.index)
            self.log(k, wp, t, PROCESSING, "start")
            s.push(s.clock + dur, 0, "proc_end", slot)

    def finish(self, t: int, kind: str) -> None:
        s = self.s
        start, k, w, q = s.op_start.pop((t, kind))
        job, task = s.c.tasks[t]
        s.operations.append(Operation(job, task, kind, k, w, start, s.clock, q))
        self.log(k, w, t, kind, "end")

    def log(self, k, w, t, kind, phase) -> None:
        if self.trace is not None:
            job, task = self.s.c.tasks[t]
            self.trace.append(TraceEvent(self.s.clock, k, w, job, task, kind, phase))

    def try_process(self, slot: Slot) -> None:
        s = self.s
        t = slot.task
        if s.is_ready(t):
            slot.phase = Phase.WAITING
            self.request(s.proc_worker[t], s.attention(t), (PROCESSING, slot))
        else:
            slot.phase = Phase.WAITING
            slot.waiting_ready = True

    def commit(self, t: int, slot: Slot) -> None:
        s = self.s
        k = slot.station
        s.queue[k].remove(t)
        s.committed[t] = True
        s.commit_order.append(t)
        s.slot_of[t] = slot
        slot.task = t
        slot.waiting_ready = False
        for n in s.c.succs[t]:
            s.n_pred_committed[n] += 1
            if s.n_pred_committed[n] == len(s.c.preds[n]) and not s.committed[n]:
                s.request_dispatch(s.station[n])
        if s.c.needs_setup[k]:
            slot.phase = Phase.SETUP
            self.request(s.setup_worker[t], 1.0, (SETUP, slot))
        else:
            self.try_process(slot)

    def dispatch(self, k: int) -> None:
        s = self.s
        s.dispatch_pending[k] = False
        while True:
            free = next((sl for sl in s.slots[k] if sl.task is None), None)
            if free is None:
                return
            avail = s.available(k)
            if not avail:
                return
            rule = s.rules[k]
            if self.policy is not None:
                from .features import extract_features

                feats = extract_features(s, k)
                rule, flip = self.policy.decide(feats, s, k)
                order = sort_queue(rule, avail, s)
                order, applied = apply_flip(flip, order, s, k)
                self.decisions.append(
                    DecisionPoint(
                        s.clock, k, tuple(s.c.tasks[t] for t in avail), feats, DispatchRule(rule), Flip(flip), applied
                    )
                )
            else:
                order = sort_queue(rule, avail, s)
            self.commit(order[0], free)

    def run(self) -> None:
        s = self.s
        for t, r in enumerate(s.c.release):
            if r > 0:
                s.push(r, 0, "release", t)
        for k in range(s.c.n_stations):
            s.request_dispatch(k)
        n = len(s.c.tasks)
        while s.heap:
            time, _, _, kind, data = heapq.heappop(s.heap)
            s.clock = time
            if kind == "dispatch":
                self.dispatch(data)
            elif kind == "setup_end":
                slot = data
                t = slot.task
                self.finish(t, SETUP)
                self.release(s.setup_worker[t], 1.0)
                self.try_process(slot)
            elif kind == "proc_end":
                slot = data
                t = slot.task
                self.finish(t, PROCESSING)
                s.done[t] = True
                s.n_done += 1
                s.completed_at[slot.station] += 1
                slot.last = t
                slot.task = None
                slot.phase = Phase.FREE
                self.release(s.proc_worker[t], s.attention(t))
                for m in s.c.succs[t]:
                    s.n_pred_done[m] += 1
                    self._wake(m)
                s.request_dispatch(slot.station)
            elif kind == "release":
                self._wake(data)
        if s.n_done != n:
            raise DeadlockError([s.c.tasks[t] for t in range(n) if not s.done[t]])

    def _wake(self, t: int) -> None:
        slot = self.s.slot_of[t]
        if slot is not None and slot.task == t and slot.waiting_ready:
            if self.s.is_ready(t):
                slot.waiting_ready = False
                self.request(self.s.proc_worker[t], self.s.attention(t), (PROCESSING, slot))


class _RankedEngine(_Engine):
    """Dispatch by a global task priority. Stations that dispatch at the same
    instant are served highest-priority task first, so the order in which
    they claim shared workers follows the priority as well."""

    def __init__(self, state: SimState, rank: list[int]):
        super().__init__(state, None, False)
        self.rank = rank

    def dispatch(self, k: int) -> None:
        s = self.s
        pending = {k}
        while True:
            while s.heap and s.heap[0][0] == s.clock and s.heap[0][3] == "dispatch":
                pending.add(heapq.heappop(s.heap)[4])
            best = None
            for j in pending:
                free = next((sl for sl in s.slots[j] if sl.task is None), None)
                avail = s.available(j)
                if free is None or not avail:
                    continue
                t = min(avail, key=lambda x: self.rank[x])
                if best is None or self.rank[t] < self.rank[best[0]]:
                    best = (t, free)
            if best is None:
                break
            self.commit(*best)
        for j in pending:
            s.dispatch_pending[j] = False


def _genome_arrays(genome: Genome, c: Compiled):
    n = len(c.tasks)
    station = [0] * n
    ws: list[int | None] = [None] * n
    wp = [0] * n
    for g in genome.allocation:
        i = c.index[g.task]
        station[i] = g.station
        ws[i] = g.setup_worker
        wp[i] = g.processing_worker
    return station, ws, wp


def simulate(
    instance: ProblemInstance,
    genome: Genome,
    policy: Policy | None = None,
    rng_seed: int | None = None,
    *,
    trace: bool = False,
    writeback: bool = True,
) -> SimResult:
    """Decode ``genome`` into a schedule and its metrics.

    With a ``policy``, every dispatch that has at least one
    processable task (see :meth:`SimState.processable`) becomes a decision point where the policy picks the
    rule and an optional flip; flips are written back into the returned
    genome when ``writeback`` is set. ``rng_seed`` reseeds the policy's
    sampling stream (if it has one) so runs are reproducible.
    """
    if genome.instance_key and genome.instance_key != instance.fingerprint:
        raise ValueError("genome was built for a different instance")
    c = compile_instance(instance)
    station, ws, wp = _genome_arrays(genome, c)
    state = SimState(c, station, ws, wp, list(genome.dispatching))
    if policy is not None and rng_seed is not None and hasattr(policy, "reseed"):
        policy.reseed(rng_seed)
    eng = _Engine(state, policy, trace)
    eng.run()

    schedule = Schedule()
    for op in sorted(state.operations, key=lambda o: (o.job, o.task, o.kind)):
        schedule.add(op)
    schedule.tardiness = job_tardiness(schedule, instance)
    metrics = compute_metrics(schedule, instance)

    out_genome = genome
    if writeback and eng.decisions and any(d.flip_applied for d in eng.decisions):
        genes = []
        for g in genome.allocation:
            i = c.index[g.task]
            genes.append(
                type(g)(g.task, g.group, state.station[i], state.setup_worker[i], state.proc_worker[i])
            )
        out_genome = Genome(tuple(genes), genome.dispatching, genome.instance_key)
    return SimResult(schedule, metrics, eng.decisions, out_genome, state, eng.trace)


def evaluate(instance: ProblemInstance, genome: Genome, policy: Policy | None = None, rng_seed: int | None = None):
    """Shorthand returning only (metrics, genome)."""
    res = simulate(instance, genome, policy, rng_seed)
    return res.metrics, res.genome


def simulate_forced(instance: ProblemInstance, genome: Genome, order: Sequence[TaskId]) -> SimResult:
    """Decode with a fixed global task priority instead of dispatching rules:
    every station always commits its highest-priority available task, and
    simultaneous dispatches go highest-priority task first.

    Ranking tasks by the commit order of any rule-driven decode reproduces
    that decode, so enumerating all orders covers every schedule the
    dispatching rules can produce.
    """
    c = compile_instance(instance)
    station, ws, wp = _genome_arrays(genome, c)
    state = SimState(c, station, ws, wp, [DispatchRule.FIFO] * c.n_stations)
    rank = {c.index[t]: i for i, t in enumerate(order)}
    eng = _RankedEngine(state, [rank[i] for i in range(len(c.tasks))])
    eng.run()
    schedule = Schedule()
    for op in sorted(state.operations, key=lambda o: (o.job, o.task, o.kind)):
        schedule.add(op)
    schedule.tardiness = job_tardiness(schedule, instance)
    return SimResult(schedule, compute_metrics(schedule, instance), [], genome, state, None)
