"""Shared search plumbing: evaluation budget, scalarized evaluation, the
Pareto archive and the result record."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..genome import Genome
from ..instance import ProblemInstance, Schedule, ScheduleMetrics, scalarize
from ..sim import simulate


class BudgetExhausted(RuntimeError):
    pass


@dataclass
class SearchBudget:
    max_evaluations: int = 500
    consumed: int = 0

    def __post_init__(self):
        if self.max_evaluations < 1:
            raise ValueError("budget must allow at least one evaluation")

    @property
    def remaining(self) -> int:
        return max(0, self.max_evaluations - self.consumed)

    @property
    def exhausted(self) -> bool:
        return self.consumed >= self.max_evaluations

    def charge(self, n: int = 1) -> None:
        if self.consumed + n > self.max_evaluations:
            raise BudgetExhausted(f"{self.consumed} + {n} exceeds {self.max_evaluations}")
        self.consumed += n


def as_budget(budget: int | SearchBudget) -> SearchBudget:
    return budget if isinstance(budget, SearchBudget) else SearchBudget(int(budget))


def derive_seed(*parts: int) -> int:
    """Independent 32-bit seed for a (run, generation, slot, ...) coordinate."""
    return int(np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts]).generate_state(1)[0])


@dataclass(frozen=True)
class Evaluated:
    """One decoded candidate. ``source`` and ``seed`` replay the decode."""

    genome: Genome
    z: float
    makespan: float
    tardiness: float
    index: int
    source: Genome
    seed: int


@dataclass
class SearchResult:
    heuristic: str
    best_genome: Genome
    best_schedule: Schedule
    best_metrics: ScheduleMetrics
    best_z: float
    z_curve: list[float]  # best Z after each generation / iteration
    mean_z_curve: list[float]
    evaluations: int
    iteration_times: list[float]
    baseline: ScheduleMetrics
    seed: int = 0
    parallelism: int = 1
    pareto: list[tuple[float, float]] = field(default_factory=list)
    elites: list[tuple[Genome, float]] = field(default_factory=list)  # final survivors with their Z
    source_genome: Genome | None = None  # genome that, decoded with decode_seed, gives the best schedule
    decode_seed: int | None = None

    @property
    def generations(self) -> int:
        return len(self.z_curve)

    def progress(self) -> list[dict]:
        return [
            {"generation": g, "best_z": b, "mean_z": m, "wall_time": t}
            for g, (b, m, t) in enumerate(zip(self.z_curve, self.mean_z_curve, self.iteration_times))
        ]


def metrics_only(makespan: float, tardiness: float) -> ScheduleMetrics:
    return ScheduleMetrics(makespan=makespan, total_tardiness=tardiness)


class ParetoArchive:
    """Non-dominated (makespan, tardiness) points seen so far plus the
    Z-minimal pick among them; ties go to lower makespan, then lower
    tardiness, then earlier discovery."""

    def __init__(self):
        self.front: list[Evaluated] = []

    @staticmethod
    def _dominates(a: Evaluated, b: Evaluated) -> bool:
        return (
            a.makespan <= b.makespan
            and a.tardiness <= b.tardiness
            and (a.makespan < b.makespan or a.tardiness < b.tardiness)
        )

    def add(self, e: Evaluated) -> None:
        if any(self._dominates(f, e) or (f.makespan == e.makespan and f.tardiness == e.tardiness) for f in self.front):
            return
        self.front = [f for f in self.front if not self._dominates(e, f)] + [e]

    def best(self) -> Evaluated:
        if not self.front:
            raise ValueError("archive is empty")
        return min(self.front, key=lambda e: (e.z, e.makespan, e.tardiness, e.index))

    def points(self) -> list[tuple[float, float]]:
        return sorted((e.makespan, e.tardiness) for e in self.front)


# ---------------------------------------------------------------------------
# evaluation, optionally in worker processes

_WORKER: dict = {}


def _init_worker(instance: ProblemInstance, policy) -> None:
    _WORKER["instance"] = instance
    _WORKER["policy"] = policy


def _decode(instance, policy, genome: Genome, seed: int) -> tuple[Genome, float, float]:
    res = simulate(instance, genome, policy, seed)
    return res.genome, res.metrics.makespan, res.metrics.total_tardiness


def _decode_batch(batch: list[tuple[Genome, int]]) -> list[tuple[Genome, float, float]]:
    inst, pol = _WORKER["instance"], _WORKER["policy"]
    return [_decode(inst, pol, g, s) for g, s in batch]


def split_batches(items: Sequence, parts: int) -> list[list]:
    """Contiguous, nearly equal chunks (order preserving)."""
    parts = max(1, min(parts, len(items)))
    size, extra = divmod(len(items), parts)
    out, pos = [], 0
    for p in range(parts):
        n = size + (1 if p < extra else 0)
        out.append(list(items[pos : pos + n]))
        pos += n
    return out


class Evaluator:
    """Decodes genomes, charges the budget, scalarizes and archives.

    ``baseline`` may be set after construction (e.g. once the initial
    population is known); candidates decoded before that are scored when it
    is fixed via :meth:`set_baseline`.
    """

    def __init__(
        self,
        instance: ProblemInstance,
        budget: SearchBudget,
        baseline: ScheduleMetrics | None = None,
        policy=None,
        parallelism: int = 1,
    ):
        self.instance = instance
        self.budget = budget
        self.baseline = baseline
        self.policy = policy
        self.parallelism = max(1, int(parallelism))
        self.weights = instance.objective_weights
        self.archive = ParetoArchive()
        self.count = 0
        # policies that pick the rule themselves make the dispatching genes inert
        self.rules_active = policy is None or getattr(policy, "uses_genome_rules", False)
        self.seen: set = set()  # encodings decoded so far (inputs and written-back outputs)
        self._pool: ProcessPoolExecutor | None = None

    def __enter__(self):
        if self.parallelism > 1:
            self._pool = ProcessPoolExecutor(
                max_workers=self.parallelism, initializer=_init_worker, initargs=(self.instance, self.policy)
            )
        return self

    def __exit__(self, *exc):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def key(self, genome: Genome) -> tuple:
        """Encoding that determines the decode (rules excluded under a policy)."""
        return genome.signature(self.rules_active)

    def z(self, makespan: float, tardiness: float) -> float:
        return scalarize(metrics_only(makespan, tardiness), self.baseline, self.weights)

    def set_baseline(self, baseline: ScheduleMetrics) -> None:
        self.baseline = baseline

    def decode_many(self, items: Sequence[tuple[Genome, int]]) -> list[tuple[Genome, float, float]]:
        """Decode (genome, seed) pairs and charge one evaluation each."""
        self.budget.charge(len(items))
        if self._pool is None or len(items) < 2:
            return [_decode(self.instance, self.policy, g, s) for g, s in items]
        out = []
        for part in self._pool.map(_decode_batch, split_batches(items, self.parallelism)):
            out.extend(part)
        return out

    def record(self, source: Genome, seed: int, decoded: tuple[Genome, float, float]) -> Evaluated:
        genome, ms, tt = decoded
        e = Evaluated(genome, self.z(ms, tt), ms, tt, self.count, source, seed)
        self.count += 1
        self.seen.add(self.key(source))
        self.seen.add(self.key(genome))
        self.archive.add(e)
        return e

    def evaluate_many(self, items: Sequence[tuple[Genome, int]]) -> list[Evaluated]:
        decoded = self.decode_many(items)
        return [self.record(g, s, d) for (g, s), d in zip(items, decoded)]

    def evaluate(self, genome: Genome, seed: int) -> Evaluated:
        return self.evaluate_many([(genome, seed)])[0]

    def finish(self, heuristic: str, z_curve, mean_curve, times, seed: int, elites=()) -> SearchResult:
        best = self.archive.best()
        res = simulate(self.instance, best.source, self.policy, best.seed)
        return SearchResult(
            heuristic=heuristic,
            best_genome=res.genome,
            best_schedule=res.schedule,
            best_metrics=res.metrics,
            best_z=best.z,
            z_curve=list(z_curve),
            mean_z_curve=list(mean_curve),
            evaluations=self.budget.consumed,
            iteration_times=list(times),
            baseline=self.baseline,
            seed=seed,
            parallelism=self.parallelism,
            pareto=self.archive.points(),
            elites=[(e.genome, e.z) for e in elites],
            source_genome=best.source,
            decode_seed=best.seed,
        )


class Stopwatch:
    def __init__(self):
        self.t = time.perf_counter()

    def lap(self) -> float:
        now = time.perf_counter()
        dt, self.t = now - self.t, now
        return dt
