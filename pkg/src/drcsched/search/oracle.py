"""Dispatching-rule baselines and the exhaustive oracle for tiny instances."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from ..genome import DispatchRule, build_genome, dispatch_genome, resource_options
from ..instance import ProblemInstance, Schedule, ScheduleMetrics, scalarize
from ..sim import simulate, simulate_forced
from .core import SearchBudget, SearchResult, Stopwatch, as_budget, metrics_only


def run_dispatch_baseline(
    instance: ProblemInstance,
    rule: DispatchRule | str,
    *,
    baseline: ScheduleMetrics | None = None,
    budget: int | SearchBudget = 1,
) -> SearchResult:
    """One decode: load-balanced resources and ``rule`` on every station."""
    rule = DispatchRule(str(rule).upper() if isinstance(rule, str) else rule)
    budget = as_budget(budget)
    budget.charge(1)
    watch = Stopwatch()
    genome = dispatch_genome(instance, rule)
    res = simulate(instance, genome)
    base = baseline or metrics_only(res.metrics.makespan, res.metrics.total_tardiness)
    z = scalarize(res.metrics, base, instance.objective_weights)
    return SearchResult(
        heuristic=rule.value.lower(),
        best_genome=res.genome,
        best_schedule=res.schedule,
        best_metrics=res.metrics,
        best_z=z,
        z_curve=[z],
        mean_z_curve=[z],
        evaluations=budget.consumed,
        iteration_times=[watch.lap()],
        baseline=base,
        pareto=[(res.metrics.makespan, res.metrics.total_tardiness)],
        source_genome=genome,
    )


class EnumerationTooLarge(ValueError):
    def __init__(self, size: int, cap: int):
        super().__init__(f"exhaustive enumeration needs {size} decodes, cap is {cap}")
        self.size = size
        self.cap = cap


def enumeration_size(instance: ProblemInstance) -> int:
    combos = math.prod(len(resource_options(instance, t)) for t in instance.tasks)
    return combos * math.factorial(len(instance.tasks))


@dataclass
class OracleResult:
    schedule: Schedule
    metrics: ScheduleMetrics
    z: float
    assignment: dict
    order: tuple
    decodes: int


def brute_force(
    instance: ProblemInstance,
    baseline: ScheduleMetrics,
    cap: int = 10**6,
) -> OracleResult:
    """Z-minimal schedule over every resource assignment and every global task
    priority order (each station always starts its highest-priority task).

    Ties are broken by lower makespan, then lower tardiness, then
    enumeration order.
    """
    size = enumeration_size(instance)
    if size > cap:
        raise EnumerationTooLarge(size, cap)
    tasks = list(instance.tasks)
    options = [resource_options(instance, t) for t in tasks]
    rules = [DispatchRule.FIFO] * len(instance.stations)
    best = None
    n = 0
    for combo in itertools.product(*options):
        assignment = dict(zip(tasks, combo))
        genome = build_genome(instance, assignment, rules)
        for order in itertools.permutations(tasks):
            res = simulate_forced(instance, genome, order)
            n += 1
            m = res.metrics
            key = (scalarize(m, baseline, instance.objective_weights), m.makespan, m.total_tardiness)
            if best is None or key < best[0]:
                best = (key, res, assignment, order)
    key, res, assignment, order = best
    return OracleResult(res.schedule, res.metrics, key[0], assignment, tuple(order), n)
