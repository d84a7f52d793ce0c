"""Uniform entry point over all heuristics, used by the CLI and scripts."""

from __future__ import annotations

from ..genome import init_population
from ..instance import ProblemInstance, ScheduleMetrics
from .core import SearchResult, derive_seed
from .ga import GaConfig, run_ga, run_gasa, run_gasa_rl
from .local import SaConfig, TsConfig, run_sars, run_ts
from .oracle import run_dispatch_baseline

HEURISTICS = ("str", "mtwr", "ts", "sars", "ga", "gasa", "gasa-rl")
_START_STREAM = 7


def reference_baseline(instance: ProblemInstance) -> ScheduleMetrics:
    """Metrics of the STR dispatch decode: the common normalization point
    when several heuristics are compared on one instance."""
    return run_dispatch_baseline(instance, "STR").best_metrics


def run_heuristic(
    name: str,
    instance: ProblemInstance,
    budget: int = 500,
    seed: int = 0,
    *,
    parallelism: int = 1,
    policy=None,
    baseline: ScheduleMetrics | None = None,
    ga: GaConfig = GaConfig(),
    sa: SaConfig = SaConfig(),
    ts: TsConfig = TsConfig(),
) -> SearchResult:
    """Run heuristic ``name`` (one of :data:`HEURISTICS`) for one seed.

    Trajectory methods start from a load-balanced random genome drawn from
    a seed-derived stream. Dispatch rules use exactly one evaluation.
    """
    if name in ("str", "mtwr"):
        return run_dispatch_baseline(instance, name.upper(), baseline=baseline)
    if name in ("ts", "sars"):
        start = init_population(instance, 1, derive_seed(seed, _START_STREAM))[0]
        if name == "ts":
            return run_ts(instance, start, budget, seed, baseline=baseline, config=ts)
        return run_sars(instance, start, budget, seed, baseline=baseline, config=sa)
    if name == "ga":
        return run_ga(instance, ga, budget, seed, parallelism, baseline=baseline)
    if name == "gasa":
        return run_gasa(instance, ga, budget, seed, parallelism, baseline=baseline)
    if name == "gasa-rl":
        return run_gasa_rl(instance, ga, budget, seed, parallelism, policy, baseline=baseline)
    raise ValueError(f"unknown heuristic {name!r}; choose from {HEURISTICS}")
