"""Genetic algorithm with adaptive rates and its memetic variants.

Generation 0 is the load-balanced initial population. Every later
generation breeds ``offspring`` children from the ``survivors`` best
individuals. Each child slot draws from its own random stream derived from
(run seed, generation, slot), so splitting the slots into parallel batches
does not change any result.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from ..genome import Genome, init_population, jox_crossover, mutate, neighbor
from ..instance import ProblemInstance, ScheduleMetrics
from .core import Evaluated, Evaluator, SearchBudget, SearchResult, Stopwatch, as_budget, derive_seed, metrics_only
from .local import SaConfig, anneal

_SA_STREAM = 1_000_003  # slot id reserved for the per-generation SA stream


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 50
    survivors: int = 8
    offspring: int = 20
    selection: str = "best"
    crossover_start: float = 0.1
    crossover_end: float = 0.9
    mutation_start: float = 0.9
    mutation_end: float = 0.1
    sa_probability: float = 0.5  # only used by the memetic variants
    sa_steps: int = 25
    sa: SaConfig = field(default_factory=SaConfig)

    def __post_init__(self):
        if self.selection != "best":
            raise ValueError("only 'best' survivor selection is implemented")
        if not 1 <= self.survivors <= self.population_size:
            raise ValueError("survivors must lie in [1, population_size]")
        if self.offspring < 1:
            raise ValueError("need at least one offspring per generation")
        for name in ("crossover_start", "crossover_end", "mutation_start", "mutation_end", "sa_probability"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")

    def expected_generations(self, budget: int, sa_probability: float) -> int:
        per_gen = self.offspring + sa_probability * self.sa_steps
        return max(1, math.ceil((budget - self.population_size) / per_gen))

    def rates(self, generation: int, expected: int) -> tuple[float, float]:
        """(crossover, mutation) probability for generation >= 1."""
        frac = min(1.0, (generation - 1) / max(1, expected - 1))
        pc = self.crossover_start + (self.crossover_end - self.crossover_start) * frac
        pm = self.mutation_start + (self.mutation_end - self.mutation_start) * frac
        return pc, pm


def baseline_of(candidates: list[tuple[float, float]], weights: tuple[float, float]) -> ScheduleMetrics:
    """The candidate with the lowest raw weighted sum (first one on ties)."""
    w1, w2 = weights
    ms, tt = min(candidates, key=lambda c: w1 * c[0] + w2 * c[1])
    return metrics_only(ms, tt)


def breed(
    survivors: list[Evaluated], instance: ProblemInstance, rng: random.Random, pc: float, pm: float, rules: bool = True
) -> Genome:
    a = survivors[rng.randrange(len(survivors))].genome
    if len(survivors) > 1:
        b = survivors[rng.randrange(len(survivors))].genome
    else:
        b = a
    child = jox_crossover(a, b, rng) if rng.random() < pc else a
    if rng.random() < pm:
        child = mutate(child, instance, rng, rules)
    return child


def breed_new(
    survivors: list[Evaluated],
    instance: ProblemInstance,
    rng: random.Random,
    pc: float,
    pm: float,
    seen: set,
    retries: int = 10,
    rules: bool = True,
) -> Genome:
    """Breed a child whose encoding was not evaluated before, if possible.

    Up to ``retries`` ordinary breeding attempts are made, then up to
    ``retries`` forced mutations of the last child; a duplicate is returned
    only when all of them fail (tiny, nearly exhausted search spaces).
    """
    key = lambda g: g.signature(rules)  # noqa: E731
    child = breed(survivors, instance, rng, pc, pm, rules)
    for _ in range(retries):
        if key(child) not in seen:
            return child
        child = breed(survivors, instance, rng, pc, pm, rules)
    for _ in range(retries):
        if key(child) not in seen:
            return child
        child, _ = neighbor(child, instance, rng, rules)
    return child


def _rank(pop: list[Evaluated]) -> list[Evaluated]:
    return sorted(pop, key=lambda e: (e.z, e.index))


def select_survivors(ranked: list[Evaluated], count: int, rules: bool = True) -> list[Evaluated]:
    """The ``count`` best distinct genomes; duplicates only fill up the rest."""
    seen, distinct, dupes = set(), [], []
    for e in ranked:
        sig = e.genome.signature(rules)
        (dupes if sig in seen else distinct).append(e)
        seen.add(sig)
    return (distinct + dupes)[:count]


def _memetic(
    name: str,
    instance: ProblemInstance,
    config: GaConfig,
    budget: int | SearchBudget,
    rng_seed: int,
    parallelism: int,
    sa_probability: float,
    policy,
    baseline: ScheduleMetrics | None,
) -> SearchResult:
    budget = as_budget(budget)
    if budget.remaining < config.population_size:
        raise ValueError(f"budget {budget.remaining} is smaller than the population size {config.population_size}")
    expected = config.expected_generations(budget.remaining, sa_probability)
    with Evaluator(instance, budget, baseline, policy, parallelism) as ev:
        watch = Stopwatch()
        initial = init_population(instance, config.population_size, rng_seed)
        items = [(g, derive_seed(rng_seed, 0, i)) for i, g in enumerate(initial)]
        decoded = ev.decode_many(items)
        if ev.baseline is None:
            ev.set_baseline(baseline_of([(d[1], d[2]) for d in decoded], instance.objective_weights))
        pop = _rank([ev.record(g, s, d) for (g, s), d in zip(items, decoded)])
        curve = [ev.archive.best().z]
        means = [sum(e.z for e in pop) / len(pop)]
        times = [watch.lap()]
        survivors = select_survivors(pop, config.survivors, ev.rules_active)

        gen = 0
        while not budget.exhausted:
            gen += 1
            pc, pm = config.rates(gen, expected)
            n = min(config.offspring, budget.remaining)
            children, pending = [], set()
            for slot in range(n):
                rng = random.Random(derive_seed(rng_seed, gen, slot))
                child = breed_new(survivors, instance, rng, pc, pm, ev.seen | pending, rules=ev.rules_active)
                pending.add(ev.key(child))
                children.append((child, derive_seed(rng_seed, gen, slot, 1)))
            offspring = ev.evaluate_many(children)
            pop = _rank(survivors + offspring)

            sa_rng = random.Random(derive_seed(rng_seed, gen, _SA_STREAM))
            if sa_probability > 0 and not budget.exhausted and sa_rng.random() < sa_probability:
                elite = pop[0]
                improved = anneal(
                    ev, elite, min(config.sa_steps, budget.remaining), sa_rng, (rng_seed, gen, _SA_STREAM), config.sa
                )
                if improved.z < elite.z:
                    pop = _rank(pop + [improved])

            survivors = select_survivors(pop, config.survivors, ev.rules_active)
            curve.append(ev.archive.best().z)
            means.append(sum(e.z for e in offspring) / len(offspring))
            times.append(watch.lap())
        return ev.finish(name, curve, means, times, rng_seed, survivors)


def run_ga(
    instance: ProblemInstance,
    config: GaConfig = GaConfig(),
    budget: int | SearchBudget = 500,
    rng_seed: int = 0,
    parallelism: int = 1,
    *,
    baseline: ScheduleMetrics | None = None,
) -> SearchResult:
    """Plain GA (no exploitation step)."""
    return _memetic("ga", instance, config, budget, rng_seed, parallelism, 0.0, None, baseline)


def run_gasa(
    instance: ProblemInstance,
    config: GaConfig = GaConfig(),
    budget: int | SearchBudget = 500,
    rng_seed: int = 0,
    parallelism: int = 1,
    *,
    baseline: ScheduleMetrics | None = None,
) -> SearchResult:
    """GA whose best individual is annealed with probability ``config.sa_probability``."""
    return _memetic("gasa", instance, config, budget, rng_seed, parallelism, config.sa_probability, None, baseline)


def run_gasa_rl(
    instance: ProblemInstance,
    config: GaConfig = GaConfig(),
    budget: int | SearchBudget = 500,
    rng_seed: int = 0,
    parallelism: int = 1,
    policy=None,
    *,
    baseline: ScheduleMetrics | None = None,
) -> SearchResult:
    """GASA where every decode consults ``policy`` at its decision points."""
    if policy is None:
        raise ValueError("run_gasa_rl needs a policy")
    return _memetic("gasa-rl", instance, config, budget, rng_seed, parallelism, config.sa_probability, policy, baseline)
