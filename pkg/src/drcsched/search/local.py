"""Trajectory methods: simulated annealing with restarts and tabu search."""

from __future__ import annotations

import math
import random
import statistics
from collections import deque
from dataclasses import dataclass

from ..genome import Genome, neighbor
from ..instance import ProblemInstance, ScheduleMetrics
from .core import Evaluated, Evaluator, SearchBudget, SearchResult, Stopwatch, as_budget, derive_seed, metrics_only


@dataclass(frozen=True)
class SaConfig:
    calibration_steps: int = 5  # greedy steps whose |dZ| set the start temperature
    initial_acceptance: float = 0.8  # acceptance probability of the median |dZ|
    cooling: float = 0.95
    restart_after: int = 20  # non-improving steps before jumping back to the best
    min_temperature: float = 1e-12

    def __post_init__(self):
        if not 0 < self.cooling < 1:
            raise ValueError("cooling factor must lie in (0, 1)")
        if not 0 < self.initial_acceptance < 1:
            raise ValueError("initial acceptance must lie in (0, 1)")


@dataclass(frozen=True)
class TsConfig:
    tenure: int = 10
    neighbors: int = 10


def accept(delta: float, temperature: float, u: float) -> bool:
    """Metropolis criterion; a zero temperature degrades to hill climbing."""
    if delta <= 0:
        return True
    if temperature <= 0:
        return False
    return u < math.exp(-delta / temperature)


def anneal(
    ev: Evaluator,
    start: Evaluated,
    steps: int,
    rng: random.Random,
    seed_base: tuple[int, ...],
    cfg: SaConfig = SaConfig(),
    on_step=None,
) -> Evaluated:
    """Run up to ``steps`` annealing steps from an already evaluated start.

    Returns the best candidate seen (possibly ``start``). Every neighbor costs
    one evaluation; the loop stops early when the budget runs out.
    """
    current = best = start
    deltas: list[float] = []
    temperature = None
    stall = 0
    for step in range(steps):
        if ev.budget.exhausted:
            break
        cand_genome, _ = neighbor(current.genome, ev.instance, rng, ev.rules_active)
        cand = ev.evaluate(cand_genome, derive_seed(*seed_base, step))
        delta = cand.z - current.z
        u = rng.random()
        if temperature is None:
            # calibration phase: greedy moves, collect |dZ|
            if delta != 0:
                deltas.append(abs(delta))
            if delta <= 0:
                current = cand
            if step + 1 >= cfg.calibration_steps:
                med = statistics.median(deltas) if deltas else 1e-3 * max(abs(current.z), 1e-9)
                temperature = med / math.log(1 / cfg.initial_acceptance)
        else:
            if accept(delta, temperature, u):
                current = cand
            temperature = max(temperature * cfg.cooling, cfg.min_temperature)
        if cand.z < best.z:
            best, stall = cand, 0
        else:
            stall += 1
            if stall >= cfg.restart_after:
                current, stall = best, 0
        if on_step is not None:
            on_step(best, cand)
    return best


def _start_eval(ev: Evaluator, start: Genome, seed: int) -> Evaluated:
    decoded = ev.decode_many([(start, seed)])[0]
    if ev.baseline is None:
        ev.set_baseline(metrics_only(decoded[1], decoded[2]))
    return ev.record(start, seed, decoded)


def run_sars(
    instance: ProblemInstance,
    start: Genome,
    budget: int | SearchBudget = 500,
    rng_seed: int = 0,
    *,
    baseline: ScheduleMetrics | None = None,
    config: SaConfig = SaConfig(),
    policy=None,
) -> SearchResult:
    """Simulated annealing with restarts from ``start``.

    The start evaluation counts against the budget; without an explicit
    baseline the start's own metrics are used for normalization.
    """
    budget = as_budget(budget)
    rng = random.Random(rng_seed)
    ev = Evaluator(instance, budget, baseline, policy)
    watch = Stopwatch()
    first = _start_eval(ev, start, derive_seed(rng_seed, 0))
    curve, means, times = [first.z], [first.z], [watch.lap()]

    def on_step(best, cand):
        curve.append(best.z)
        means.append(cand.z)
        times.append(watch.lap())

    anneal(ev, first, budget.remaining, rng, (rng_seed, 1), config, on_step)
    return ev.finish("sars", curve, means, times, rng_seed)


def run_ts(
    instance: ProblemInstance,
    start: Genome,
    budget: int | SearchBudget = 500,
    rng_seed: int = 0,
    *,
    baseline: ScheduleMetrics | None = None,
    config: TsConfig = TsConfig(),
    policy=None,
) -> SearchResult:
    """Tabu search over sampled flip neighborhoods.

    Each step samples ``config.neighbors`` moves (one evaluation each) and
    takes the best admissible one: not tabu, or tabu but better than the
    global best (aspiration). If all are tabu without aspiration, the oldest
    tabu entry is evicted and the best neighbor taken. Reversing a taken move
    is tabu for ``config.tenure`` steps.
    """
    budget = as_budget(budget)
    rng = random.Random(rng_seed)
    ev = Evaluator(instance, budget, baseline, policy)
    watch = Stopwatch()
    current = best = _start_eval(ev, start, derive_seed(rng_seed, 0))
    curve, means, times = [best.z], [best.z], [watch.lap()]
    tabu: deque = deque(maxlen=config.tenure)
    step = 0
    while not budget.exhausted:
        step += 1
        n = min(config.neighbors, budget.remaining)
        moves = [neighbor(current.genome, instance, rng, ev.rules_active) for _ in range(n)]
        seeds = [derive_seed(rng_seed, step, i) for i in range(n)]
        cands = ev.evaluate_many([(g, s) for (g, _), s in zip(moves, seeds)])
        chosen = select_tabu_move(cands, [m for _, m in moves], tabu, best.z)
        cand, move = cands[chosen], moves[chosen][1]
        current = cand
        if move is not None:
            tabu.append(move.inverse_signature)
        if cand.z < best.z:
            best = cand
        curve.append(best.z)
        means.append(sum(c.z for c in cands) / len(cands))
        times.append(watch.lap())
    return ev.finish("ts", curve, means, times, rng_seed)


def select_tabu_move(cands: list[Evaluated], moves: list, tabu: deque, best_z: float) -> int:
    """Index of the neighbor to move to; may evict the oldest tabu entry."""
    order = sorted(range(len(cands)), key=lambda i: (cands[i].z, i))
    for i in order:
        m = moves[i]
        is_tabu = m is not None and m.signature in tabu
        if not is_tabu or cands[i].z < best_z:
            return i
    if tabu:
        tabu.popleft()
    return order[0]
