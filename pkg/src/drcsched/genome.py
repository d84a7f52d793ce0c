"""Two-part value encoding of a schedule and the variation operators.

A genome holds one allocation gene per task (station, setup worker,
processing worker) and one dispatching rule per station. Genes are kept in a
canonical order, sorted by (topology group, job, task), so that positional
operators such as JOX are well defined.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence

from .instance import ProblemInstance, TaskId, topology_groups


class DispatchRule(str, enum.Enum):
    SPT = "SPT"
    LPT = "LPT"
    MTWR = "MTWR"
    STR = "STR"
    FIFO = "FIFO"


ALL_RULES: tuple[DispatchRule, ...] = tuple(DispatchRule)


@dataclass(frozen=True)
class AllocationGene:
    task: TaskId
    group: int
    station: int
    setup_worker: int | None
    processing_worker: int

    @property
    def resources(self) -> tuple[int, int | None, int]:
        return (self.station, self.setup_worker, self.processing_worker)


@dataclass(frozen=True)
class Genome:
    allocation: tuple[AllocationGene, ...]
    dispatching: tuple[DispatchRule, ...]
    instance_key: str = ""

    @cached_property
    def _positions(self) -> dict[TaskId, int]:
        return {g.task: i for i, g in enumerate(self.allocation)}

    def position(self, task: TaskId) -> int:
        return self._positions[task]

    def gene(self, task: TaskId) -> AllocationGene:
        return self.allocation[self._positions[task]]

    def with_gene(self, gene: AllocationGene) -> "Genome":
        genes = list(self.allocation)
        genes[self._positions[gene.task]] = gene
        return Genome(tuple(genes), self.dispatching, self.instance_key)

    def with_rule(self, station: int, rule: DispatchRule) -> "Genome":
        rules = list(self.dispatching)
        rules[station] = rule
        return Genome(self.allocation, tuple(rules), self.instance_key)

    def with_rules(self, rule: DispatchRule) -> "Genome":
        return Genome(self.allocation, tuple(rule for _ in self.dispatching), self.instance_key)

    def signature(self, rules: bool = True) -> tuple:
        """Hashable encoding; ``rules=False`` drops the dispatching part (for
        decodes where a policy picks the rules)."""
        return (tuple(g.resources for g in self.allocation), tuple(r.value for r in self.dispatching) if rules else ())


class IncompatibleGenomes(ValueError):
    pass


class UnschedulableTask(ValueError):
    pass


def canonical_order(instance: ProblemInstance) -> list[TaskId]:
    groups = topology_groups(instance)
    return sorted(instance.tasks, key=lambda t: (groups[t], t[0], t[1]))


def resource_options(instance: ProblemInstance, task: TaskId) -> list[tuple[int, int | None, int]]:
    """Every valid (station, setup worker, processing worker) triple of a task."""
    out = []
    for alt in instance.task(task).alternatives:
        if instance.stations[alt.station].requires_setup:
            setups = sorted(alt.setup_workers)
        else:
            setups = [None]
        for ws in setups:
            for wp in sorted(alt.processing_workers):
                out.append((alt.station, ws, wp))
    return out


def validate_genome(genome: Genome, instance: ProblemInstance) -> list[str]:
    problems = []
    if genome.instance_key and genome.instance_key != instance.fingerprint:
        problems.append("genome belongs to a different instance")
    groups = topology_groups(instance)
    tasks = [g.task for g in genome.allocation]
    if sorted(tasks) != sorted(instance.tasks) or len(set(tasks)) != len(tasks):
        problems.append("allocation genes do not cover every task exactly once")
    if len(genome.dispatching) != len(instance.stations):
        problems.append("dispatching subgenome size differs from station count")
    for g in genome.allocation:
        if g.task not in groups:
            continue
        if g.group != groups[g.task]:
            problems.append(f"task {g.task} has group {g.group}, expected {groups[g.task]}")
        if g.resources not in resource_options(instance, g.task):
            problems.append(f"task {g.task} has invalid resources {g.resources}")
    return problems


def random_topological_order(instance: ProblemInstance, rng: random.Random) -> list[TaskId]:
    """Random linear extension of the task DAG (random choice among ready tasks)."""
    preds = instance.task_predecessors
    missing = {t: len(preds[t]) for t in instance.tasks}
    ready = sorted(t for t, n in missing.items() if n == 0)
    order = []
    while ready:
        t = ready.pop(rng.randrange(len(ready)))
        order.append(t)
        for s in instance.task_successors[t]:
            missing[s] -= 1
            if missing[s] == 0:
                ready.append(s)
    if len(order) != len(instance.tasks):
        raise UnschedulableTask("task graph is cyclic")
    return order


def balanced_assignment(
    instance: ProblemInstance, order: Sequence[TaskId]
) -> dict[TaskId, tuple[int, int | None, int]]:
    """Greedy least-accumulated-load resource choice in the given task order.

    Station load and worker load are cumulative assigned durations; ties go
    to the lowest index.
    """
    st_load = [0.0] * len(instance.stations)
    wk_load = [0.0] * len(instance.workers)
    out = {}
    for t in order:
        spec = instance.task(t)
        if not spec.alternatives:
            raise UnschedulableTask(f"task {t} has no station alternative")
        alt = min(spec.alternatives, key=lambda a: (st_load[a.station], a.station))
        if not alt.processing_workers:
            raise UnschedulableTask(f"task {t} has no processing worker on station {alt.station}")
        wp = min(alt.processing_workers, key=lambda w: (wk_load[w], w))
        ws = None
        if instance.stations[alt.station].requires_setup:
            if not alt.setup_workers:
                raise UnschedulableTask(f"task {t} has no setup worker on station {alt.station}")
            ws = min(alt.setup_workers, key=lambda w: (wk_load[w], w))
            wk_load[ws] += alt.setup_workers[ws]
        d = alt.processing_workers[wp]
        st_load[alt.station] += d
        wk_load[wp] += d
        out[t] = (alt.station, ws, wp)
    return out


def build_genome(
    instance: ProblemInstance,
    assignment: dict[TaskId, tuple[int, int | None, int]],
    rules: Sequence[DispatchRule],
) -> Genome:
    groups = topology_groups(instance)
    genes = tuple(
        AllocationGene(t, groups[t], *assignment[t]) for t in canonical_order(instance)
    )
    return Genome(genes, tuple(DispatchRule(r) for r in rules), instance.fingerprint)


def init_population(instance: ProblemInstance, size: int, rng_seed: int) -> list[Genome]:
    """Load-balanced initial genomes with random dispatching rules."""
    if size < 1:
        raise ValueError("population size must be >= 1")
    rng = random.Random(rng_seed)
    pop = []
    for _ in range(size):
        order = random_topological_order(instance, rng)
        assignment = balanced_assignment(instance, order)
        rules = [rng.choice(ALL_RULES) for _ in instance.stations]
        pop.append(build_genome(instance, assignment, rules))
    return pop


def random_genome(instance: ProblemInstance, rng: random.Random) -> Genome:
    """Uniformly random valid resources and rules (not load balanced)."""
    assignment = {}
    for t in instance.tasks:
        options = resource_options(instance, t)
        if not options:
            raise UnschedulableTask(f"task {t} has no valid resource combination")
        assignment[t] = rng.choice(options)
    rules = [rng.choice(ALL_RULES) for _ in instance.stations]
    return build_genome(instance, assignment, rules)


def dispatch_genome(instance: ProblemInstance, rule: DispatchRule) -> Genome:
    """Load-balanced assignment in canonical task order with one rule everywhere."""
    assignment = balanced_assignment(instance, canonical_order(instance))
    return build_genome(instance, assignment, [rule] * len(instance.stations))


def jox_crossover(
    parent_a: Genome,
    parent_b: Genome,
    rng: random.Random,
    selected: Sequence[int] | None = None,
) -> Genome:
    """Job order crossover on the allocation subgenome.

    Between 1 and n-1 gene positions are taken from ``parent_a`` (or the
    explicit ``selected`` positions); all other tasks are filled from
    ``parent_b`` in its order. Dispatching rules come from ``parent_a``.
    """
    if parent_a.instance_key != parent_b.instance_key or len(parent_a.allocation) != len(parent_b.allocation):
        raise IncompatibleGenomes("parents belong to different instances")
    n = len(parent_a.allocation)
    if selected is None:
        if n < 2:
            return parent_a
        count = rng.randint(1, n - 1)
        selected = rng.sample(range(n), count)
    keep = set(selected)
    taken = {parent_a.allocation[p].task for p in keep}
    fill = iter(g for g in parent_b.allocation if g.task not in taken)
    genes = []
    for pos in range(n):
        genes.append(parent_a.allocation[pos] if pos in keep else next(fill))
    return Genome(tuple(genes), parent_a.dispatching, parent_a.instance_key)


@dataclass(frozen=True)
class Move:
    """A single mutation: resource flip of a task or rule flip of a station."""

    kind: str  # "resource" | "rule"
    target: object  # task id or station index
    old: object
    new: object

    @property
    def signature(self) -> tuple:
        return (self.kind, self.target, self.new)

    @property
    def inverse_signature(self) -> tuple:
        return (self.kind, self.target, self.old)


def _flippable(genome: Genome, instance: ProblemInstance) -> list[int]:
    return [
        i for i, g in enumerate(genome.allocation) if len(resource_options(instance, g.task)) > 1
    ]


def resource_flip(genome: Genome, instance: ProblemInstance, rng: random.Random) -> tuple[Genome, Move | None]:
    positions = _flippable(genome, instance)
    if not positions:
        return genome, None
    g = genome.allocation[rng.choice(positions)]
    options = [o for o in resource_options(instance, g.task) if o != g.resources]
    new = rng.choice(options)
    gene = replace(g, station=new[0], setup_worker=new[1], processing_worker=new[2])
    return genome.with_gene(gene), Move("resource", g.task, g.resources, new)


def rule_flip(genome: Genome, rng: random.Random) -> tuple[Genome, Move | None]:
    if not genome.dispatching:
        return genome, None
    k = rng.randrange(len(genome.dispatching))
    old = genome.dispatching[k]
    new = rng.choice([r for r in ALL_RULES if r != old])
    return genome.with_rule(k, new), Move("rule", k, old, new)


def mutation_move(
    genome: Genome, instance: ProblemInstance, rng: random.Random, rules: bool = True
) -> tuple[Genome, Move | None]:
    """With ``rules=False`` only resources move (the dispatching genes are
    inert when a policy picks the rules)."""
    if not rules or rng.random() < 0.5:
        return resource_flip(genome, instance, rng)
    return rule_flip(genome, rng)


def mutate(genome: Genome, instance: ProblemInstance, rng: random.Random, rules: bool = True) -> Genome:
    """Resource flip with probability 0.5, otherwise a dispatching-rule flip."""
    return mutation_move(genome, instance, rng, rules)[0]


def neighbor(
    genome: Genome, instance: ProblemInstance, rng: random.Random, rules: bool = True
) -> tuple[Genome, Move | None]:
    """A mutation that always changes something when anything can change:
    falls back to a rule flip when no task has an alternative resource."""
    child, move = mutation_move(genome, instance, rng, rules)
    if move is None and rules:
        child, move = rule_flip(genome, rng)
    return child, move
