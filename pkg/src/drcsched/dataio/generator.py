"""Synthetic instance generator with presets for the two synthetic regimes
(deep job graphs on few resources vs. flat jobs on many flexible stations)
and a sparse "real-world-like" shape."""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, replace

from ..instance import (
    FACTOR_MAX,
    FACTOR_MIN,
    Job,
    ProblemInstance,
    Station,
    TaskAlternative,
    TaskSpec,
    Worker,
    validate_instance,
)


@dataclass(frozen=True)
class GeneratorConfig:
    n_jobs: int = 6
    tasks_per_job: tuple[int, int] = (2, 3)
    n_tasks: int | None = None  # exact total, overrides tasks_per_job sampling
    n_stations: int = 2
    n_workers: int = 2
    slots: tuple[int, int] = (1, 1)
    setup_station_share: float = 1.0  # probability that a station needs setups
    alt_station_density: float = 0.5  # probability of each extra station alternative
    capability_density: float = 0.7  # probability a worker is capable of an operation
    setup_duration: tuple[float, float] = (5, 20)
    processing_duration: tuple[float, float] = (20, 80)
    worker_speed_spread: float = 0.2  # durations vary by +-spread across workers/stations
    factor_density: float = 0.5  # probability that a task pair carries a sequence factor
    factor_range: tuple[float, float] = (FACTOR_MIN, FACTOR_MAX)
    automation_share: float = 0.3  # probability a processing operation is partially automated
    automation_range: tuple[float, float] = (0.2, 0.8)
    due_tightness: float = 1.3
    release_spread: float = 1.0
    precedence_prob: float = 0.6  # probability a job feeds into a later job
    objective_weights: tuple[float, float] = (0.5, 0.5)
    integer_times: bool = True
    seed: int = 0
    name: str = ""

    def validate(self) -> None:
        if self.n_jobs < 1 or self.n_stations < 1 or self.n_workers < 1:
            raise ValueError("need at least one job, station and worker")
        lo, hi = self.tasks_per_job
        if lo < 1 or hi < lo:
            raise ValueError(f"bad tasks_per_job {self.tasks_per_job}")
        if self.n_tasks is not None and not (self.n_jobs <= self.n_tasks):
            raise ValueError("n_tasks must be at least n_jobs")
        if self.slots[0] < 1 or self.slots[1] < self.slots[0]:
            raise ValueError(f"bad slots range {self.slots}")
        for name in ("alt_station_density", "capability_density"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        for name in ("setup_station_share", "factor_density", "automation_share", "precedence_prob"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        a, b = self.factor_range
        if not FACTOR_MIN <= a <= b <= FACTOR_MAX:
            raise ValueError("factor range must lie inside [-1, 0.5]")
        for rng in (self.setup_duration, self.processing_duration):
            if not 0 < rng[0] <= rng[1]:
                raise ValueError("durations must be positive")
        u0, u1 = self.automation_range
        if not 0 <= u0 <= u1 <= 1:
            raise ValueError("automation range must lie in [0, 1]")
        if self.due_tightness <= 0:
            raise ValueError("due tightness must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


PRESETS: dict[str, GeneratorConfig] = {
    # 6 jobs / 14 tasks, 2 stations / 2 workers, deep job graph
    "gbrt01": GeneratorConfig(
        n_jobs=6,
        n_tasks=14,
        tasks_per_job=(2, 3),
        n_stations=2,
        n_workers=2,
        alt_station_density=0.5,
        capability_density=0.7,
        precedence_prob=0.8,
        name="gbrt01",
    ),
    # 3 jobs / 10 tasks, 6 stations / 3 workers, flat jobs, flexible stations
    "gbrt02": GeneratorConfig(
        n_jobs=3,
        n_tasks=10,
        tasks_per_job=(3, 4),
        n_stations=6,
        n_workers=3,
        slots=(1, 2),
        alt_station_density=0.5,
        capability_density=0.6,
        precedence_prob=0.0,
        name="gbrt02",
    ),
    # sparse capabilities and few flexible stations
    "realworld": GeneratorConfig(
        n_jobs=60,
        n_tasks=120,
        tasks_per_job=(1, 4),
        n_stations=12,
        n_workers=20,
        slots=(1, 3),
        setup_station_share=0.6,
        alt_station_density=0.08,
        capability_density=0.25,
        processing_duration=(1, 12),
        setup_duration=(1, 4),
        precedence_prob=0.5,
        factor_density=0.1,
        name="realworld",
    ),
    # brute-force sized
    "tiny": GeneratorConfig(
        n_jobs=2,
        n_tasks=3,
        tasks_per_job=(1, 2),
        n_stations=2,
        n_workers=2,
        alt_station_density=0.6,
        capability_density=0.6,
        processing_duration=(5, 20),
        setup_duration=(2, 8),
        precedence_prob=0.5,
        name="tiny",
    ),
}


def preset(name: str, **overrides) -> GeneratorConfig:
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(cfg, **overrides)


def _split_tasks(cfg: GeneratorConfig, rng: random.Random) -> list[int]:
    if cfg.n_tasks is None:
        return [rng.randint(*cfg.tasks_per_job) for _ in range(cfg.n_jobs)]
    counts = [1] * cfg.n_jobs
    for _ in range(cfg.n_tasks - cfg.n_jobs):
        open_jobs = [i for i, c in enumerate(counts) if c < cfg.tasks_per_job[1]] or list(range(cfg.n_jobs))
        counts[rng.choice(open_jobs)] += 1
    return counts


def generate_instance(cfg: GeneratorConfig) -> ProblemInstance:
    """Draw a random instance; deterministic for a given config (incl. seed)."""
    cfg.validate()
    rng = random.Random(cfg.seed)
    rnd = (lambda x: float(max(1, round(x)))) if cfg.integer_times else (lambda x: float(x))

    stations_setup = [rng.random() < cfg.setup_station_share for _ in range(cfg.n_stations)]
    slots = [rng.randint(*cfg.slots) for _ in range(cfg.n_stations)]
    counts = _split_tasks(cfg, rng)

    # each job feeds at most one later job (assembly in-tree)
    precedence = set()
    for a in range(cfg.n_jobs - 1):
        if rng.random() < cfg.precedence_prob:
            precedence.add((a, rng.randint(a + 1, cfg.n_jobs - 1)))

    def pick_workers() -> list[int]:
        ws = [w for w in range(cfg.n_workers) if rng.random() < cfg.capability_density]
        return ws or [rng.randrange(cfg.n_workers)]

    specs: list[list[TaskSpec]] = []
    mean_proc = sum(cfg.processing_duration) / 2
    for i, count in enumerate(counts):
        tasks = []
        for j in range(count):
            primary = rng.randrange(cfg.n_stations)
            stations = [primary] + [
                k for k in range(cfg.n_stations) if k != primary and rng.random() < cfg.alt_station_density
            ]
            base_proc = rng.uniform(*cfg.processing_duration)
            base_setup = rng.uniform(*cfg.setup_duration)
            alts, auto = [], {}
            for k in sorted(stations):
                spread = lambda: 1 + rng.uniform(-cfg.worker_speed_spread, cfg.worker_speed_spread)  # noqa: E731
                proc = {w: rnd(base_proc * spread()) for w in pick_workers()}
                setup = {w: rnd(base_setup * spread()) for w in pick_workers()} if stations_setup[k] else {}
                alts.append(TaskAlternative(k, setup, proc))
                if rng.random() < cfg.automation_share:
                    u = rng.uniform(*cfg.automation_range)
                    auto[k] = round(u, 2)
                else:
                    auto[k] = 1.0
            release = rnd(rng.uniform(0, cfg.release_spread * mean_proc)) if cfg.release_spread > 0 else 0.0
            if cfg.integer_times and release <= 1:
                release = 0.0
            tasks.append(TaskSpec(release, tuple(alts), auto))
        specs.append(tasks)

    # sequence factors among tasks sharing a setup station
    all_tasks = [(i, j) for i, ts in enumerate(specs) for j in range(len(ts))]
    factors: list[dict] = [dict() for _ in range(cfg.n_stations)]
    for k in range(cfg.n_stations):
        if not stations_setup[k]:
            continue
        here = [t for t in all_tasks if k in {a.station for a in specs[t[0]][t[1]].alternatives}]
        for a in here:
            for b in here:
                if a != b and rng.random() < cfg.factor_density:
                    lo, hi = cfg.factor_range
                    factors[k][(a, b)] = round(rng.uniform(lo, hi), 2)

    # due dates for sink jobs from a critical-path lower bound
    preds: dict[int, list[int]] = {i: [] for i in range(cfg.n_jobs)}
    for a, b in precedence:
        preds[b].append(a)
    finish: dict[int, float] = {}
    for i in range(cfg.n_jobs):  # predecessors always have lower index
        t = max((finish[p] for p in preds[i]), default=0.0)
        for spec in specs[i]:
            fastest = min(min(a.processing_workers.values()) for a in spec.alternatives)
            t = max(t, spec.release_time) + fastest
        finish[i] = t
    has_succ = {a for a, _ in precedence}
    jobs = []
    for i in range(cfg.n_jobs):
        due = None if i in has_succ else rnd(finish[i] * cfg.due_tightness)
        jobs.append(Job(i, tuple(specs[i]), due))

    inst = ProblemInstance(
        jobs=tuple(jobs),
        stations=tuple(Station(k, slots[k], stations_setup[k], factors[k]) for k in range(cfg.n_stations)),
        workers=tuple(Worker(w) for w in range(cfg.n_workers)),
        job_precedence=frozenset(precedence),
        objective_weights=cfg.objective_weights,
        name=cfg.name,
    )
    report = validate_instance(inst)
    if not report.ok:  # pragma: no cover - generator bug guard
        raise RuntimeError(f"generator produced an invalid instance: {report.issues}")
    return inst


def config_from_dict(data: dict, base: GeneratorConfig | None = None) -> GeneratorConfig:
    """Build a config from a JSON-like mapping. A ``"preset"`` key picks the
    starting point; list values of tuple fields are converted."""
    data = dict(data)
    start = preset(data.pop("preset")) if "preset" in data else (base or GeneratorConfig())
    known = set(asdict(start))
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown generator fields: {sorted(unknown)}")
    fixed = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    cfg = replace(start, **fixed)
    cfg.validate()
    return cfg
