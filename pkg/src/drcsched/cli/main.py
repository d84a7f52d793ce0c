"""Command-line entry point: generate, validate, solve, train, bench, check,
export and replay.

Exit codes: 0 success, 2 usage or configuration error, 3 infeasible or
missing artifact, 4 numerical divergence during training.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

from ..agent import Agent, CheckpointError, NetShape, TrainerConfig, TrainingDiverged, load_policy, ppo_train, save_policy
from ..dataio import (
    InstanceFormatError,
    ScheduleFormatError,
    atomic_write,
    build_report,
    config_from_dict,
    dumps_genome,
    export_milp,
    export_schedule,
    generate_instance,
    load_instance,
    loads_genome,
    preset,
    record_from,
    save_instance,
    schedule_from_csv,
)
from ..dataio.milp import ModelTooLarge
from ..instance import check_schedule_feasibility, validate_instance
from ..search import HEURISTICS, GaConfig, SaConfig, TsConfig, reference_baseline, run_heuristic
from ..sim import simulate
from .manifest import MANIFEST_NAME, RunManifest, deterministic_hashes

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_DIVERGED = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _abs(p):
    return None if p is None else str(Path(p).resolve())


def _read_json(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return data


def _load_instance(path: str):
    try:
        return load_instance(path)
    except OSError as exc:
        raise UsageError(f"cannot read instance {path}: {exc}") from None


def _seed_list(text: str) -> list[int]:
    """``"5"`` means seeds 0..4; ``"3,7,9"`` lists them explicitly."""
    try:
        if "," in text:
            return [int(s) for s in text.split(",") if s.strip()]
        n = int(text)
    except ValueError:
        raise UsageError(f"bad --seeds value {text!r}") from None
    if n < 1:
        raise UsageError("--seeds must be positive")
    return list(range(n))


def _int_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad integer list {text!r}") from None


def _search_configs(cfg: dict) -> tuple[GaConfig, SaConfig, TsConfig]:
    """``{"ga": {...}, "sa": {...}, "ts": {...}}``; the SA block also feeds GASA."""
    try:
        sa = SaConfig(**cfg.get("sa", {}))
        ga_fields = dict(cfg.get("ga", {}))
        ga = GaConfig(**ga_fields, sa=sa) if "sa" not in ga_fields else GaConfig(**ga_fields)
        ts = TsConfig(**cfg.get("ts", {}))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad search config: {exc}") from None
    return ga, sa, ts


def _trainer_config(cfg: dict, total_steps: int | None, pool_size: int | None) -> TrainerConfig:
    cfg = dict(cfg)
    if "shape" in cfg:
        shape = dict(cfg["shape"])
        if "value" in shape:
            shape["value"] = tuple(shape["value"])
        cfg["shape"] = NetShape(**shape)
    if total_steps is not None:
        cfg["total_steps"] = total_steps
    if pool_size is not None:
        cfg["pool_size"] = pool_size
    try:
        return TrainerConfig(**cfg)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad trainer config: {exc}") from None


def _load_agent(path: str, mode: str, seed: int = 0) -> Agent:
    try:
        return Agent(load_policy(Path(path).read_bytes()), mode, seed)
    except (OSError, CheckpointError) as exc:
        raise UsageError(f"cannot load policy {path}: {exc}") from None


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    try:
        if args.config:
            cfg = config_from_dict(_read_json(args.config))
        else:
            cfg = preset(args.preset)
        cfg = replace(cfg, seed=args.seed, name=args.name or cfg.name or args.preset or "instance")
        cfg.validate()
        instance = generate_instance(cfg)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    save_instance(instance, out)
    n_tasks = len(instance.tasks)
    print(
        f"{instance.name}: {len(instance.jobs)} jobs / {n_tasks} tasks, "
        f"{len(instance.stations)} stations / {len(instance.workers)} workers -> {out}"
    )
    man = RunManifest("generate", vars(args), {"generator": cfg.to_dict()}, [args.seed])
    man.add(out, "instance", out.parent)
    man.timings["total_seconds"] = time.perf_counter() - t0
    man.write(out.with_name(out.stem + ".manifest.json"))
    return EXIT_OK


def cmd_validate(args) -> int:
    instance = _load_instance(args.instance)
    report = validate_instance(instance)
    if report.ok:
        print(f"{args.instance}: valid ({len(instance.jobs)} jobs, {len(instance.tasks)} tasks)")
        return EXIT_OK
    for issue in report:
        print(issue)
    return EXIT_USAGE


def _write_trace(instance, result, policy, path: Path) -> None:
    if result.source_genome is None:
        return
    res = simulate(instance, result.source_genome, policy, result.decode_seed, trace=True)
    atomic_write(path, export_schedule(res.schedule, "event-trace", instance, res.trace))


def cmd_solve(args) -> int:
    instance = _load_instance(args.instance)
    if args.heuristic not in HEURISTICS:
        raise UsageError(f"unknown heuristic {args.heuristic!r}; choose from {HEURISTICS}")
    if args.heuristic == "gasa-rl" and not args.policy:
        raise UsageError("gasa-rl needs --policy")
    cfg = _read_json(args.config)
    ga, sa, ts = _search_configs(cfg)
    policy = _load_agent(args.policy, args.agent_mode) if args.heuristic == "gasa-rl" else None
    seeds = _seed_list(args.seeds)
    out = _out_dir(args.out)
    man = RunManifest(
        "solve", vars(args), {"ga": asdict(ga), "sa": asdict(sa), "ts": asdict(ts)}, seeds
    )
    baseline = reference_baseline(instance)
    metrics, curve_rows, timing_rows, violations = [], [], [], []
    t0 = time.perf_counter()
    for seed in seeds:
        result = run_heuristic(
            args.heuristic, instance, args.budget, seed,
            parallelism=args.parallelism, policy=policy, baseline=baseline, ga=ga, sa=sa, ts=ts,
        )
        bad = check_schedule_feasibility(instance, result.best_schedule)
        violations += [f"seed {seed}: {v}" for v in bad]
        sched_path = out / f"schedule_s{seed}.csv"
        atomic_write(sched_path, export_schedule(result.best_schedule, "csv"))
        man.add(sched_path, f"schedule:{seed}", out)
        gpath = out / f"genome_s{seed}.json"
        atomic_write(gpath, dumps_genome(result.best_genome))
        man.add(gpath, f"genome:{seed}", out)
        tpath = out / f"trace_s{seed}.json"
        _write_trace(instance, result, policy, tpath)
        if tpath.exists():
            man.add(tpath, f"trace:{seed}", out)
        m = result.best_metrics
        metrics.append(
            {
                "seed": seed,
                "heuristic": result.heuristic,
                "z": result.best_z,
                "makespan": m.makespan,
                "total_tardiness": m.total_tardiness,
                "mean_flow_time": m.mean_flow_time,
                "evaluations": result.evaluations,
                "generations": result.generations,
                "feasible": not bad,
                "decode_seed": result.decode_seed,
            }
        )
        curve_rows += [f"{seed}\t{g}\t{b!r}\t{mz!r}" for g, (b, mz) in enumerate(zip(result.z_curve, result.mean_z_curve))]
        timing_rows += [f"{seed}\t{g}\t{t:.6f}" for g, t in enumerate(result.iteration_times)]
        print(f"seed {seed}: Z={result.best_z:.6f} MS={m.makespan:g} TT={m.total_tardiness:g} evals={result.evaluations}")
    man.timings["total_seconds"] = time.perf_counter() - t0
    mpath = out / "metrics.json"
    atomic_write(
        mpath,
        json.dumps({"baseline": {"makespan": baseline.makespan, "total_tardiness": baseline.total_tardiness}, "runs": metrics}, indent=1)
        + "\n",
    )
    man.add(mpath, "metrics", out)
    cpath = out / "curve.tsv"
    atomic_write(cpath, "seed\tgeneration\tbest_z\tmean_z\n" + "".join(r + "\n" for r in curve_rows))
    man.add(cpath, "curve", out)
    tpath = out / "timing.tsv"
    atomic_write(tpath, "seed\tgeneration\tseconds\n" + "".join(r + "\n" for r in timing_rows))
    man.add(tpath, "timing", out, deterministic=False)
    if violations:
        vpath = out / "violations.txt"
        atomic_write(vpath, "\n".join(violations) + "\n")
        man.add(vpath, "violations", out)
    man.write(out / MANIFEST_NAME)
    if violations:
        print("\n".join(violations), file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_train(args) -> int:
    instance = _load_instance(args.instance)
    config = _trainer_config(_read_json(args.config), args.total_steps, args.pool_size)
    out = _out_dir(args.out)
    baseline = reference_baseline(instance)
    t0 = time.perf_counter()
    try:
        run = ppo_train(instance, config=config, seed=args.seed, baseline=baseline)
    except TrainingDiverged as exc:
        print(f"training diverged at update {exc.update}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    man = RunManifest("train", vars(args), {"trainer": config.to_dict(), "fit_label": run.fit_label}, [args.seed])
    man.timings["total_seconds"] = time.perf_counter() - t0
    ppath = out / "policy.bin"
    atomic_write(ppath, save_policy(run.net))
    man.add(ppath, "policy", out)
    fields = ["update", "steps", "episodes", "loss", "policy_loss", "value_loss", "entropy", "mean_episode_reward", "mean_episode_length", "learning_rate"]
    lines = ["\t".join(fields)] + ["\t".join(repr(getattr(u, f)) for f in fields) for u in run.log]
    lpath = out / "training_log.tsv"
    atomic_write(lpath, "\n".join(lines) + "\n")
    man.add(lpath, "training_log", out)
    man.write(out / MANIFEST_NAME)
    first, last = run.log[0].mean_episode_reward, run.log[-1].mean_episode_reward
    print(f"{len(run.log)} updates, label Z={run.fit_label:.6f}, episode reward {first:.2f} -> {last:.2f}; policy -> {ppath}")
    return EXIT_OK


def cmd_bench(args) -> int:
    files = sorted(Path(args.dataset).glob("*.json"))
    files = [f for f in files if not f.name.endswith(".manifest.json")]
    if not files:
        raise UsageError(f"no instance files in {args.dataset}")
    heuristics = [h.strip() for h in args.heuristics.split(",") if h.strip()]
    for h in heuristics:
        if h not in HEURISTICS:
            raise UsageError(f"unknown heuristic {h!r}; choose from {HEURISTICS}")
    seeds = _seed_list(args.seeds)
    levels = _int_list(args.parallelism)
    ga, sa, ts = _search_configs(_read_json(args.config))
    out = _out_dir(args.out)
    man = RunManifest("bench", vars(args), {"ga": asdict(ga), "sa": asdict(sa), "ts": asdict(ts)}, seeds)
    records, warnings = [], []
    t0 = time.perf_counter()
    for f in files:
        instance = _load_instance(str(f))
        name = f.stem
        baseline = reference_baseline(instance)
        policy = None
        if "gasa-rl" in heuristics:
            if args.policy:
                policy = _load_agent(args.policy, args.agent_mode)
            else:
                config = TrainerConfig(total_steps=args.train_steps)
                try:
                    run = ppo_train(instance, config=config, seed=0, baseline=baseline)
                    ppath = out / f"policy_{name}.bin"
                    atomic_write(ppath, save_policy(run.net))
                    man.add(ppath, f"policy:{name}", out)
                    policy = Agent(run.net, args.agent_mode)
                except TrainingDiverged as exc:
                    warnings.append(f"{name} gasa-rl: training diverged at update {exc.update}")
        for h in heuristics:
            for p in levels:
                for seed in seeds:
                    try:
                        if h == "gasa-rl" and policy is None:
                            raise RuntimeError("no policy available")
                        res = run_heuristic(h, instance, args.budget, seed, parallelism=p, policy=policy, baseline=baseline, ga=ga, sa=sa, ts=ts)
                        bad = check_schedule_feasibility(instance, res.best_schedule)
                        if bad:
                            raise RuntimeError(f"infeasible schedule: {bad[0]}")
                        # sequential heuristics ignore the level; rows carry the requested one
                        records.append(replace(record_from(name, res), parallelism=p))
                    except Exception as exc:  # recorded per cell, the benchmark goes on
                        warnings.append(f"{name} {h} p={p} seed={seed}: {exc}")
    man.timings["total_seconds"] = time.perf_counter() - t0
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    if not records:
        print("every benchmark cell failed", file=sys.stderr)
        return EXIT_INFEASIBLE
    report = build_report(records, heuristics)
    tables = {
        "results.tsv": report.results_table(),
        "means.tsv": report.means_table(),
        "std.tsv": report.std_table(),
        "z.tsv": report.z_table(),
        "curves.tsv": report.curves_table(),
    }
    for fname, text in tables.items():
        atomic_write(out / fname, text)
        man.add(out / fname, fname.removesuffix(".tsv"), out)
    atomic_write(out / "timing.tsv", report.timing_table())
    man.add(out / "timing.tsv", "timing", out, deterministic=False)
    atomic_write(out / "warnings.txt", "".join(w + "\n" for w in warnings))
    man.add(out / "warnings.txt", "warnings", out)
    man.write(out / MANIFEST_NAME)
    print(report.z_table(), end="")
    print(f"{len(records)} result rows -> {out}")
    return EXIT_OK


def cmd_check(args) -> int:
    instance = _load_instance(args.instance)
    try:
        schedule = schedule_from_csv(Path(args.schedule).read_text(), instance)
    except OSError as exc:
        raise UsageError(f"cannot read schedule {args.schedule}: {exc}") from None
    except ScheduleFormatError as exc:
        raise UsageError(f"bad schedule file: {exc}") from None
    bad = check_schedule_feasibility(instance, schedule)
    if not bad:
        print("feasible")
        return EXIT_OK
    for v in bad:
        print(v)
    return EXIT_INFEASIBLE


def cmd_export(args) -> int:
    instance = _load_instance(args.instance)
    fmt = args.format
    schedule = None
    if args.schedule:
        try:
            schedule = schedule_from_csv(Path(args.schedule).read_text(), instance)
        except (OSError, ScheduleFormatError) as exc:
            raise UsageError(f"bad schedule file: {exc}") from None
    if fmt == "lp":
        try:
            model = export_milp(instance, fixed=schedule, cap=args.cap, hard_due_dates=args.hard_due_dates)
        except ModelTooLarge as exc:
            raise UsageError(str(exc)) from None
        data = model.text.encode()
    elif fmt == "event-trace" or (schedule is None and args.genome):
        if not args.genome:
            raise UsageError("event-trace export needs --genome")
        try:
            genome = loads_genome(Path(args.genome).read_text())
        except (OSError, InstanceFormatError) as exc:
            raise UsageError(f"bad genome file: {exc}") from None
        policy = _load_agent(args.policy, args.agent_mode) if args.policy else None
        res = simulate(instance, genome, policy, args.decode_seed, trace=True)
        data = export_schedule(res.schedule, fmt, instance, res.trace)
    else:
        if schedule is None:
            raise UsageError(f"{fmt} export needs --schedule or --genome")
        data = export_schedule(schedule, fmt, instance)
    atomic_write(args.out, data)
    print(f"{fmt} -> {args.out}")
    return EXIT_OK


def cmd_replay(args) -> int:
    """Re-run a manifest's command into ``--out`` and compare artifacts."""
    try:
        man = RunManifest.read(args.manifest)
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        raise UsageError(f"cannot read manifest {args.manifest}: {exc}") from None
    ns = argparse.Namespace(**man.args)
    ns.out = args.out
    code = COMMANDS[man.command](ns)
    if code != EXIT_OK:
        return code
    new_path = Path(args.out).with_name(Path(args.out).stem + ".manifest.json") if man.command == "generate" else Path(args.out) / MANIFEST_NAME
    fresh = RunManifest.read(new_path)
    old, new = deterministic_hashes(man), deterministic_hashes(fresh)
    diff = sorted(r for r in old.keys() | new.keys() if old.get(r) != new.get(r))
    if diff:
        print("artifacts differ: " + ", ".join(diff))
        return EXIT_INFEASIBLE
    print(f"{len(old)} artifacts reproduced byte-for-byte")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "validate": cmd_validate,
    "solve": cmd_solve,
    "train": cmd_train,
    "bench": cmd_bench,
    "check": cmd_check,
    "export": cmd_export,
    "replay": cmd_replay,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drcsched", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate an instance file")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset")
    src.add_argument("--config", help="JSON generator config (may name a base 'preset')")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--name")
    g.add_argument("--out", required=True, help="instance file to write")

    v = sub.add_parser("validate", help="validate an instance file")
    v.add_argument("--instance", required=True)

    s = sub.add_parser("solve", help="run one heuristic on an instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--heuristic", required=True)
    s.add_argument("--budget", type=int, default=500)
    s.add_argument("--seeds", default="1", help="count (0..n-1) or comma list")
    s.add_argument("--parallelism", type=int, default=1)
    s.add_argument("--policy")
    s.add_argument("--agent-mode", choices=("greedy", "sample"), default="sample")
    s.add_argument("--config", help="JSON with optional ga/sa/ts blocks")
    s.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train a dispatching policy")
    t.add_argument("--instance", required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--config", help="JSON trainer config")
    t.add_argument("--total-steps", type=int)
    t.add_argument("--pool-size", type=int)
    t.add_argument("--out", required=True)

    b = sub.add_parser("bench", help="cross-product benchmark over a dataset directory")
    b.add_argument("--dataset", required=True)
    b.add_argument("--heuristics", default=",".join(HEURISTICS))
    b.add_argument("--seeds", default="10")
    b.add_argument("--budget", type=int, default=500)
    b.add_argument("--parallelism", default="1", help="comma list of levels")
    b.add_argument("--policy", help="checkpoint used for every instance (otherwise one is trained per instance)")
    b.add_argument("--train-steps", type=int, default=30_000)
    b.add_argument("--agent-mode", choices=("greedy", "sample"), default="sample")
    b.add_argument("--config")
    b.add_argument("--out", required=True)

    c = sub.add_parser("check", help="check a schedule csv against an instance")
    c.add_argument("--instance", required=True)
    c.add_argument("--schedule", required=True)

    e = sub.add_parser("export", help="export a schedule or the MILP model")
    e.add_argument("--instance", required=True)
    e.add_argument("--format", required=True, choices=("csv", "gantt-json", "event-trace", "lp"))
    e.add_argument("--schedule", help="schedule csv (fixed schedule for lp)")
    e.add_argument("--genome", help="genome json to decode")
    e.add_argument("--policy")
    e.add_argument("--agent-mode", choices=("greedy", "sample"), default="sample")
    e.add_argument("--decode-seed", type=int)
    e.add_argument("--cap", type=int, default=20_000)
    e.add_argument("--hard-due-dates", action="store_true")
    e.add_argument("--out", required=True)

    r = sub.add_parser("replay", help="re-run a manifest and compare artifacts")
    r.add_argument("--manifest", required=True)
    r.add_argument("--out", required=True)
    return p


_PATH_ARGS = ("instance", "config", "policy", "dataset", "schedule", "genome")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    for name in _PATH_ARGS:
        if getattr(args, name, None):
            setattr(args, name, _abs(getattr(args, name)))
    command = args.command
    try:
        return COMMANDS[command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InstanceFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
