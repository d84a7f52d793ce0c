"""JSON instance files.

Layout::

    {"format": "drcsched-instance", "version": 1, "name": ...,
     "objective_weights": [w1, w2],
     "workers": <count>,
     "stations": [{"slots": 1, "requires_setup": true,
                   "sequence_factor": [[[i, j], [i2, j2], s], ...]}, ...],
     "jobs": [{"due_date": null | t,
               "tasks": [{"release_time": r,
                          "alternatives": [{"station": k,
                                            "automation_degree": u,
                                            "setup_workers": {"w": d},
                                            "processing_workers": {"w": d}}]}]}],
     "job_precedence": [[pred, succ], ...]}

Loading checks the schema and reports the path of the first offending field.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from ..genome import AllocationGene, DispatchRule, Genome
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

FORMAT_TAG = "drcsched-instance"
FORMAT_VERSION = 1


class InstanceFormatError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def atomic_write(path: str | os.PathLike, data: bytes | str) -> None:
    """Write a whole file via a temp file in the same directory plus rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def instance_to_dict(instance: ProblemInstance) -> dict:
    stations = []
    for st in instance.stations:
        factors = [[list(a), list(b), s] for (a, b), s in sorted(st.sequence_factor.items())]
        stations.append({"slots": st.slots, "requires_setup": st.requires_setup, "sequence_factor": factors})
    jobs = []
    for job in instance.jobs:
        tasks = []
        for j, spec in enumerate(job.tasks):
            alts = []
            for alt in spec.alternatives:
                entry = {
                    "station": alt.station,
                    "setup_workers": {str(w): d for w, d in sorted(alt.setup_workers.items())},
                    "processing_workers": {str(w): d for w, d in sorted(alt.processing_workers.items())},
                }
                if alt.station in spec.automation_degree_by_station:
                    entry["automation_degree"] = spec.automation_degree_by_station[alt.station]
                alts.append(entry)
            tasks.append({"release_time": spec.release_time, "alternatives": alts})
        jobs.append({"due_date": job.due_date, "tasks": tasks})
    return {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "name": instance.name,
        "objective_weights": list(instance.objective_weights),
        "workers": len(instance.workers),
        "stations": stations,
        "jobs": jobs,
        "job_precedence": [list(p) for p in sorted(instance.job_precedence)],
    }


def dumps_instance(instance: ProblemInstance) -> str:
    return json.dumps(instance_to_dict(instance), indent=1, sort_keys=True) + "\n"


def save_instance(instance: ProblemInstance, path: str | os.PathLike) -> None:
    atomic_write(path, dumps_instance(instance))


# ---------------------------------------------------------------------------
# loading


def _get(obj: dict, key: str, path: str, types, required: bool = True, default=None):
    if not isinstance(obj, dict):
        raise InstanceFormatError(path, "expected an object")
    if key not in obj:
        if required:
            raise InstanceFormatError(f"{path}.{key}", "missing required field")
        return default
    value = obj[key]
    if types is not None and not isinstance(value, types) or isinstance(value, bool) and bool not in _tuple(types):
        raise InstanceFormatError(f"{path}.{key}", f"expected {_names(types)}, got {type(value).__name__}")
    return value


def _tuple(types):
    return types if isinstance(types, tuple) else (types,)


def _names(types) -> str:
    return " or ".join(t.__name__ for t in _tuple(types))


_NUM = (int, float)


def _duration_map(raw, path: str) -> dict[int, float]:
    if not isinstance(raw, dict):
        raise InstanceFormatError(path, "expected an object mapping worker -> duration")
    out = {}
    for w, d in raw.items():
        try:
            wi = int(w)
        except ValueError:
            raise InstanceFormatError(f"{path}.{w}", "worker key must be an integer") from None
        if isinstance(d, bool) or not isinstance(d, _NUM):
            raise InstanceFormatError(f"{path}.{w}", "duration must be a number")
        out[wi] = float(d)
    return out


def instance_from_dict(data: dict) -> ProblemInstance:
    p = "$"
    if not isinstance(data, dict):
        raise InstanceFormatError(p, "expected an object")
    tag = data.get("format", FORMAT_TAG)
    if tag != FORMAT_TAG:
        raise InstanceFormatError(f"{p}.format", f"unknown format tag {tag!r}")
    version = data.get("version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise InstanceFormatError(f"{p}.version", f"unsupported version {version}")
    n_workers = _get(data, "workers", p, int)
    if n_workers < 1:
        raise InstanceFormatError(f"{p}.workers", "need at least one worker")
    weights = _get(data, "objective_weights", p, list, required=False, default=[0.5, 0.5])
    if len(weights) != 2 or not all(isinstance(w, _NUM) for w in weights):
        raise InstanceFormatError(f"{p}.objective_weights", "expected two numbers")

    stations = []
    for k, raw in enumerate(_get(data, "stations", p, list)):
        sp = f"{p}.stations[{k}]"
        slots = _get(raw, "slots", sp, int, required=False, default=1)
        req = _get(raw, "requires_setup", sp, bool, required=False, default=True)
        factors = {}
        for n, entry in enumerate(_get(raw, "sequence_factor", sp, list, required=False, default=[])):
            fp = f"{sp}.sequence_factor[{n}]"
            if not (isinstance(entry, list) and len(entry) == 3):
                raise InstanceFormatError(fp, "expected [[job, task], [job, task], factor]")
            a, b, s = entry
            if isinstance(s, bool) or not isinstance(s, _NUM):
                raise InstanceFormatError(fp, "factor must be a number")
            if not FACTOR_MIN <= s <= FACTOR_MAX:
                raise InstanceFormatError(fp, f"factor {s} out of [{FACTOR_MIN}, {FACTOR_MAX}]")
            try:
                factors[(tuple(int(x) for x in a), tuple(int(x) for x in b))] = float(s)
            except (TypeError, ValueError):
                raise InstanceFormatError(fp, "task ids must be [job, task] integer pairs") from None
        stations.append(Station(k, slots, req, factors))

    jobs = []
    for i, raw in enumerate(_get(data, "jobs", p, list)):
        jp = f"{p}.jobs[{i}]"
        due = _get(raw, "due_date", jp, _NUM + (type(None),), required=False)
        tasks = []
        for j, traw in enumerate(_get(raw, "tasks", jp, list)):
            tp = f"{jp}.tasks[{j}]"
            release = _get(traw, "release_time", tp, _NUM, required=False, default=0.0)
            alts, auto = [], {}
            for a, araw in enumerate(_get(traw, "alternatives", tp, list)):
                ap = f"{tp}.alternatives[{a}]"
                k = _get(araw, "station", ap, int)
                u = _get(araw, "automation_degree", ap, _NUM, required=False)
                if u is not None and not 0 <= u <= 1:
                    raise InstanceFormatError(f"{ap}.automation_degree", f"{u} out of [0, 1]")
                setup = _duration_map(araw.get("setup_workers", {}), f"{ap}.setup_workers")
                proc = _duration_map(_get(araw, "processing_workers", ap, dict), f"{ap}.processing_workers")
                alts.append(TaskAlternative(k, setup, proc))
                if u is not None:
                    auto[k] = float(u)
            tasks.append(TaskSpec(float(release), tuple(alts), auto))
        jobs.append(Job(i, tuple(tasks), None if due is None else float(due)))

    prec = set()
    for n, pair in enumerate(_get(data, "job_precedence", p, list, required=False, default=[])):
        if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(x, int) for x in pair)):
            raise InstanceFormatError(f"{p}.job_precedence[{n}]", "expected [pred, succ] job indices")
        prec.add((pair[0], pair[1]))

    inst = ProblemInstance(
        jobs=tuple(jobs),
        stations=tuple(stations),
        workers=tuple(Worker(w) for w in range(n_workers)),
        job_precedence=frozenset(prec),
        objective_weights=(float(weights[0]), float(weights[1])),
        name=str(data.get("name", "")),
    )
    report = validate_instance(inst)
    if not report.ok:
        raise InstanceFormatError(p, "; ".join(str(i) for i in report.issues))
    return inst


def loads_instance(text: str) -> ProblemInstance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError("$", f"not valid JSON ({exc})") from None
    return instance_from_dict(data)


def load_instance(path: str | os.PathLike) -> ProblemInstance:
    return loads_instance(Path(path).read_text())


# ---------------------------------------------------------------------------
# genomes


def genome_to_dict(genome: Genome) -> dict:
    return {
        "format": "drcsched-genome",
        "version": FORMAT_VERSION,
        "instance": genome.instance_key,
        "allocation": [
            {"task": list(g.task), "group": g.group, "station": g.station, "setup_worker": g.setup_worker, "processing_worker": g.processing_worker}
            for g in genome.allocation
        ],
        "dispatching": [r.value for r in genome.dispatching],
    }


def genome_from_dict(data: dict) -> Genome:
    if not isinstance(data, dict) or data.get("format") != "drcsched-genome":
        raise InstanceFormatError("$.format", "expected 'drcsched-genome'")
    try:
        genes = tuple(
            AllocationGene((int(g["task"][0]), int(g["task"][1])), int(g["group"]), int(g["station"]),
                           None if g["setup_worker"] is None else int(g["setup_worker"]), int(g["processing_worker"]))
            for g in data["allocation"]
        )
        rules = tuple(DispatchRule(r) for r in data["dispatching"])
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InstanceFormatError("$.allocation", f"malformed genome: {exc}") from None
    return Genome(genes, rules, str(data.get("instance", "")))


def dumps_genome(genome: Genome) -> str:
    return json.dumps(genome_to_dict(genome), indent=1) + "\n"


def loads_genome(text: str) -> Genome:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError("$", f"not valid JSON: {exc}") from None
    return genome_from_dict(data)
