"""Schedule export: csv, Gantt json and the simulator event trace.

Numbers are written with ``repr`` so that re-reading them gives back the
exact floats.
"""

from __future__ import annotations

import csv
import io
import json
from typing import Iterable

from ..instance import PROCESSING, SETUP, Operation, ProblemInstance, Schedule, job_tardiness

CSV_HEADER = ["job", "task", "kind", "station", "worker", "start", "end", "slot"]
FORMATS = ("csv", "gantt-json", "event-trace")


def _num(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() and abs(x) < 2**53 else repr(x)


def schedule_to_csv(schedule: Schedule) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for op in sorted(schedule, key=lambda o: (o.job, o.task, o.kind != SETUP)):
        w.writerow([op.job, op.task, op.kind, op.station, op.worker, _num(op.start), _num(op.end), op.slot if op.slot is not None else ""])
    return out.getvalue()


class ScheduleFormatError(ValueError):
    pass


def schedule_from_csv(text: str, instance: ProblemInstance | None = None) -> Schedule:
    """Parse a schedule csv. The ``slot`` column is optional (defaults to 0).

    With ``instance`` given, job tardiness is filled in as well.
    """
    reader = csv.DictReader(io.StringIO(text))
    required = set(CSV_HEADER) - {"slot"}
    if reader.fieldnames is None or not required <= set(reader.fieldnames):
        raise ScheduleFormatError(f"csv header must contain {CSV_HEADER[:-1]}")
    sched = Schedule()
    for n, row in enumerate(reader, start=2):
        try:
            kind = row["kind"].strip()
            if kind not in (SETUP, PROCESSING):
                raise ValueError(f"unknown operation kind {kind!r}")
            slot = row.get("slot")
            op = Operation(
                int(row["job"]),
                int(row["task"]),
                kind,
                int(row["station"]),
                int(row["worker"]),
                float(row["start"]),
                float(row["end"]),
                int(slot) if slot not in (None, "") else 0,
            )
        except (TypeError, ValueError) as exc:
            raise ScheduleFormatError(f"line {n}: {exc}") from None
        if op.key in sched.operations:
            raise ScheduleFormatError(f"line {n}: duplicate operation {op.key}")
        sched.add(op)
    if instance is not None:
        sched.tardiness = job_tardiness(sched, instance)
    return sched


def schedule_to_gantt(schedule: Schedule, instance: ProblemInstance) -> dict:
    """One lane per station; bars carry job/task/kind/worker/slot and times.

    Schema::

        {"lanes": [{"station": k, "slots": n,
                    "bars": [{"label": "J0.T1 setup", "job": 0, "task": 1,
                              "kind": "setup", "worker": w, "slot": q,
                              "start": s, "end": e}]}],
         "makespan": t}
    """
    lanes = []
    for st in instance.stations:
        bars = [
            {
                "label": f"J{op.job}.T{op.task} {op.kind}",
                "job": op.job,
                "task": op.task,
                "kind": op.kind,
                "worker": op.worker,
                "slot": op.slot,
                "start": op.start,
                "end": op.end,
            }
            for op in schedule.sorted_operations()
            if op.station == st.id
        ]
        lanes.append({"station": st.id, "slots": st.slots, "bars": bars})
    makespan = max((op.end for op in schedule), default=0.0)
    return {"lanes": lanes, "makespan": makespan}


def trace_to_json(trace: Iterable) -> list[dict]:
    return [
        {"time": e.time, "station": e.station, "worker": e.worker, "job": e.job, "task": e.task, "kind": e.kind, "phase": e.phase}
        for e in trace
    ]


def export_schedule(schedule: Schedule, fmt: str, instance: ProblemInstance | None = None, trace=None) -> bytes:
    """Render a schedule as ``csv``, ``gantt-json`` or ``event-trace``.

    ``gantt-json`` needs the instance (for the lane list); ``event-trace``
    needs the trace recorded by ``simulate(..., trace=True)``.
    """
    if fmt == "csv":
        return schedule_to_csv(schedule).encode()
    if fmt == "gantt-json":
        if instance is None:
            raise ValueError("gantt-json export needs the instance")
        return (json.dumps(schedule_to_gantt(schedule, instance), indent=1) + "\n").encode()
    if fmt == "event-trace":
        if trace is None:
            raise ValueError("event-trace export needs a recorded trace")
        return (json.dumps(trace_to_json(trace), indent=1) + "\n").encode()
    raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")
