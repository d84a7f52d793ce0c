"""Export of the scheduling model as a mixed-integer program in CPLEX LP format.

Variables (names in parentheses):

* start/end of every setup and processing operation (as_*, bs_*, ap_*, bp_*)
* station-slot assignment gamma (g_*), processing worker choice per station
  (yp_*), setup worker choice per station (ys_*)
* direct-successor chains per slot psi (psi_*), with a "first on slot"
  variant (psif_*)
* setup duration (ds_*), tardiness sigma (sig_*), makespan (cmax)
* overlap indicators for worker attention (th_*, pi_*, mu_*)

Every task always has a setup operation; on stations without setups it is
forced to zero length and carries no worker. Constraint names start with the
family they belong to (release_, dur_proc_, dur_setup_, assign_, worker_,
slotchain_, seq_, setup_order_, task_order_, job_prec_, tard_, deadline_,
mk_, overlap_, capacity_, fix_).
"""

from __future__ import annotations

from dataclasses import dataclass

from ..instance import PROCESSING, SETUP, ProblemInstance, Schedule, ScheduleMetrics, TaskId, setup_time

DEFAULT_CAP = 20_000
OVERLAP_EPS = 1e-3  # must exceed big-M x the solver's integrality tolerance


class ModelTooLarge(ValueError):
    def __init__(self, estimate: int, cap: int):
        super().__init__(f"model would need about {estimate} variables, cap is {cap}")
        self.estimate = estimate
        self.cap = cap


def _tn(t: TaskId) -> str:
    return f"{t[0]}_{t[1]}"


def _fmt(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def _expr(terms: list[tuple[float, str]]) -> str:
    parts = []
    for coef, var in terms:
        if coef == 0:
            continue
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = var if mag == 1 else f"{_fmt(mag)} {var}"
        parts.append(f"{sign} {body}")
    if not parts:
        return "0 cmax"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


@dataclass
class MilpModel:
    text: str
    n_variables: int
    n_binaries: int
    row_counts: dict[str, int]
    big_m: float


def big_m(instance: ProblemInstance) -> float:
    """1.5 times the sum over tasks of the largest (scaled) setup plus the
    largest processing duration, plus the latest release time."""
    total = 0.0
    for t in instance.tasks:
        spec = instance.task(t)
        ds = max((d for a in spec.alternatives for d in a.setup_workers.values()), default=0.0) * 1.5
        dp = max(d for a in spec.alternatives for d in a.processing_workers.values())
        total += ds + dp
    latest = max((instance.task(t).release_time for t in instance.tasks), default=0.0)
    return 1.5 * total + latest


def estimate_variables(instance: ProblemInstance) -> int:
    n_ops = 2 * len(instance.tasks)
    per_station = {}
    for t in instance.tasks:
        for a in instance.task(t).alternatives:
            per_station.setdefault(a.station, []).append(t)
    psi = sum(instance.stations[k].slots * (len(ts) ** 2) for k, ts in per_station.items())
    overlap = n_ops * (n_ops - 1) * (2 + len(instance.workers) * len(instance.stations))
    return 6 * len(instance.tasks) + psi + overlap


def export_milp(
    instance: ProblemInstance,
    *,
    baseline: ScheduleMetrics | None = None,
    fixed: Schedule | None = None,
    cap: int = DEFAULT_CAP,
    overlap_eps: float = OVERLAP_EPS,
    hard_due_dates: bool = False,
) -> MilpModel:
    """Build the LP-format model.

    With ``baseline`` the objective is the normalized scalarization
    (w1 C/C_b + w2 T/max(T_b, 1)); otherwise w1 C + w2 T. With ``fixed`` every
    start, end and resource choice of that schedule is pinned, so a solver
    decides feasibility of that schedule.

    ``hard_due_dates`` adds deadline rows (job completion <= due date), which
    turns late instances infeasible; useful to cross-check infeasibility.
    ``overlap_eps`` is the gap by which an operation counts as starting
    strictly after another; keep it well above big-M times the integrality
    tolerance of the solver.
    """
    est = estimate_variables(instance)
    if est > cap:
        raise ModelTooLarge(est, cap)
    M = big_m(instance)
    tasks = list(instance.tasks)
    w1, w2 = instance.objective_weights
    rows: list[tuple[str, str]] = []
    counts: dict[str, int] = {}
    binaries: list[str] = []
    conts: set[str] = set()

    def row(family: str, body: str) -> None:
        counts[family] = counts.get(family, 0) + 1
        rows.append((f"{family}_{counts[family]}", body))

    def bvar(name: str) -> str:
        binaries.append(name)
        return name

    on_station: dict[int, list[TaskId]] = {}
    for t in tasks:
        for a in instance.task(t).alternatives:
            on_station.setdefault(a.station, []).append(t)

    g, yp, ys = {}, {}, {}
    for t in tasks:
        tn = _tn(t)
        for v in ("as", "bs", "ap", "bp", "ds"):
            conts.add(f"{v}_{tn}")
        for a in instance.task(t).alternatives:
            k = a.station
            for q in range(instance.stations[k].slots):
                g[t, k, q] = bvar(f"g_{tn}_{k}_{q}")
            for w in sorted(a.processing_workers):
                yp[t, k, w] = bvar(f"yp_{tn}_{k}_{w}")
            if instance.stations[k].requires_setup:
                for w in sorted(a.setup_workers):
                    ys[t, k, w] = bvar(f"ys_{tn}_{k}_{w}")

    # assignment (station, slot, workers)
    for t in tasks:
        tn = _tn(t)
        row("assign", f"{_expr([(1, v) for (tt, _, _), v in g.items() if tt == t])} = 1")
        for a in instance.task(t).alternatives:
            k = a.station
            slots = [(1, g[t, k, q]) for q in range(instance.stations[k].slots)]
            row("worker", f"{_expr([(1, yp[t, k, w]) for w in sorted(a.processing_workers)] + [(-c, v) for c, v in slots])} = 0")
            if instance.stations[k].requires_setup:
                row("worker", f"{_expr([(1, ys[t, k, w]) for w in sorted(a.setup_workers)] + [(-c, v) for c, v in slots])} = 0")
        # processing duration
        terms = [(-d, yp[t, a.station, w]) for a in instance.task(t).alternatives for w, d in sorted(a.processing_workers.items())]
        row("dur_proc", f"{_expr([(1, f'bp_{tn}'), (-1, f'ap_{tn}')] + terms)} = 0")
        row("dur_setup", f"{_expr([(1, f'bs_{tn}'), (-1, f'as_{tn}'), (-1, f'ds_{tn}')])} = 0")
        # zero-length setup unless a setup station is chosen
        setup_sel = [(1, g[t, k, q]) for (tt, k, q) in g if tt == t and instance.stations[k].requires_setup]
        row("dur_setup", f"{_expr([(1, f'ds_{tn}')] + [(-M, v) for _, v in setup_sel])} <= 0")
        row("release", f"ap_{tn} >= {_fmt(instance.task(t).release_time)}")
        row("setup_order", f"{_expr([(1, f'ap_{tn}'), (-1, f'bs_{tn}')])} >= 0")
        row("mk", f"{_expr([(1, 'cmax'), (-1, f'bp_{tn}')])} >= 0")
    for job in instance.jobs:
        for j in range(1, len(job.tasks)):
            row("task_order", f"{_expr([(1, f'ap_{job.id}_{j}'), (-1, f'bp_{job.id}_{j - 1}')])} >= 0")
    for a, b in sorted(instance.job_precedence):
        row("job_prec", f"{_expr([(1, f'ap_{b}_0'), (-1, f'bp_{a}_{instance.jobs[a].last_task}')])} >= 0")
    sig = []
    for job in instance.jobs:
        if job.due_date is None:
            continue
        s = f"sig_{job.id}"
        conts.add(s)
        sig.append(s)
        row("tard", f"{_expr([(1, s), (-1, f'bp_{job.id}_{job.last_task}')])} >= {_fmt(-job.due_date)}")
        if hard_due_dates:
            row("deadline", f"bp_{job.id}_{job.last_task} <= {_fmt(job.due_date)}")

    # slot chains and sequence-dependent setup durations
    for k, ts in sorted(on_station.items()):
        st = instance.stations[k]
        for q in range(st.slots):
            first = {t: bvar(f"psif_{_tn(t)}_{k}_{q}") for t in ts}
            psi = {(p, t): bvar(f"psi_{_tn(p)}_{_tn(t)}_{k}_{q}") for p in ts for t in ts if p != t}
            row("slotchain", f"{_expr([(1, v) for v in first.values()])} <= 1")
            for t in ts:
                incoming = [(1, first[t])] + [(1, psi[p, t]) for p in ts if p != t]
                row("slotchain", f"{_expr(incoming + [(-1, g[t, k, q])])} = 0")
                outgoing = [(1, psi[t, s]) for s in ts if s != t]
                if outgoing:
                    row("slotchain", f"{_expr(outgoing + [(-1, g[t, k, q])])} <= 0")
            for (p, t), v in psi.items():
                # next setup (or processing) starts after the predecessor's processing ends
                row("seq", f"{_expr([(1, f'as_{_tn(t)}'), (-1, f'bp_{_tn(p)}'), (-M, v)])} >= {_fmt(-M)}")
            if not st.requires_setup:
                continue
            for t in ts:
                alt = instance.task(t).alternative(k)
                for w, d in sorted(alt.setup_workers.items()):
                    z = ys[t, k, w]
                    cases = [(first[t], setup_time(d, 0.0))]
                    cases += [(psi[p, t], setup_time(d, st.factor(p, t))) for p in ts if p != t]
                    for sel, dur in cases:
                        # |ds - dur| <= M (2 - sel - z)
                        row("dur_setup", f"{_expr([(1, f'ds_{_tn(t)}'), (-M, sel), (-M, z)])} >= {_fmt(dur - 2 * M)}")
                        row("dur_setup", f"{_expr([(1, f'ds_{_tn(t)}'), (M, sel), (M, z)])} <= {_fmt(dur + 2 * M)}")

    # worker attention: at the start of every operation the summed load of
    # the operations of that worker running at that moment stays <= 1
    ops = [(t, kind) for t in tasks for kind in (SETUP, PROCESSING)]
    pre = {SETUP: ("as", "bs"), PROCESSING: ("ap", "bp")}

    def uses(op, w):
        """[(load, binary)] of ``op`` on worker ``w`` over its stations."""
        t, kind = op
        out = []
        for a in instance.task(t).alternatives:
            k = a.station
            if kind == PROCESSING and (t, k, w) in yp:
                out.append((instance.automation(t, k), yp[t, k, w]))
            if kind == SETUP and (t, k, w) in ys:
                out.append((1.0, ys[t, k, w]))
        return out

    n_ops = len(ops)
    mu_vars: dict = {}
    theta: dict = {}
    for o in ops:
        for o2 in ops:
            if o2 == o or o2[0] == o[0]:
                continue  # an operation never overlaps its own task's other operation
            shared = any(uses(o, w) and uses(o2, w) for w in range(len(instance.workers)))
            if not shared:
                continue
            name = f"{o2[1][0]}{_tn(o2[0])}_{o[1][0]}{_tn(o[0])}"
            th = theta[o2, o] = bvar(f"th_{name}")
            pi = bvar(f"pi_{name}")
            a_o = f"{pre[o[1]][0]}_{_tn(o[0])}"
            a_o2, b_o2 = (f"{v}_{_tn(o2[0])}" for v in pre[o2[1]])
            # th = 0 -> o2 starts strictly after o starts, or ends by then
            row("overlap", f"{_expr([(1, a_o2), (-1, a_o), (M, th), (M, pi)])} >= {_fmt(overlap_eps)}")
            row("overlap", f"{_expr([(1, a_o), (-1, b_o2), (M, th), (-M, pi)])} >= {_fmt(-M)}")
            for w in range(len(instance.workers)):
                for load, y in uses(o2, w):
                    mu = bvar(f"mu_{name}_{y}")
                    mu_vars[o2, o, w, y] = (load, mu)
                    row("overlap", f"{_expr([(1, mu), (-1, th), (-1, y)])} >= -1")
    for o in ops:
        for w in range(len(instance.workers)):
            own = uses(o, w)
            if not own:
                continue
            others = [(load, mu) for (o2, oo, ww, _), (load, mu) in mu_vars.items() if oo == o and ww == w]
            if not others:
                continue
            # sum(loads running) + own load <= 1 + n_ops (1 - own selected)
            row(
                "capacity",
                f"{_expr(others + own + [(n_ops, y) for _, y in own])} <= {_fmt(1 + n_ops)}",
            )

    if fixed is not None:
        _fix(instance, fixed, row, g, yp, ys)

    if baseline is not None:
        c1 = w1 / baseline.makespan
        c2 = w2 / max(baseline.total_tardiness, 1.0)
    else:
        c1, c2 = w1, w2
    objective = _expr([(c1, "cmax")] + [(c2, s) for s in sig])

    lines = [
        f"\\ scheduling model for instance '{instance.name}'",
        f"\\ big-M = {_fmt(M)} (1.5 x summed max durations + latest release); overlap epsilon = {overlap_eps}",
        "Minimize",
        f" obj: {objective}",
        "Subject To",
    ]
    lines += [f" {name}: {body}" for name, body in rows]
    lines.append("Bounds")
    lines.append(" cmax >= 0")
    lines += [f" {v} >= 0" for v in sorted(conts)]
    lines.append("Binaries")
    lines += [f" {b}" for b in binaries]
    lines.append("End")
    return MilpModel("\n".join(lines) + "\n", len(conts) + 1 + len(binaries), len(binaries), counts, M)


def _fix(instance: ProblemInstance, schedule: Schedule, row, g, yp, ys) -> None:
    for t in instance.tasks:
        tn = _tn(t)
        p = schedule.processing(t)
        s = schedule.setup(t)
        if p is None:
            raise ValueError(f"fixed schedule lacks the processing of task {t}")
        row("fix", f"ap_{tn} = {_fmt(p.start)}")
        row("fix", f"bp_{tn} = {_fmt(p.end)}")
        if s is not None:
            row("fix", f"as_{tn} = {_fmt(s.start)}")
            row("fix", f"bs_{tn} = {_fmt(s.end)}")
        for (tt, k, q), v in g.items():
            if tt == t:
                row("fix", f"{v} = {1 if (k == p.station and q == (p.slot or 0)) else 0}")
        for (tt, k, w), v in yp.items():
            if tt == t:
                row("fix", f"{v} = {1 if (k == p.station and w == p.worker) else 0}")
        for (tt, k, w), v in ys.items():
            if tt == t:
                row("fix", f"{v} = {1 if (s is not None and k == s.station and w == s.worker) else 0}")
