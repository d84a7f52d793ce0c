"""State features observed by the dispatching agent at a decision point.

Seventeen entries, in this order:

 1  clock relative to the mean station WIP
 2  mean topology group of the tasks available at the station
 3  station WIP relative to total WIP
 4  mean successor-station WIP relative to total WIP
 5  mean station WIP relative to total WIP
 6  WIP of the station's workers relative to the mean worker WIP
 7  processable tasks at the station relative to all processable tasks
 8  1 if more than one task is processable at the station
    (processable = queued with all predecessors committed, see SimState.processable)
 9  slot count
 10 station throughput (completions per time unit)
 11 mean throughput of successor stations
 12 mean throughput over all stations
 13 throughput standard deviation over all stations
 14 minimum job slack at the station
 15 mean job slack at the station
 16 mean job slack over all stations
 17 job slack standard deviation over all stations

WIP is unfinished work (processing plus nominal setup duration). Slack is
due date minus clock minus the remaining processing work on the job's chain;
jobs without a due date are left out of the slack aggregates. Ratios with a
zero denominator and aggregates over empty sets evaluate to 0.
"""

from __future__ import annotations

import numpy as np

from .engine import SimState

N_FEATURES = 17


def _div(a: float, b: float) -> float:
    return a / b if b else 0.0


def _mean(xs) -> float:
    xs = list(xs)
    return sum(xs) / len(xs) if xs else 0.0


def extract_features(state: SimState, station: int) -> np.ndarray:
    c = state.c
    k = station
    f = np.zeros(N_FEATURES)
    wip = state.station_wip()
    total_wip = sum(wip)
    n_st = c.n_stations

    f[0] = _div(state.clock, total_wip / n_st)

    avail = state.available(k)
    f[1] = _mean(c.group[t] for t in avail)

    f[2] = _div(wip[k], total_wip)

    succ = sorted({s for t in state.queue[k] for s in c.succ_stations[t]})
    f[3] = _div(_mean(wip[s] for s in succ), total_wip)
    f[4] = _div(total_wip / n_st, total_wip)

    # workers that still owe work at this station
    station_workers = set()
    for t in state.queue[k]:
        station_workers.add(state.proc_worker[t])
        if state.setup_worker[t] is not None and c.needs_setup[k]:
            station_workers.add(state.setup_worker[t])
    for sl in state.slots[k]:
        if sl.task is not None:
            station_workers.add(state.proc_worker[sl.task])
    wwip = state.worker_wip()
    f[5] = _div(_mean(wwip[w] for w in station_workers), _mean(wwip))

    proc_here = len(avail)
    proc_all = sum(len(state.processable(j)) for j in range(n_st))
    f[6] = _div(proc_here, proc_all)
    f[7] = 1.0 if proc_here > 1 else 0.0
    f[8] = float(c.slots[k])

    tp = [state.throughput(j) for j in range(n_st)]
    f[9] = tp[k]
    f[10] = _mean(tp[s] for s in succ)
    f[11] = _mean(tp)
    f[12] = float(np.std(tp)) if tp else 0.0

    memo: dict = {}
    here_jobs = {c.job_of[t] for t in avail}
    here = [s for s in (state.slack(j, memo) for j in sorted(here_jobs)) if s is not None]
    open_jobs = sorted({c.job_of[t] for t in range(len(c.tasks)) if not state.done[t]})
    everywhere = [s for s in (state.slack(j, memo) for j in open_jobs) if s is not None]
    f[13] = min(here) if here else 0.0
    f[14] = _mean(here)
    f[15] = _mean(everywhere)
    f[16] = float(np.std(everywhere)) if everywhere else 0.0
    return f
