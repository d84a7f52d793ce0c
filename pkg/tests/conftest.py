import os

import pytest
from hypothesis import HealthCheck, settings

from drcsched.instance import Job, ProblemInstance, Station, TaskAlternative, TaskSpec, Worker

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def task(station_times, release=0.0, automation=None):
    """TaskSpec from {station: (setup {w: d}, processing {w: d})}."""
    alts = tuple(
        TaskAlternative(k, dict(setups), dict(procs)) for k, (setups, procs) in sorted(station_times.items())
    )
    return TaskSpec(release, alts, dict(automation or {}))


def make_instance(jobs, n_stations=1, n_workers=1, *, precedence=(), setups=True, slots=1, factors=None, weights=(0.5, 0.5)):
    """``jobs`` is a list of (tasks, due_date). ``factors`` maps station -> factor dict."""
    factors = factors or {}
    stations = tuple(
        Station(k, slots if isinstance(slots, int) else slots[k], setups if isinstance(setups, bool) else setups[k], factors.get(k, {}))
        for k in range(n_stations)
    )
    return ProblemInstance(
        jobs=tuple(Job(i, tuple(ts), due) for i, (ts, due) in enumerate(jobs)),
        stations=stations,
        workers=tuple(Worker(w) for w in range(n_workers)),
        job_precedence=frozenset(precedence),
        objective_weights=weights,
        name="hand",
    )


@pytest.fixture
def single_task():
    # setup 2, processing 5, no release
    return make_instance([([task({0: ({0: 2.0}, {0: 5.0})})], None)])


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture
def verdict():
    def record(criterion: str, ok: bool, detail: str) -> bool:
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[criterion] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
