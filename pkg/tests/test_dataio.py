import json
import os
import tempfile

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_instance, task
from drcsched.dataio import (
    CSV_HEADER,
    GeneratorConfig,
    InstanceFormatError,
    ModelTooLarge,
    ResultRecord,
    ScheduleFormatError,
    big_m,
    build_report,
    config_from_dict,
    dumps_genome,
    dumps_instance,
    export_milp,
    export_schedule,
    generate_instance,
    instance_to_dict,
    load_instance,
    loads_genome,
    loads_instance,
    preset,
    save_instance,
    schedule_from_csv,
)
from drcsched.genome import init_population
from drcsched.instance import Operation, Schedule, check_schedule_feasibility, validate_instance
from drcsched.search import brute_force, reference_baseline
from drcsched.sim import simulate

# -- generator ---------------------------------------------------------------


def shape(inst):
    return len(inst.jobs), len(inst.tasks), len(inst.stations), len(inst.workers)


def test_preset_shapes():
    assert shape(generate_instance(preset("gbrt01"))) == (6, 14, 2, 2)
    assert shape(generate_instance(preset("gbrt02"))) == (3, 10, 6, 3)


def test_same_seed_same_bytes():
    a = dumps_instance(generate_instance(preset("gbrt01", seed=11)))
    b = dumps_instance(generate_instance(preset("gbrt01", seed=11)))
    assert a == b
    assert a != dumps_instance(generate_instance(preset("gbrt01", seed=12)))


def test_gbrt01_regime_is_deeper_than_gbrt02():
    deep = [len(generate_instance(preset("gbrt01", seed=s)).job_precedence) for s in range(10)]
    flat = [len(generate_instance(preset("gbrt02", seed=s)).job_precedence) for s in range(10)]
    assert min(deep) > 0 and max(flat) == 0


def test_realworld_preset_is_sparse():
    inst = generate_instance(preset("realworld", seed=0))
    n_alts = sum(len(inst.task(t).alternatives) for t in inst.tasks)
    assert n_alts / len(inst.tasks) < 2
    assert validate_instance(inst).ok


@pytest.mark.parametrize(
    "override",
    [dict(n_workers=0), dict(capability_density=0.0), dict(factor_range=(-1.5, 0.0)), dict(slots=(2, 1)), dict(processing_duration=(0, 5))],
)
def test_bad_configs_rejected(override):
    with pytest.raises(ValueError):
        generate_instance(preset("gbrt01", **override))


def test_unknown_preset():
    with pytest.raises(ValueError):
        preset("gbrt99")


def test_config_from_dict():
    cfg = config_from_dict({"preset": "gbrt02", "seed": 4, "slots": [1, 3]})
    assert cfg.n_stations == 6 and cfg.seed == 4 and cfg.slots == (1, 3)
    with pytest.raises(ValueError):
        config_from_dict({"bogus": 1})


configs = st.builds(
    GeneratorConfig,
    n_jobs=st.integers(1, 6),
    tasks_per_job=st.tuples(st.integers(1, 2), st.integers(2, 4)),
    n_stations=st.integers(1, 5),
    n_workers=st.integers(1, 4),
    slots=st.tuples(st.just(1), st.integers(1, 3)),
    setup_station_share=st.floats(0, 1),
    alt_station_density=st.floats(0.01, 1),
    capability_density=st.floats(0.01, 1),
    factor_density=st.floats(0, 1),
    automation_share=st.floats(0, 1),
    due_tightness=st.floats(0.5, 3),
    release_spread=st.floats(0, 3),
    precedence_prob=st.floats(0, 1),
    integer_times=st.booleans(),
    seed=st.integers(0, 2**31),
)


@given(configs)
def test_generated_instances_validate_and_decode(cfg):
    inst = generate_instance(cfg)
    assert validate_instance(inst).ok
    g = init_population(inst, 1, cfg.seed)[0]
    assert check_schedule_feasibility(inst, simulate(inst, g).schedule) == []


# -- instance file -----------------------------------------------------------


@given(configs)
def test_instance_round_trip(cfg):
    inst = generate_instance(cfg)
    back = loads_instance(dumps_instance(inst))
    assert back == inst
    assert dumps_instance(back) == dumps_instance(inst)


def test_save_and_load_file(tmp_path):
    inst = generate_instance(preset("gbrt02", seed=1))
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    assert load_instance(path) == inst
    assert [p.name for p in tmp_path.iterdir()] == ["inst.json"]


def test_missing_stations_named():
    data = instance_to_dict(generate_instance(preset("tiny")))
    del data["stations"]
    with pytest.raises(InstanceFormatError) as err:
        loads_instance(json.dumps(data))
    assert "stations" in str(err.value)


def test_factor_out_of_range_cited():
    data = instance_to_dict(generate_instance(preset("tiny", factor_density=1.0)))
    station = next(s for s in data["stations"] if s["sequence_factor"])
    station["sequence_factor"][0][2] = 0.9
    with pytest.raises(InstanceFormatError) as err:
        loads_instance(json.dumps(data))
    assert "sequence_factor" in err.value.path and "0.9" in str(err.value)


def test_wrong_type_and_bad_json():
    data = instance_to_dict(generate_instance(preset("tiny")))
    data["workers"] = "two"
    with pytest.raises(InstanceFormatError, match="workers"):
        loads_instance(json.dumps(data))
    with pytest.raises(InstanceFormatError):
        loads_instance("{not json")


def test_genome_round_trip():
    inst = generate_instance(preset("gbrt01", seed=5))
    for g in init_population(inst, 5, 0):
        assert loads_genome(dumps_genome(g)) == g


# -- schedule export ---------------------------------------------------------


def decoded(seed=0):
    inst = generate_instance(preset("gbrt02", seed=seed))
    res = simulate(inst, init_population(inst, 1, seed)[0], trace=True)
    return inst, res


def test_one_operation_csv():
    s = Schedule()
    s.add(Operation(0, 0, "processing", 0, 0, 0.0, 3.25, 0))
    lines = export_schedule(s, "csv").decode().splitlines()
    assert lines[0].split(",")[:7] == ["job", "task", "kind", "station", "worker", "start", "end"]
    assert len(lines) == 2


@given(st.integers(0, 500))
def test_csv_round_trip_exact(seed):
    inst = generate_instance(preset("gbrt02", seed=seed, integer_times=False))
    res = simulate(inst, init_population(inst, 1, seed)[0])
    back = schedule_from_csv(export_schedule(res.schedule, "csv").decode(), inst)
    key = lambda o: (o.job, o.task, o.kind)
    assert sorted(back, key=key) == sorted(res.schedule, key=key)
    assert check_schedule_feasibility(inst, back) == []


def test_csv_errors():
    with pytest.raises(ScheduleFormatError):
        schedule_from_csv("a,b\n1,2\n")
    row = "0,0,processing,0,0,0,5"
    with pytest.raises(ScheduleFormatError, match="duplicate"):
        schedule_from_csv(",".join(CSV_HEADER[:7]) + f"\n{row}\n{row}\n")
    with pytest.raises(ScheduleFormatError, match="line 2"):
        schedule_from_csv(",".join(CSV_HEADER[:7]) + "\n0,0,cooking,0,0,0,5\n")


def test_gantt_lanes_match_stations():
    inst, res = decoded(1)
    data = json.loads(export_schedule(res.schedule, "gantt-json", inst))
    assert len(data["lanes"]) == len(inst.stations)
    assert sum(len(lane["bars"]) for lane in data["lanes"]) == len(res.schedule)
    assert data["makespan"] == res.metrics.makespan


def test_event_trace_pairs_every_operation():
    inst, res = decoded(2)
    events = json.loads(export_schedule(res.schedule, "event-trace", trace=res.trace))
    assert len(events) == 2 * len(res.schedule)
    times = [e["time"] for e in events]
    assert times == sorted(times)


def test_unknown_format():
    with pytest.raises(ValueError):
        export_schedule(Schedule(), "pdf")


# -- MILP export -------------------------------------------------------------


def test_single_task_model_rows(single_task):
    m = export_milp(single_task)
    assert m.row_counts["setup_order"] == 1
    assert m.row_counts["assign"] == 1 and m.row_counts["release"] == 1
    assert "overlap" not in m.row_counts
    assert m.text.startswith("\\ ") and "big-M" in m.text.splitlines()[1]
    assert m.text.rstrip().endswith("End")


@pytest.mark.parametrize("seed", range(5))
def test_row_counts_follow_shape(seed):
    inst = generate_instance(preset("tiny", seed=seed))
    m = export_milp(inst)
    n = len(inst.tasks)
    for fam in ("assign", "release", "setup_order", "mk", "dur_proc"):
        assert m.row_counts[fam] == n
    assert m.row_counts.get("task_order", 0) == sum(len(j.tasks) - 1 for j in inst.jobs)
    assert m.row_counts.get("job_prec", 0) == len(inst.job_precedence)
    assert m.row_counts.get("tard", 0) == sum(j.due_date is not None for j in inst.jobs)
    assert "deadline" not in m.row_counts
    assert m.row_counts.get("deadline", 0) == 0
    hard = export_milp(inst, hard_due_dates=True)
    assert hard.row_counts["deadline"] == m.row_counts["tard"]


def test_big_m_covers_release():
    inst = make_instance([([task({0: ({0: 2.0}, {0: 5.0})}, release=100.0)], None)])
    assert big_m(inst) == 1.5 * (2.0 * 1.5 + 5.0) + 100.0


def test_model_cap():
    with pytest.raises(ModelTooLarge) as err:
        export_milp(generate_instance(preset("realworld")), cap=1000)
    assert err.value.estimate > 1000


def infeasible_toy():
    # release 10 plus processing 5 cannot meet due date 12
    return make_instance([([task({0: ({0: 2.0}, {0: 5.0})}, release=10.0)], 12.0)])


def test_infeasible_toy_both_paths_agree():
    inst = infeasible_toy()
    tampered = Schedule()
    tampered.add(Operation(0, 0, "setup", 0, 0, 0.0, 2.0, 0))
    tampered.add(Operation(0, 0, "processing", 0, 0, 7.0, 12.0, 0))
    kinds = [v.kind for v in check_schedule_feasibility(inst, tampered)]
    assert kinds == ["ReleaseTimeViolation"]
    highspy = pytest.importorskip("highspy")
    assert solve_lp(highspy, export_milp(inst, fixed=tampered).text)[0] == "Infeasible"
    assert solve_lp(highspy, export_milp(inst, hard_due_dates=True).text)[0] == "Infeasible"
    status, obj = solve_lp(highspy, export_milp(inst).text)
    assert status == "Optimal" and obj == pytest.approx(0.5 * 15 + 0.5 * 3)


def solve_lp(highspy, text):
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 0.0)
    fd, path = tempfile.mkstemp(suffix=".lp")
    with os.fdopen(fd, "w") as f:
        f.write(text)
    try:
        h.readModel(path)
        h.run()
    finally:
        os.unlink(path)
    return h.modelStatusToString(h.getModelStatus()), h.getInfo().objective_function_value


@pytest.mark.parametrize("seed", range(8))
def test_solver_matches_oracle_on_two_tasks(seed):
    highspy = pytest.importorskip("highspy")
    inst = generate_instance(preset("tiny", seed=seed, n_tasks=2))
    base = reference_baseline(inst)
    status, obj = solve_lp(highspy, export_milp(inst, baseline=base).text)
    assert status == "Optimal"
    assert obj == pytest.approx(brute_force(inst, base).z, abs=1e-7)


@pytest.mark.parametrize("seed", range(4))
def test_simulated_schedules_feasible_for_solver(seed):
    highspy = pytest.importorskip("highspy")
    inst = generate_instance(preset("tiny", seed=seed))
    sched = simulate(inst, init_population(inst, 1, seed)[0]).schedule
    assert solve_lp(highspy, export_milp(inst, fixed=sched).text)[0] == "Optimal"


# -- report ------------------------------------------------------------------


def rec(dataset, heuristic, seed, ms, tt=0.0, z=1.0, curve=(), times=(), par=1):
    return ResultRecord(dataset, heuristic, seed, ms, tt, z, tuple(curve), tuple(times), par)


def test_report_sample_std():
    r = build_report([rec("d", "ga", 0, 10.0), rec("d", "ga", 1, 20.0)])
    c = r.cells["d", "ga"]
    assert c.ms_mean == 15 and c.ms_std == pytest.approx(7.0710678, rel=1e-6)


def test_identical_results_have_zero_std():
    r = build_report([rec("d", "ga", s, 42.0, 3.0) for s in range(10)])
    assert r.cells["d", "ga"].ms_std == 0 and r.cells["d", "ga"].tt_std == 0


def test_report_layout():
    rows = [rec(d, h, s, 10.0 + s) for d in ("a", "b") for h in ("str", "ga", "gasa") for s in range(5)]
    r = build_report(rows)
    for table in (r.means_table(), r.std_table()):
        lines = table.splitlines()
        assert len(lines) == 1 + 2
        assert lines[0].split("\t") == ["dataset", "str MS", "str TT", "ga MS", "ga TT", "gasa MS", "gasa TT"]
    assert len(r.results_table().splitlines()) == 1 + 30


def test_report_curves_and_timing():
    rows = [
        rec("d", "ga", 0, 1.0, curve=(3.0, 2.0, 1.0), times=(0.1, 0.1, 0.1), par=1),
        rec("d", "ga", 1, 1.0, curve=(5.0, 4.0), times=(0.2, 0.2), par=2),
    ]
    r = build_report(rows)
    assert r.curves["d", "ga"] == [4.0, 3.0, 2.5]
    assert len(r.timing_table().splitlines()) == 1 + 2


def test_report_errors():
    with pytest.raises(ValueError):
        build_report([])
    with pytest.raises(ValueError):
        build_report([rec("d", "ga", 0, 1.0)], min_seeds=2)
