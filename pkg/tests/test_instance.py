import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_instance, task
from drcsched.instance import (
    PROCESSING,
    SETUP,
    CycleError,
    Operation,
    Schedule,
    ScheduleMetrics,
    Station,
    check_schedule_feasibility,
    layer_dag,
    makespan,
    scalarize,
    topology_groups,
    total_tardiness,
    validate_instance,
)


def two_job_instance():
    return make_instance(
        [
            ([task({0: ({0: 2.0}, {0: 4.0})})], 20.0),
            ([task({0: ({0: 1.0}, {0: 3.0})}), task({0: ({0: 1.0}, {0: 2.0})})], None),
        ]
    )


def ops_schedule(*ops):
    s = Schedule()
    for op in ops:
        s.add(op)
    return s


# -- validation --------------------------------------------------------------


def test_well_formed_instance_has_empty_report():
    assert validate_instance(two_job_instance()).ok


def test_job_cycle_reported_once():
    inst = make_instance(
        [([task({0: ({0: 1.0}, {0: 1.0})})], None), ([task({0: ({0: 1.0}, {0: 1.0})})], None)],
        precedence=[(0, 1), (1, 0)],
    )
    report = validate_instance(inst)
    assert report.kinds() == ["cyclic job precedence"]


def test_factor_outside_range_reported():
    inst = make_instance(
        [([task({0: ({0: 1.0}, {0: 1.0})})], None), ([task({0: ({0: 1.0}, {0: 1.0})})], None)],
        factors={0: {((0, 0), (1, 0)): 0.7}},
    )
    assert "factor out of [-1, 0.5]" in validate_instance(inst).kinds()


def test_due_date_on_job_with_successor_rejected():
    inst = make_instance(
        [([task({0: ({0: 1.0}, {0: 1.0})})], 5.0), ([task({0: ({0: 1.0}, {0: 1.0})})], None)],
        precedence=[(0, 1)],
    )
    assert "due date" in validate_instance(inst).kinds()


def test_empty_alternatives_and_bad_weights_reported():
    from drcsched.instance import TaskSpec

    inst = make_instance([([TaskSpec(0.0, ())], None)], weights=(0.7, 0.7))
    kinds = validate_instance(inst).kinds()
    assert "empty alternative set" in kinds and "objective weights" in kinds


# -- topology ----------------------------------------------------------------


def test_independent_tasks_all_in_first_group():
    inst = make_instance([([task({0: ({0: 1.0}, {0: 1.0})})], None)] * 3)
    assert set(topology_groups(inst).values()) == {1}


def test_chain_layers():
    one = task({0: ({0: 1.0}, {0: 1.0})})
    inst = make_instance([([one, one, one], None)])
    assert topology_groups(inst) == {(0, 0): 1, (0, 1): 2, (0, 2): 3}


def test_diamond_layers():
    preds = {"t1": (), "t2": ("t1",), "t3": ("t1",), "t4": ("t2", "t3")}
    assert layer_dag(["t1", "t2", "t3", "t4"], preds) == {"t1": 1, "t2": 2, "t3": 2, "t4": 3}


def test_cycle_raises_with_task():
    with pytest.raises(CycleError) as err:
        layer_dag(["a", "b"], {"a": ("b",), "b": ("a",)})
    assert err.value.task in ("a", "b")


@given(st.integers(min_value=0, max_value=10_000))
def test_generated_layering_respects_every_edge(seed):
    from drcsched.dataio import generate_instance, preset

    inst = generate_instance(preset("gbrt01", seed=seed))
    groups = topology_groups(inst)
    assert set(groups) == set(inst.tasks)
    for t, preds in inst.task_predecessors.items():
        for p in preds:
            assert groups[p] < groups[t]


# -- objectives --------------------------------------------------------------


def test_makespan_is_max_end():
    s = ops_schedule(
        Operation(0, 0, PROCESSING, 0, 0, 0, 5),
        Operation(1, 0, PROCESSING, 0, 0, 0, 9),
        Operation(2, 0, PROCESSING, 0, 0, 0, 7),
    )
    assert makespan(s) == 9
    assert makespan(ops_schedule(Operation(0, 0, PROCESSING, 0, 0, 0, 4))) == 4
    with pytest.raises(ValueError):
        makespan(Schedule())


def test_total_tardiness_sums_positive_parts():
    one = task({0: ({0: 1.0}, {0: 1.0})})
    inst = make_instance([([one], 12.0), ([one], 12.0), ([one], 18.0)])
    s = ops_schedule(
        Operation(0, 0, PROCESSING, 0, 0, 14, 15),
        Operation(1, 0, PROCESSING, 0, 0, 9, 10),
        Operation(2, 0, PROCESSING, 0, 0, 19, 20),
    )
    assert total_tardiness(s, inst) == 5


@given(st.floats(0, 100), st.floats(0, 50), st.floats(0, 100))
def test_tardiness_monotone_in_completion(end, due, delay):
    inst = make_instance([([task({0: ({0: 1.0}, {0: 1.0})})], due)])
    early = ops_schedule(Operation(0, 0, PROCESSING, 0, 0, 0, end))
    late = ops_schedule(Operation(0, 0, PROCESSING, 0, 0, 0, end + delay))
    t0, t1 = total_tardiness(early, inst), total_tardiness(late, inst)
    assert t0 >= 0 and t0 >= end - due
    assert t1 >= t0


def test_scalarize_examples():
    base = ScheduleMetrics(100.0, 10.0)
    assert scalarize(ScheduleMetrics(100.0, 10.0), base) == 1.0
    assert scalarize(ScheduleMetrics(50.0, 99.0), base, (1.0, 0.0)) == 0.5
    assert scalarize(ScheduleMetrics(80.0, 4.0), base) == pytest.approx(0.6)
    with pytest.raises(ValueError):
        scalarize(base, ScheduleMetrics(0.0, 1.0))


def test_scalarize_floors_tardiness_baseline():
    assert scalarize(ScheduleMetrics(10.0, 3.0), ScheduleMetrics(10.0, 0.0)) == pytest.approx(0.5 + 1.5)


@given(
    st.floats(1, 1e4), st.floats(0, 1e4), st.floats(0, 1e3), st.floats(0, 1e3), st.floats(0.01, 0.99)
)
def test_scalarize_monotone(ms, tt, d_ms, d_tt, w1):
    base = ScheduleMetrics(500.0, 20.0)
    w = (w1, 1 - w1)
    z0 = scalarize(ScheduleMetrics(ms, tt), base, w)
    assert scalarize(ScheduleMetrics(ms + d_ms, tt), base, w) >= z0
    assert scalarize(ScheduleMetrics(ms, tt + d_tt), base, w) >= z0


# -- feasibility oracle ------------------------------------------------------


def test_one_task_feasible(single_task):
    s = ops_schedule(Operation(0, 0, SETUP, 0, 0, 0, 2), Operation(0, 0, PROCESSING, 0, 0, 2, 7))
    assert check_schedule_feasibility(single_task, s) == []


def test_release_violation():
    inst = make_instance([([task({0: ({0: 2.0}, {0: 5.0})}, release=5.0)], None)])
    s = ops_schedule(Operation(0, 0, SETUP, 0, 0, 0, 2), Operation(0, 0, PROCESSING, 0, 0, 3, 8))
    kinds = [v.kind for v in check_schedule_feasibility(inst, s)]
    assert kinds == ["ReleaseTimeViolation"]


def test_full_attention_overlap_violates_worker_capacity():
    inst = make_instance(
        [([task({0: ({}, {0: 5.0})})], None), ([task({1: ({}, {0: 5.0})})], None)],
        n_stations=2,
        setups=False,
    )
    s = ops_schedule(Operation(0, 0, PROCESSING, 0, 0, 0, 5), Operation(1, 0, PROCESSING, 1, 0, 2, 7))
    kinds = [v.kind for v in check_schedule_feasibility(inst, s)]
    assert kinds == ["WorkerCapacityViolation"]


def test_partial_attention_overlap_allowed():
    inst = make_instance(
        [
            ([task({0: ({}, {0: 5.0})}, automation={0: 0.5})], None),
            ([task({1: ({}, {0: 5.0})}, automation={1: 0.5})], None),
        ],
        n_stations=2,
        setups=False,
    )
    s = ops_schedule(Operation(0, 0, PROCESSING, 0, 0, 0, 5), Operation(1, 0, PROCESSING, 1, 0, 0, 5))
    assert check_schedule_feasibility(inst, s) == []


def test_wrong_setup_duration_and_missing_op():
    inst = make_instance(
        [([task({0: ({0: 10.0}, {0: 5.0})})], None), ([task({0: ({0: 10.0}, {0: 5.0})})], None)],
        factors={0: {((0, 0), (1, 0)): -1.0}},
    )
    good = ops_schedule(
        Operation(0, 0, SETUP, 0, 0, 0, 10),
        Operation(0, 0, PROCESSING, 0, 0, 10, 15),
        Operation(1, 0, SETUP, 0, 0, 15, 15),
        Operation(1, 0, PROCESSING, 0, 0, 15, 20),
    )
    assert check_schedule_feasibility(inst, good) == []
    bad = ops_schedule(*[op for op in good if op.key != (1, 0, SETUP)])
    assert [v.kind for v in check_schedule_feasibility(inst, bad)] == ["StructuralViolation"]


def test_interleaved_setup_violates_adjacency():
    inst = make_instance(
        [([task({0: ({0: 1.0}, {0: 5.0})})], None), ([task({0: ({0: 1.0}, {0: 5.0})})], None)],
        n_workers=1,
    )
    # task (1,0) is set up between the setup and processing of (0,0)
    s = ops_schedule(
        Operation(0, 0, SETUP, 0, 0, 0, 1),
        Operation(1, 0, SETUP, 0, 0, 1, 2),
        Operation(0, 0, PROCESSING, 0, 0, 2, 7),
        Operation(1, 0, PROCESSING, 0, 0, 7, 12),
    )
    assert check_schedule_feasibility(inst, s) != []


def test_station_factor_defaults_to_zero():
    assert Station(0).factor((0, 0), (1, 0)) == 0.0
    assert Station(0).factor(None, (1, 0)) == 0.0
    assert math.isclose(Station(0, sequence_factor={((0, 0), (1, 0)): 0.5}).factor((0, 0), (1, 0)), 0.5)
