import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_instance, task
from drcsched.dataio import generate_instance, preset
from drcsched.genome import DispatchRule, build_genome, init_population, random_genome
from drcsched.instance import PROCESSING, SETUP, check_schedule_feasibility
from drcsched.sim import (
    N_FEATURES,
    Flip,
    SimState,
    compile_instance,
    setup_duration,
    simulate,
    sort_queue,
)


class ScriptedPolicy:
    """Returns the same (rule, flip) at every decision point."""

    def __init__(self, rule=DispatchRule.SPT, flip=Flip.NF, times=None):
        self.rule, self.flip, self.times = rule, flip, times

    def decide(self, features, state, station):
        if self.times is not None:
            if self.times == 0:
                return self.rule, Flip.NF
            self.times -= 1
        return self.rule, self.flip


def genome_for(inst, assignment=None, rule=DispatchRule.FIFO):
    assignment = assignment or {t: (0, 0 if inst.stations[0].requires_setup else None, 0) for t in inst.tasks}
    return build_genome(inst, assignment, [rule] * len(inst.stations))


def ops(schedule, tid):
    return schedule.setup(tid), schedule.processing(tid)


# -- decoding examples -------------------------------------------------------


def test_single_task_timeline(single_task):
    res = simulate(single_task, genome_for(single_task))
    s, p = ops(res.schedule, (0, 0))
    assert (s.start, s.end, p.start, p.end) == (0, 2, 2, 7)
    assert res.metrics.makespan == 7


def test_setup_left_shifted_before_release():
    inst = make_instance([([task({0: ({0: 2.0}, {0: 5.0})}, release=10.0)], None)])
    res = simulate(inst, genome_for(inst))
    s, p = ops(res.schedule, (0, 0))
    assert (s.start, s.end, p.start, p.end) == (0, 2, 10, 15)
    assert res.metrics.makespan == 15


def test_half_attention_operations_overlap():
    inst = make_instance(
        [
            ([task({0: ({}, {0: 5.0})}, automation={0: 0.5})], None),
            ([task({1: ({}, {0: 5.0})}, automation={1: 0.5})], None),
        ],
        n_stations=2,
        setups=False,
    )
    g = genome_for(inst, {(0, 0): (0, None, 0), (1, 0): (1, None, 0)})
    res = simulate(inst, g)
    assert res.schedule.processing((0, 0)).start == res.schedule.processing((1, 0)).start == 0
    assert res.metrics.makespan == 5


def test_full_attention_operations_serialize():
    inst = make_instance(
        [([task({0: ({}, {0: 5.0})})], None), ([task({1: ({}, {0: 5.0})})], None)],
        n_stations=2,
        setups=False,
    )
    g = genome_for(inst, {(0, 0): (0, None, 0), (1, 0): (1, None, 0)})
    assert simulate(inst, g).metrics.makespan == 10


def test_multi_slot_station_runs_in_parallel():
    one = task({0: ({}, {0: 4.0}, )}, automation={0: 0.25})
    inst = make_instance([([one], None)] * 3, setups=False, slots=2)
    res = simulate(inst, genome_for(inst))
    assert sorted(op.start for op in res.schedule if op.kind == PROCESSING) == [0, 0, 4]
    assert check_schedule_feasibility(inst, res.schedule) == []


def test_precedence_waits_for_predecessor():
    inst = make_instance([([task({0: ({0: 1.0}, {0: 3.0})}), task({1: ({0: 1.0}, {0: 2.0})})], None)], n_stations=2, n_workers=1)
    g = genome_for(inst, {(0, 0): (0, 0, 0), (0, 1): (1, 0, 0)})
    res = simulate(inst, g)
    assert res.schedule.processing((0, 1)).start >= res.schedule.processing((0, 0)).end
    assert check_schedule_feasibility(inst, res.schedule) == []


# -- setup model -------------------------------------------------------------


@pytest.mark.parametrize("factor,expected", [(0.0, 10.0), (-1.0, 0.0), (0.5, 15.0)])
def test_setup_duration_factor(factor, expected):
    inst = make_instance(
        [([task({0: ({0: 10.0}, {0: 1.0})})], None), ([task({0: ({0: 10.0}, {0: 1.0})})], None)],
        factors={0: {((0, 0), (1, 0)): factor}},
    )
    assert setup_duration((0, 0), (1, 0), 0, 0, inst) == expected
    assert setup_duration(None, (1, 0), 0, 0, inst) == 10.0


def test_setup_duration_rejects_foreign_worker(single_task):
    with pytest.raises(ValueError):
        setup_duration(None, (0, 0), 0, 3, single_task)


def test_sequence_factor_applied_in_decoding():
    inst = make_instance(
        [([task({0: ({0: 10.0}, {0: 5.0})})], None), ([task({0: ({0: 10.0}, {0: 5.0})})], None)],
        factors={0: {((0, 0), (1, 0)): -1.0}},
    )
    res = simulate(inst, genome_for(inst))
    setup = res.schedule.setup((1, 0))
    assert setup.end - setup.start == 0


# -- dispatching rules -------------------------------------------------------


def queue_state(durations, dues=None, rule=DispatchRule.FIFO):
    dues = dues or [None] * len(durations)
    inst = make_instance([([task({0: ({}, {0: d})})], due) for d, due in zip(durations, dues)], setups=False)
    c = compile_instance(inst)
    n = len(durations)
    return SimState(c, [0] * n, [None] * n, [0] * n, [rule]), n


def test_spt_and_lpt():
    state, n = queue_state([7.0, 3.0, 5.0])
    assert sort_queue(DispatchRule.SPT, range(n), state) == [1, 2, 0]
    assert sort_queue(DispatchRule.LPT, range(n), state) == [0, 2, 1]


def test_fifo_keeps_arrival_order():
    state, n = queue_state([7.0, 3.0, 5.0])
    assert sort_queue(DispatchRule.FIFO, [0, 1, 2], state) == [0, 1, 2]


def test_str_orders_by_slack_with_undue_last():
    # slacks: 3-5 = -2, 10-6 = 4, no due date
    state, n = queue_state([6.0, 5.0, 1.0], dues=[10.0, 3.0, None])
    assert sort_queue(DispatchRule.STR, range(n), state) == [1, 0, 2]


def test_mtwr_prefers_more_remaining_work():
    inst = make_instance(
        [
            ([task({0: ({}, {0: 2.0})})], None),
            ([task({0: ({}, {0: 1.0})}), task({0: ({}, {0: 4.0})})], None),
        ],
        setups=False,
    )
    state = SimState(compile_instance(inst), [0] * 3, [None] * 3, [0] * 3, [DispatchRule.MTWR])
    assert sort_queue(DispatchRule.MTWR, [0, 1], state) == [1, 0]


def test_ties_break_on_task_id():
    state, n = queue_state([4.0, 4.0, 4.0])
    assert sort_queue(DispatchRule.SPT, [2, 0, 1], state) == [0, 1, 2]
    assert sort_queue(DispatchRule.LPT, [2, 0, 1], state) == [0, 1, 2]


# -- features and flips ------------------------------------------------------


def test_features_single_candidate(single_task):
    res = simulate(single_task, genome_for(single_task), ScriptedPolicy())
    (dp,) = res.decisions
    assert dp.features.shape == (N_FEATURES,)
    assert dp.features[7] == 0
    assert all(dp.features[i] == 0 for i in (9, 10, 11, 12))


def test_features_competing_tasks():
    one = task({0: ({0: 1.0}, {0: 2.0})})
    inst = make_instance([([one], None), ([one], None)])
    res = simulate(inst, genome_for(inst), ScriptedPolicy())
    assert res.decisions[0].features[7] == 1
    assert res.decisions[-1].features[7] == 0


def test_no_flip_leaves_genome_unchanged():
    inst = generate_instance(preset("gbrt02", seed=1))
    g = init_population(inst, 1, 0)[0]
    res = simulate(inst, g, ScriptedPolicy(DispatchRule.SPT, Flip.NF))
    assert res.genome == g
    assert not any(d.flip_applied for d in res.decisions)


def test_station_flip_without_alternative_degrades():
    one = task({0: ({0: 1.0}, {0: 2.0})})
    inst = make_instance([([one], None), ([one], None)])
    g = genome_for(inst)
    res = simulate(inst, g, ScriptedPolicy(DispatchRule.SPT, Flip.SF))
    assert not any(d.flip_applied for d in res.decisions)
    assert res.genome == g


def test_station_flip_moves_second_task():
    both = task({0: ({0: 1.0}, {0: 2.0}), 1: ({0: 1.0}, {0: 2.0})})
    inst = make_instance([([both], None), ([both], None)], n_stations=2)
    g = genome_for(inst, {(0, 0): (0, 0, 0), (1, 0): (0, 0, 0)})
    res = simulate(inst, g, ScriptedPolicy(DispatchRule.SPT, Flip.SF, times=1))
    assert res.decisions[0].flip_applied
    genes = {x.task: x for x in res.genome.allocation}
    assert genes[(1, 0)].station == 1 and genes[(0, 0)].station == 0
    assert res.schedule.processing((1, 0)).station == 1
    unchanged = simulate(inst, g, ScriptedPolicy(DispatchRule.SPT, Flip.SF, times=1), writeback=False)
    assert unchanged.genome == g


def test_worker_flip_reassigns_first_task():
    one = task({0: ({0: 1.0}, {0: 2.0, 1: 3.0})})
    inst = make_instance([([one], None)], n_workers=2)
    g = genome_for(inst, {(0, 0): (0, 0, 0)})
    res = simulate(inst, g, ScriptedPolicy(DispatchRule.SPT, Flip.WF))
    assert res.genome.allocation[0].processing_worker == 1
    assert res.schedule.processing((0, 0)).worker == 1


# -- properties --------------------------------------------------------------


@given(st.integers(0, 2**31 - 1))
def test_random_genomes_decode_feasibly(seed):
    rng = random.Random(seed)
    name = rng.choice(["gbrt01", "gbrt02"])
    inst = generate_instance(preset(name, seed=seed % 1000))
    g = random_genome(inst, rng)
    res = simulate(inst, g)
    assert check_schedule_feasibility(inst, res.schedule) == []
    setups = {op.task_id for op in res.schedule if op.kind == SETUP}
    procs = [op.task_id for op in res.schedule if op.kind == PROCESSING]
    assert sorted(procs) == sorted(inst.tasks)
    for t in inst.tasks:
        k = res.genome.allocation[[x.task for x in res.genome.allocation].index(t)].station
        assert (t in setups) == inst.stations[k].requires_setup


@given(st.integers(0, 10_000))
def test_policy_decoding_feasible_and_monotone(seed):
    inst = generate_instance(preset("gbrt02", seed=seed))
    g = init_population(inst, 1, seed)[0]
    rng = random.Random(seed)

    class RandomPolicy:
        def decide(self, features, state, station):
            return rng.choice(list(DispatchRule)), rng.choice(list(Flip))

    res = simulate(inst, g, RandomPolicy())
    assert check_schedule_feasibility(inst, res.schedule) == []
    times = [d.time for d in res.decisions]
    assert times == sorted(times)
    assert all(d.candidates for d in res.decisions)


def test_decoding_is_deterministic():
    inst = generate_instance(preset("gbrt01", seed=2))
    g = init_population(inst, 1, 0)[0]
    a, b = simulate(inst, g, trace=True), simulate(inst, g, trace=True)
    assert list(a.schedule) == list(b.schedule)
    assert a.metrics.makespan == b.metrics.makespan and a.trace == b.trace


def test_littles_law_on_stream():
    rng = random.Random(5)
    jobs = [([task({0: ({}, {0: rng.uniform(2.0, 5.0)})}, release=4.0 * i)], None) for i in range(200)]
    inst = make_instance(jobs, setups=False)
    res = simulate(inst, genome_for(inst))
    m = res.metrics
    wip = m.average_wip(0)
    assert wip == pytest.approx(m.throughput_rate(0) * m.mean_flow_time, rel=0.05)
    assert wip > 0
