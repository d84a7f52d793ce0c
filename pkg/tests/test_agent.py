import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from drcsched.agent import (
    FLIP_ACTIONS,
    RULE_ACTIONS,
    Adam,
    Agent,
    CheckpointError,
    LossConfig,
    NetShape,
    PolicyNet,
    SimEnv,
    ToyRuleEnv,
    TrainerConfig,
    act,
    final_reward,
    gae,
    intermediate_reward,
    load_policy,
    ppo_loss,
    save_policy,
    train,
)
from drcsched.agent.net import MAGIC
from drcsched.dataio import generate_instance, preset
from drcsched.genome import DispatchRule, init_population
from drcsched.instance import check_schedule_feasibility
from drcsched.search import reference_baseline
from drcsched.sim import Flip, simulate

SMALL = NetShape(n_in=17, trunk=16, policy=8, value=(8, 4))
finite17 = arrays(np.float64, 17, elements=st.floats(-1e3, 1e3))


def features(**entries):
    """17-vector from 1-based feature numbers."""
    f = np.zeros(17)
    for key, value in entries.items():
        f[int(key[1:]) - 1] = value
    return f


# -- acting ------------------------------------------------------------------


def test_default_shape_sizes():
    net = PolicyNet()
    assert net.params["W0"].shape == (17, 512)
    assert net.params["Wp"].shape == (512, 64)
    assert net.params["Wv1"].shape == (512, 128) and net.params["Wv2"].shape == (128, 64)
    assert net.params["Wr"].shape[1] == 4 and net.params["Wf"].shape[1] == 3


@given(finite17)
def test_group_probabilities_sum_to_one(x):
    p_rule, p_flip, _ = PolicyNet(SMALL, seed=1).probabilities(x)
    assert abs(p_rule.sum() - 1) < 1e-6 and abs(p_flip.sum() - 1) < 1e-6


def test_greedy_is_deterministic():
    net = PolicyNet(SMALL, seed=2)
    x = np.random.default_rng(0).standard_normal(17)
    a, b = act(net, x, "greedy"), act(net, x, "greedy")
    assert (a.rule, a.flip) == (b.rule, b.flip)


def test_fresh_net_samples_every_pair():
    net = PolicyNet(seed=0)
    rng = np.random.default_rng(1)
    x = np.ones(17)
    seen = {(a.rule, a.flip) for a in (act(net, x, "sample", rng) for _ in range(10_000))}
    assert seen == set(itertools.product(range(4), range(3)))


def test_action_sets():
    assert set(RULE_ACTIONS) == {DispatchRule.SPT, DispatchRule.LPT, DispatchRule.MTWR, DispatchRule.STR}
    assert set(FLIP_ACTIONS) == {Flip.SF, Flip.WF, Flip.NF}


def test_non_finite_features_rejected():
    with pytest.raises(ValueError):
        act(PolicyNet(SMALL), np.full(17, np.nan))


def test_agent_mode_checked():
    with pytest.raises(ValueError):
        Agent(PolicyNet(SMALL), "argmax")


# -- rewards -----------------------------------------------------------------


def test_station_flip_without_competition_penalized():
    assert intermediate_reward(features(f8=0), features(), "SPT", "SF") == -3


def test_no_branch_fires():
    assert intermediate_reward(features(), features(), "SPT", "NF") == 0


def test_worker_flip_with_slack_bonus():
    last = features(f6=3.0, f9=2.0)
    assert intermediate_reward(last, features(f14=2.0), "SPT", "WF") == 4


def test_station_flip_on_overloaded_station():
    last = features(f8=1, f3=0.6, f5=0.3)
    assert intermediate_reward(last, features(), "LPT", "SF") == 2


def test_worker_flip_zero_slots_gives_nothing():
    assert intermediate_reward(features(f6=5.0, f9=0.0), features(), "SPT", "WF") == 0


def test_slack_rule_and_throughput_bonus():
    last = features(f15=-1.0, f16=2.0, f12=0.1)
    assert intermediate_reward(last, features(f12=0.2), "STR", "NF") == 1 + 3


def test_throughput_modes():
    last, cur = features(f12=0.1), features(f12=0.2)
    assert intermediate_reward(last, cur, "SPT", "NF", "improved") == 3
    assert intermediate_reward(last, cur, "SPT", "NF", "from_zero") == 0
    assert intermediate_reward(features(), cur, "SPT", "NF", "from_zero") == 3
    with pytest.raises(ValueError):
        intermediate_reward(last, cur, "SPT", "NF", "bogus")


@pytest.mark.parametrize(
    "flip,f8,share_up,ratio,str_rule,slack_low,tp_up,c14",
    list(itertools.product(["SF", "WF", "NF"], [0, 1], [False, True], [0.5, 1.5], [False, True], [False, True], [False, True], [0, 2])),
)
def test_truth_table(flip, f8, share_up, ratio, str_rule, slack_low, tp_up, c14):
    last = features(f8=f8, f3=0.6 if share_up else 0.2, f5=0.4, f6=ratio * 2, f9=2, f15=-1 if slack_low else 5, f16=0, f12=0.1)
    cur = features(f12=0.3 if tp_up else 0.1, f14=c14)
    if flip == "SF":
        r = -3 if f8 == 0 else (2 if share_up else 0)
    elif flip == "WF":
        r = 1 if ratio > 1 else 0
    else:
        r = 0
    r += (1 if str_rule and slack_low else 0) + (3 if tp_up else 0) + (3 if c14 > 0 else 0)
    assert intermediate_reward(last, cur, "STR" if str_rule else "SPT", flip) == r


def test_final_reward_values():
    assert final_reward(0.7, 0.7, 9) == 0
    assert final_reward(1.0, 0.9, 5) == pytest.approx(50)
    assert final_reward(0.5, 0.6, 3) < 0
    with pytest.raises(ValueError):
        final_reward(1.0, 0.9, 0)


@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(1, 500))
def test_final_reward_quadratic_in_steps(label, achieved, s):
    assert final_reward(label, achieved, 2 * s) == pytest.approx(4 * final_reward(label, achieved, s))


def test_episode_return_is_sum_of_parts():
    inst = generate_instance(preset("gbrt02", seed=0))
    g = init_population(inst, 1, 0)[0]
    env = SimEnv(inst, g, reference_baseline(inst), fit_label=0.5)
    net, rng = PolicyNet(SMALL, seed=0), np.random.default_rng(0)
    taken = []

    def actor(x):
        a = act(net, x, "sample", rng)
        taken.append(a)
        return a

    out = env.run_episode(actor)
    assert len(out.rewards) == len(taken) >= 1
    assert out.final_reward == pytest.approx(final_reward(0.5, out.info["z"], len(taken)))
    # intermediate rewards are integers, the remainder is the final reward
    assert sum(out.rewards) - out.final_reward == pytest.approx(round(sum(out.rewards) - out.final_reward))


# -- gradients and optimization ---------------------------------------------


def test_ppo_gradients_match_finite_differences():
    net = PolicyNet(NetShape(n_in=4, trunk=8, policy=6, value=(5, 4)), seed=1, policy_gain=1.0)
    rng = np.random.default_rng(0)
    n = 7
    obs = rng.standard_normal((n, 4))
    a_rule, a_flip = rng.integers(0, 4, n), rng.integers(0, 3, n)
    c = net.forward(obs)
    logp = c["lr"][np.arange(n), a_rule] + c["lf"][np.arange(n), a_flip]
    old = logp + rng.normal(0, 0.05, n)
    adv, ret = rng.standard_normal(n), rng.standard_normal(n)
    args = (obs, a_rule, a_flip, old, adv, ret, LossConfig())
    _, grads, _ = ppo_loss(net, *args)
    h = 1e-5
    for name, p in net.params.items():
        num = np.zeros_like(p)
        for i in np.ndindex(p.shape):
            orig = p[i]
            p[i] = orig + h
            up = ppo_loss(net, *args)[0]
            p[i] = orig - h
            down = ppo_loss(net, *args)[0]
            p[i] = orig
            num[i] = (up - down) / (2 * h)
        rel = np.linalg.norm(num - grads[name]) / max(np.linalg.norm(num), np.linalg.norm(grads[name]), 1e-12)
        assert rel < 1e-4, name


def test_probabilities_normalized_after_steps():
    net = PolicyNet(SMALL, seed=3)
    opt = Adam(net.params)
    rng = np.random.default_rng(0)
    obs = rng.standard_normal((16, 17))
    for _ in range(5):
        _, g, _ = ppo_loss(net, obs, rng.integers(0, 4, 16), rng.integers(0, 3, 16), np.full(16, -2.5),
                           rng.standard_normal(16), rng.standard_normal(16))
        opt.step(net.params, g, 1e-2)
        p_r, p_f, _ = net.probabilities(obs)
        assert np.allclose(p_r.sum(1), 1, atol=1e-6) and np.allclose(p_f.sum(1), 1, atol=1e-6)


def test_gae_single_step_and_bootstrap():
    adv, ret = gae(np.array([1.0]), np.array([0.5]), np.array([True]), 0.9, 0.95)
    assert adv[0] == pytest.approx(0.5) and ret[0] == pytest.approx(1.0)
    adv, _ = gae(np.array([0.0, 1.0]), np.array([0.0, 0.0]), np.array([False, True]), 0.5, 1.0)
    assert adv.tolist() == pytest.approx([0.5, 1.0])


def test_learning_rate_schedule():
    cfg = TrainerConfig(total_steps=1000)
    lrs = [cfg.lr_at(s) for s in range(0, 1001, 50)]
    assert lrs[0] == pytest.approx(1e-4) and lrs[-1] == 0
    assert all(b <= a for a, b in zip(lrs, lrs[1:]))
    assert cfg.lr_at(5000) == 0


def test_trainer_config_rejects_bad_discount():
    with pytest.raises(ValueError):
        TrainerConfig(gamma=0.0)


def test_toy_environment_learns_dominant_rule():
    net, log = train(ToyRuleEnv(length=5), TrainerConfig(total_steps=3000, learning_rate=1e-3), seed=0)
    xs = np.random.default_rng(5).standard_normal((200, 17))
    picks = [act(net, x, "greedy").dispatch_rule for x in xs]
    assert np.mean([p == DispatchRule.STR for p in picks]) > 0.9
    assert log[-1].mean_episode_reward > log[0].mean_episode_reward


def test_trained_agent_decodes_feasibly():
    inst = generate_instance(preset("gbrt02", seed=2))
    env = SimEnv(inst, init_population(inst, 1, 0)[0], reference_baseline(inst), fit_label=0.6)
    net, log = train(env, TrainerConfig(total_steps=300, shape=SMALL), seed=0)
    assert all(np.isfinite(entry.loss) for entry in log)
    res = simulate(inst, init_population(inst, 1, 1)[0], Agent(net, "sample"), rng_seed=4)
    again = simulate(inst, init_population(inst, 1, 1)[0], Agent(net, "sample"), rng_seed=4)
    assert check_schedule_feasibility(inst, res.schedule) == []
    assert list(res.schedule) == list(again.schedule)


# -- checkpoints -------------------------------------------------------------


@given(st.integers(0, 1000))
def test_checkpoint_round_trip(seed):
    net = PolicyNet(SMALL, seed=seed)
    net.norm.update(np.random.default_rng(seed).standard_normal((5, 17)))
    net.round32()
    back = load_policy(save_policy(net))
    x = np.random.default_rng(seed + 1).standard_normal((3, 17))
    for a, b in zip(net.probabilities(x), back.probabilities(x)):
        assert np.array_equal(a, b)
    assert save_policy(back) == save_policy(net)


def test_checkpoint_errors():
    data = save_policy(PolicyNet(SMALL))
    with pytest.raises(CheckpointError, match="truncated"):
        load_policy(data[:-3])
    with pytest.raises(CheckpointError, match="magic"):
        load_policy(b"X" + data[1:])
    bumped = bytearray(data)
    bumped[len(MAGIC)] = 9
    with pytest.raises(CheckpointError, match="version"):
        load_policy(bytes(bumped))
    with pytest.raises(CheckpointError, match="trailing"):
        load_policy(data + b"\0\0\0\0")
