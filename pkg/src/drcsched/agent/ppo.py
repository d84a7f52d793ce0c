"""PPO training loop.

An environment exposes ``run_episode(actor) -> EpisodeOutcome``. The actor is
called at every decision with the raw feature vector and returns an
:class:`Action`; the environment answers with one reward per call. The
simulator environment pauses the decode at each decision point this way.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..genome import DispatchRule, Genome
from ..instance import ProblemInstance, ScheduleMetrics, scalarize
from ..sim import extract_features, simulate
from .net import Action, Adam, LossConfig, NetShape, PolicyNet, RunningNorm, act, clip_grad_norm, ppo_loss
from .policy import Agent
from .rewards import final_reward, intermediate_reward


class TrainingDiverged(FloatingPointError):
    def __init__(self, update: int, what: str = "loss"):
        super().__init__(f"non-finite {what} at update {update}")
        self.update = update


@dataclass(frozen=True)
class TrainerConfig:
    total_steps: int = 30_000
    update_episodes: int = 10
    learning_rate: float = 1e-4
    gamma: float = 0.999
    gae_lambda: float = 0.95
    clip: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    minibatch: int = 64
    epochs: int = 4
    normalize_advantages: bool = True
    scale_rewards: bool = True  # divide rewards by a running std of discounted returns
    adam_eps: float = 1e-5
    throughput_mode: str = "improved"
    pool_size: int = 1  # warm-up elites decoded during training (1 = best genome only)
    shape: NetShape = field(default_factory=NetShape)

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("discount must lie in (0, 1]")
        if self.total_steps < 1 or self.update_episodes < 1:
            raise ValueError("total_steps and update_episodes must be positive")

    def lr_at(self, step: int) -> float:
        """Linearly decaying learning rate, zero at ``total_steps``."""
        return self.learning_rate * max(0.0, 1.0 - step / self.total_steps)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Transition:
    obs: np.ndarray  # normalized features
    a_rule: int
    a_flip: int
    logp: float
    logp_rule: float
    logp_flip: float
    value: float
    reward: float = 0.0
    done: bool = False
    final_reward: float = 0.0  # part of ``reward`` on the last transition


@dataclass
class EpisodeOutcome:
    rewards: list[float]
    final_reward: float = 0.0  # already included in rewards[-1]
    info: dict = field(default_factory=dict)


@dataclass
class UpdateLog:
    update: int
    steps: int
    episodes: int
    loss: float
    policy_loss: float
    value_loss: float
    entropy: float
    mean_episode_reward: float
    mean_episode_length: float
    learning_rate: float


def gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray, gamma: float, lam: float):
    """Generalized advantage estimates and returns; episodes end at ``dones``
    with a zero bootstrap value."""
    n = len(rewards)
    adv = np.zeros(n)
    last = 0.0
    for t in range(n - 1, -1, -1):
        next_v = 0.0 if dones[t] else values[t + 1]
        nonterminal = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * next_v - values[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
    return adv, adv + values


def train(
    env,
    config: TrainerConfig = TrainerConfig(),
    seed: int = 0,
    net: PolicyNet | None = None,
) -> tuple[PolicyNet, list[UpdateLog]]:
    """Train ``net`` (fresh if omitted) on ``env`` for ``config.total_steps``
    decisions. Raises :class:`TrainingDiverged` on a non-finite loss."""
    rng = np.random.default_rng(seed)
    net = net if net is not None else PolicyNet(config.shape, seed=seed)
    opt = Adam(net.params, eps=config.adam_eps)
    loss_cfg = LossConfig(config.clip, config.value_coef, config.entropy_coef)
    log: list[UpdateLog] = []
    return_stats = RunningNorm(1)
    steps = 0
    update = 0
    while steps < config.total_steps:
        batch: list[Transition] = []
        ep_returns, ep_lengths = [], []
        for _ in range(config.update_episodes):
            if steps >= config.total_steps:
                break
            episode: list[Transition] = []
            raw: list[np.ndarray] = []

            def actor(features: np.ndarray) -> Action:
                a = act(net, features, "sample", rng)
                episode.append(Transition(a.obs, a.rule, a.flip, a.logp, a.logp_rule, a.logp_flip, a.value))
                raw.append(np.asarray(features, dtype=float))
                return a

            outcome = env.run_episode(actor)
            if len(outcome.rewards) != len(episode):
                raise RuntimeError("environment returned a reward count different from the decision count")
            if not episode:
                continue
            for tr, r in zip(episode, outcome.rewards):
                tr.reward = float(r)
            episode[-1].done = True
            episode[-1].final_reward = outcome.final_reward
            net.norm.update(np.array(raw))
            net.norm.round32()
            batch.extend(episode)
            steps += len(episode)
            ep_returns.append(sum(outcome.rewards))
            ep_lengths.append(len(episode))
        if not batch:
            raise RuntimeError("environment produced no decisions")

        update += 1
        obs = np.array([t.obs for t in batch])
        a_rule = np.array([t.a_rule for t in batch])
        a_flip = np.array([t.a_flip for t in batch])
        old_logp = np.array([t.logp for t in batch])
        values = np.array([t.value for t in batch])
        rewards = np.array([t.reward for t in batch])
        dones = np.array([t.done for t in batch])
        if config.scale_rewards:
            rewards = rewards / _return_scale(return_stats, rewards, dones, config.gamma)
        adv, returns = gae(rewards, values, dones, config.gamma, config.gae_lambda)
        lr = config.lr_at(steps)
        stats_acc = []
        n = len(batch)
        for _ in range(config.epochs):
            perm = rng.permutation(n)
            for start in range(0, n, config.minibatch):
                idx = perm[start : start + config.minibatch]
                a = adv[idx]
                if config.normalize_advantages and len(idx) > 1:
                    a = (a - a.mean()) / (a.std() + 1e-8)
                loss, grads, stats = ppo_loss(net, obs[idx], a_rule[idx], a_flip[idx], old_logp[idx], a, returns[idx], loss_cfg)
                if not math.isfinite(loss):
                    raise TrainingDiverged(update)
                gnorm = clip_grad_norm(grads, config.max_grad_norm)
                if not math.isfinite(gnorm):
                    raise TrainingDiverged(update, "gradient")
                opt.step(net.params, grads, lr)
                net.round32()
                stats_acc.append(stats)
        mean = lambda key: float(np.mean([s[key] for s in stats_acc]))  # noqa: E731
        log.append(
            UpdateLog(
                update=update,
                steps=steps,
                episodes=len(ep_returns),
                loss=mean("loss"),
                policy_loss=mean("policy_loss"),
                value_loss=mean("value_loss"),
                entropy=mean("entropy"),
                mean_episode_reward=float(np.mean(ep_returns)),
                mean_episode_length=float(np.mean(ep_lengths)),
                learning_rate=lr,
            )
        )
    return net, log


def _return_scale(stats: RunningNorm, rewards: np.ndarray, dones: np.ndarray, gamma: float) -> float:
    """Update running statistics of discounted returns and return their std."""
    ret, seen = 0.0, []
    for r, d in zip(rewards, dones):
        ret = ret * gamma + r
        seen.append(ret)
        if d:
            ret = 0.0
    stats.update(np.array(seen)[:, None])
    return float(np.sqrt(stats.var[0] + 1e-8))


# ---------------------------------------------------------------------------
# environments


class _Recorder:
    """Simulator policy that forwards decisions to a training actor."""

    def __init__(self, actor):
        self.actor = actor
        self.steps: list[tuple[np.ndarray, Action, int]] = []

    def decide(self, features, state, station):
        a = self.actor(features)
        self.steps.append((np.asarray(features, dtype=float), a, station))
        return a.dispatch_rule, a.flip_action


class SimEnv:
    """One episode = one decode of a genome with the agent choosing rule and
    flip at every decision point. Flips affect the episode only.

    With a ``pool`` of (genome, label) pairs each episode draws one pair
    uniformly; otherwise every episode decodes ``genome`` against
    ``fit_label``.
    """

    def __init__(
        self,
        instance: ProblemInstance,
        genome: Genome,
        baseline: ScheduleMetrics,
        fit_label: float,
        throughput_mode: str = "improved",
        pool: Sequence[tuple[Genome, float]] | None = None,
        seed: int = 0,
    ):
        self.instance = instance
        self.genome = genome
        self.baseline = baseline
        self.fit_label = fit_label
        self.throughput_mode = throughput_mode
        self.pool = list(pool) if pool else [(genome, fit_label)]
        self.rng = np.random.default_rng(seed)

    def run_episode(self, actor) -> EpisodeOutcome:
        genome, label = self.pool[int(self.rng.integers(len(self.pool)))] if len(self.pool) > 1 else self.pool[0]
        rec = _Recorder(actor)
        res = simulate(self.instance, genome, rec, writeback=False)
        z = scalarize(res.metrics, self.baseline, self.instance.objective_weights)
        steps = rec.steps
        rewards = []
        for i, (feats, a, station) in enumerate(steps):
            if i + 1 < len(steps):
                nxt = steps[i + 1][0]
            else:
                nxt = extract_features(res.state, station)
            rewards.append(intermediate_reward(feats, nxt, a.dispatch_rule, a.flip_action, self.throughput_mode))
        fr = 0.0
        if steps:
            fr = final_reward(label, z, len(steps))
            rewards[-1] += fr
        return EpisodeOutcome(rewards, fr, {"z": z, "makespan": res.metrics.makespan, "tardiness": res.metrics.total_tardiness})


class ToyRuleEnv:
    """Contextual bandit with a known optimum: every episode has
    ``length`` decisions on random features; a decision earns 1 if the rule
    is ``best_rule`` and the flip is NF, else 0."""

    def __init__(self, best_rule: DispatchRule = DispatchRule.STR, length: int = 5, n_features: int = 17, seed: int = 0):
        self.best_rule = DispatchRule(best_rule)
        self.length = length
        self.n_features = n_features
        self.rng = np.random.default_rng(seed)

    def run_episode(self, actor) -> EpisodeOutcome:
        rewards = []
        for _ in range(self.length):
            a = actor(self.rng.standard_normal(self.n_features))
            rewards.append(1.0 if a.dispatch_rule == self.best_rule and a.flip_action.value == "NF" else 0.0)
        return EpisodeOutcome(rewards)


# ---------------------------------------------------------------------------
# training on a scheduling instance


@dataclass
class TrainingRun:
    net: PolicyNet
    log: list[UpdateLog]
    fit_label: float
    baseline: ScheduleMetrics
    genome: Genome
    pool: list[tuple[Genome, float]] = field(default_factory=list)


def warmup(instance: ProblemInstance, seed: int, generations: int = 10, baseline: ScheduleMetrics | None = None):
    """Short GASA run used before training; returns its SearchResult."""
    from ..search import GaConfig, run_gasa

    cfg = GaConfig()
    budget = cfg.population_size + generations * cfg.offspring
    return run_gasa(instance, cfg, budget, seed, baseline=baseline)


def warmup_label(instance: ProblemInstance, seed: int, generations: int = 10, baseline: ScheduleMetrics | None = None):
    """Short GASA run: returns (best Z, baseline, best genome)."""
    res = warmup(instance, seed, generations, baseline)
    return res.best_z, res.baseline, res.best_genome


def ppo_train(
    instance: ProblemInstance,
    fit_label: float | None = None,
    config: TrainerConfig = TrainerConfig(),
    seed: int = 0,
    *,
    genome: Genome | None = None,
    baseline: ScheduleMetrics | None = None,
) -> TrainingRun:
    """Train a dispatching policy on ``instance``.

    Without ``fit_label`` a 10-generation GASA warm-up provides the label,
    the scalarization baseline and the genome decoded in every episode.
    With ``config.pool_size > 1`` the best warm-up survivors are decoded as
    well, each labelled with its own Z.
    """
    pool: list[tuple[Genome, float]] = []
    if fit_label is None or genome is None or baseline is None or config.pool_size > 1:
        res = warmup(instance, seed, baseline=baseline)
        fit_label = res.best_z if fit_label is None else fit_label
        baseline = baseline or res.baseline
        genome = genome or res.best_genome
        if config.pool_size > 1:
            pool = [(genome, fit_label)]
            pool += [(g, z) for g, z in res.elites if g.signature() != genome.signature()][: config.pool_size - 1]
    env = SimEnv(instance, genome, baseline, fit_label, config.throughput_mode, pool=pool, seed=seed)
    net, log = train(env, config, seed)
    return TrainingRun(net, log, fit_label, baseline, genome, pool)


def make_agent(net: PolicyNet, mode: str = "greedy", seed: int = 0) -> Agent:
    return Agent(net, mode, seed)
