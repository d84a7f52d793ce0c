"""Policies that can be injected into the simulator's decision points."""

from __future__ import annotations

import numpy as np

from ..genome import DispatchRule
from ..sim import Flip
from .net import Action, PolicyNet, act


class Agent:
    """Wraps a :class:`PolicyNet` for use as a simulator policy.

    ``mode`` is "greedy" (arg-max per action group) or "sample". In sample
    mode the random stream is reset by :meth:`reseed`, which the simulator
    calls with its seed, so decodes stay reproducible. The network is only
    read, never updated. An optional ``recorder`` callback receives every
    :class:`Action` taken.
    """

    uses_genome_rules = False  # the dispatching genes are overridden

    def __init__(self, net: PolicyNet, mode: str = "greedy", seed: int = 0, recorder=None):
        if mode not in ("greedy", "sample"):
            raise ValueError(f"unknown mode {mode!r}")
        self.net = net
        self.mode = mode
        self.rng = np.random.default_rng(seed)
        self.recorder = recorder

    def reseed(self, seed: int) -> None:
        self.rng = np.random.default_rng(seed)

    def decide(self, features, state, station) -> tuple[DispatchRule, Flip]:
        a: Action = act(self.net, features, self.mode, self.rng)
        if self.recorder is not None:
            self.recorder(a, features, state, station)
        return a.dispatch_rule, a.flip_action

    def __getstate__(self):
        d = dict(self.__dict__)
        d["recorder"] = None
        return d


class IdentityPolicy:
    """Keeps the genome's rule and never flips."""

    uses_genome_rules = True

    def decide(self, features, state, station) -> tuple[DispatchRule, Flip]:
        return state.rules[station], Flip.NF


class FixedPolicy:
    """Always answers with the same (rule, flip)."""

    def __init__(self, rule: DispatchRule, flip: Flip = Flip.NF):
        self.rule, self.flip = DispatchRule(rule), Flip(flip)

    def decide(self, features, state, station) -> tuple[DispatchRule, Flip]:
        return self.rule, self.flip
