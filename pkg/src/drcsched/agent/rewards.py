"""Reward shaping for the dispatching agent.

Feature vectors are 0-based arrays; the comments use the 1-based feature
numbers of the state description in :mod:`drcsched.sim.features`.
"""

from __future__ import annotations

import numpy as np

from ..genome import DispatchRule
from ..sim import Flip

THROUGHPUT_MODES = ("improved", "from_zero")


def intermediate_reward(
    last: np.ndarray,
    current: np.ndarray,
    a1: DispatchRule | str,
    a2: Flip | str,
    throughput_mode: str = "improved",
) -> float:
    """Shaping reward of one decision, from the state it was taken in
    (``last``) and the state at the next decision (``current``).

    * station flip while no tasks compete (f8 = 0): -3
    * otherwise station flip at a station whose WIP share exceeds the mean
      share (f3 > f5): +2
    * otherwise worker flip while the station's workers carry more than
      average WIP per slot (f6 / f9 > 1): +1
    * slack rule while the station's mean slack is below the global mean
      (f15 < f16): +1
    * global mean throughput went up (f12): +3. ``throughput_mode`` selects
      between "strictly improved" and "improved from zero".
    * the next state has positive minimum slack (f14 > 0): +3
    """
    if throughput_mode not in THROUGHPUT_MODES:
        raise ValueError(f"throughput_mode must be one of {THROUGHPUT_MODES}")
    a1 = DispatchRule(a1)
    a2 = Flip(a2)
    L, C = np.asarray(last, dtype=float), np.asarray(current, dtype=float)
    r = 0.0
    if a2 == Flip.SF and L[7] == 0:
        r = -3.0
    elif a2 == Flip.SF and L[2] > L[4]:
        r = 2.0
    elif a2 == Flip.WF and (L[5] / L[8] if L[8] != 0 else 0.0) > 1:
        r = 1.0
    if a1 == DispatchRule.STR and L[14] < L[15]:
        r += 1.0
    improved = C[11] > L[11]
    if throughput_mode == "from_zero":
        improved = improved and L[11] == 0
    if improved:
        r += 3.0
    if C[13] > 0:
        r += 3.0
    return r


def final_reward(fit_label: float, fit_achieved: float, steps: int) -> float:
    """End-of-episode reward: fitness gap to the label times 20 s^2."""
    if steps < 1:
        raise ValueError("an episode has at least one step")
    return (fit_label - fit_achieved) * 20.0 * steps**2
