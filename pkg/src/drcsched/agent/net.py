"""Actor-critic multilayer perceptron in plain numpy.

Inputs are standardized by running statistics, then pass a shared leaky-ReLU
layer. The policy branch has one hidden layer and two softmax groups (rule and
flip); the value branch has two hidden layers and a scalar output. Forward and
backward passes are written out by hand so gradients can be checked against
finite differences.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..genome import DispatchRule
from ..sim import Flip

RULE_ACTIONS: tuple[DispatchRule, ...] = (DispatchRule.SPT, DispatchRule.LPT, DispatchRule.MTWR, DispatchRule.STR)
FLIP_ACTIONS: tuple[Flip, ...] = (Flip.SF, Flip.WF, Flip.NF)

LEAK = 0.01
CLIP_OBS = 10.0
NORM_EPS = 1e-8


def leaky(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, LEAK * x)


def leaky_grad(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, 1.0, LEAK)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def orthogonal(rng: np.random.Generator, n_in: int, n_out: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    w = q if n_in >= n_out else q.T
    return gain * w[:n_in, :n_out]


@dataclass(frozen=True)
class NetShape:
    n_in: int = 17
    trunk: int = 512
    policy: int = 64
    value: tuple[int, int] = (128, 64)
    n_rules: int = len(RULE_ACTIONS)
    n_flips: int = len(FLIP_ACTIONS)


# parameter names in checkpoint order
PARAM_NAMES = ("W0", "b0", "Wp", "bp", "Wr", "br", "Wf", "bf", "Wv1", "bv1", "Wv2", "bv2", "Wv3", "bv3")


class RunningNorm:
    """Running mean/variance (parallel-merge update) of the observations."""

    def __init__(self, n: int):
        self.mean = np.zeros(n)
        self.var = np.ones(n)
        self.count = np.array([1e-4])

    def update(self, x: np.ndarray) -> None:
        x = np.atleast_2d(x)
        b_mean, b_var, b_n = x.mean(axis=0), x.var(axis=0), x.shape[0]
        delta = b_mean - self.mean
        tot = self.count[0] + b_n
        self.mean = self.mean + delta * b_n / tot
        m2 = self.var * self.count[0] + b_var * b_n + delta**2 * self.count[0] * b_n / tot
        self.var = m2 / tot
        self.count = np.array([tot])

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.clip((x - self.mean) / np.sqrt(self.var + NORM_EPS), -CLIP_OBS, CLIP_OBS)

    def round32(self) -> None:
        self.mean = self.mean.astype(np.float32).astype(np.float64)
        self.var = self.var.astype(np.float32).astype(np.float64)
        self.count = self.count.astype(np.float32).astype(np.float64)


class PolicyNet:
    def __init__(self, shape: NetShape = NetShape(), seed: int = 0, policy_gain: float = 0.01):
        self.shape = shape
        rng = np.random.default_rng(seed)
        s = shape
        h = np.sqrt(2.0)
        self.params: dict[str, np.ndarray] = {
            "W0": orthogonal(rng, s.n_in, s.trunk, h),
            "b0": np.zeros(s.trunk),
            "Wp": orthogonal(rng, s.trunk, s.policy, h),
            "bp": np.zeros(s.policy),
            "Wr": orthogonal(rng, s.policy, s.n_rules, policy_gain),
            "br": np.zeros(s.n_rules),
            "Wf": orthogonal(rng, s.policy, s.n_flips, policy_gain),
            "bf": np.zeros(s.n_flips),
            "Wv1": orthogonal(rng, s.trunk, s.value[0], h),
            "bv1": np.zeros(s.value[0]),
            "Wv2": orthogonal(rng, s.value[0], s.value[1], h),
            "bv2": np.zeros(s.value[1]),
            "Wv3": orthogonal(rng, s.value[1], 1, 1.0),
            "bv3": np.zeros(1),
        }
        self.norm = RunningNorm(s.n_in)
        self.round32()

    def round32(self) -> None:
        """Snap all state to float32 values so checkpoints are exact."""
        for k, v in self.params.items():
            self.params[k] = v.astype(np.float32).astype(np.float64)
        self.norm.round32()

    def copy(self) -> "PolicyNet":
        other = PolicyNet.__new__(PolicyNet)
        other.shape = self.shape
        other.params = {k: v.copy() for k, v in self.params.items()}
        other.norm = RunningNorm(self.shape.n_in)
        other.norm.mean, other.norm.var, other.norm.count = self.norm.mean.copy(), self.norm.var.copy(), self.norm.count.copy()
        return other

    # -- forward ------------------------------------------------------------

    def forward(self, x: np.ndarray) -> dict:
        """Forward pass on already normalized inputs (batch x n_in)."""
        p = self.params
        x = np.atleast_2d(x)
        a0 = x @ p["W0"] + p["b0"]
        h0 = leaky(a0)
        ap = h0 @ p["Wp"] + p["bp"]
        hp = leaky(ap)
        zr = hp @ p["Wr"] + p["br"]
        zf = hp @ p["Wf"] + p["bf"]
        av1 = h0 @ p["Wv1"] + p["bv1"]
        hv1 = leaky(av1)
        av2 = hv1 @ p["Wv2"] + p["bv2"]
        hv2 = leaky(av2)
        v = (hv2 @ p["Wv3"] + p["bv3"])[:, 0]
        return {
            "x": x, "a0": a0, "h0": h0, "ap": ap, "hp": hp, "zr": zr, "zf": zf,
            "av1": av1, "hv1": hv1, "av2": av2, "hv2": hv2, "v": v,
            "lr": log_softmax(zr), "lf": log_softmax(zf),
        }  # fmt: skip

    def probabilities(self, features: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(rule probs, flip probs, value) for raw feature rows."""
        out = self.forward(self.norm(np.atleast_2d(features)))
        return np.exp(out["lr"]), np.exp(out["lf"]), out["v"]

    # -- backward -----------------------------------------------------------

    def backward(self, cache: dict, d_zr: np.ndarray, d_zf: np.ndarray, d_v: np.ndarray) -> dict[str, np.ndarray]:
        """Parameter gradients given gradients w.r.t. the head outputs."""
        p = self.params
        g = {}
        g["Wr"] = cache["hp"].T @ d_zr
        g["br"] = d_zr.sum(axis=0)
        g["Wf"] = cache["hp"].T @ d_zf
        g["bf"] = d_zf.sum(axis=0)
        d_hp = d_zr @ p["Wr"].T + d_zf @ p["Wf"].T
        d_ap = d_hp * leaky_grad(cache["ap"])
        g["Wp"] = cache["h0"].T @ d_ap
        g["bp"] = d_ap.sum(axis=0)

        d_out = d_v[:, None]
        g["Wv3"] = cache["hv2"].T @ d_out
        g["bv3"] = d_out.sum(axis=0)
        d_av2 = (d_out @ p["Wv3"].T) * leaky_grad(cache["av2"])
        g["Wv2"] = cache["hv1"].T @ d_av2
        g["bv2"] = d_av2.sum(axis=0)
        d_av1 = (d_av2 @ p["Wv2"].T) * leaky_grad(cache["av1"])
        g["Wv1"] = cache["h0"].T @ d_av1
        g["bv1"] = d_av1.sum(axis=0)

        d_h0 = d_ap @ p["Wp"].T + d_av1 @ p["Wv1"].T
        d_a0 = d_h0 * leaky_grad(cache["a0"])
        g["W0"] = cache["x"].T @ d_a0
        g["b0"] = d_a0.sum(axis=0)
        return g


@dataclass(frozen=True)
class LossConfig:
    clip: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.01


def _entropy_grad(logp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    prob = np.exp(logp)
    h = -(prob * logp).sum(axis=1)
    return h, -prob * (logp + h[:, None])


def ppo_loss(
    net: PolicyNet,
    obs: np.ndarray,
    a_rule: np.ndarray,
    a_flip: np.ndarray,
    old_logp: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    cfg: LossConfig = LossConfig(),
) -> tuple[float, dict[str, np.ndarray], dict[str, float]]:
    """Clipped-surrogate PPO loss on normalized observations and its gradients.

    loss = -mean(min(r A, clip(r) A)) + value_coef * mean((V - R)^2)
           - entropy_coef * mean(H_rule + H_flip)
    with r = exp(logp_rule + logp_flip - old_logp).
    """
    c = net.forward(obs)
    n = obs.shape[0]
    rows = np.arange(n)
    logp = c["lr"][rows, a_rule] + c["lf"][rows, a_flip]
    ratio = np.exp(logp - old_logp)
    clipped = np.clip(ratio, 1 - cfg.clip, 1 + cfg.clip)
    surr = np.minimum(ratio * advantages, clipped * advantages)
    pg_loss = -surr.mean()
    v_err = c["v"] - returns
    v_loss = (v_err**2).mean()
    h_r, dh_r = _entropy_grad(c["lr"])
    h_f, dh_f = _entropy_grad(c["lf"])
    entropy = (h_r + h_f).mean()
    loss = pg_loss + cfg.value_coef * v_loss - cfg.entropy_coef * entropy

    # d loss / d logp of the taken joint action
    active = ratio * advantages <= clipped * advantages
    d_logp = np.where(active, -advantages * ratio, 0.0) / n
    p_r, p_f = np.exp(c["lr"]), np.exp(c["lf"])
    onehot_r = np.zeros_like(p_r)
    onehot_r[rows, a_rule] = 1.0
    onehot_f = np.zeros_like(p_f)
    onehot_f[rows, a_flip] = 1.0
    d_zr = d_logp[:, None] * (onehot_r - p_r) - cfg.entropy_coef * dh_r / n
    d_zf = d_logp[:, None] * (onehot_f - p_f) - cfg.entropy_coef * dh_f / n
    d_v = cfg.value_coef * 2.0 * v_err / n
    grads = net.backward(c, d_zr, d_zf, d_v)
    stats = {
        "loss": float(loss),
        "policy_loss": float(pg_loss),
        "value_loss": float(v_loss),
        "entropy": float(entropy),
        "clip_fraction": float((np.abs(ratio - 1) > cfg.clip).mean()),
    }
    return float(loss), grads, stats


class Adam:
    def __init__(self, params: dict[str, np.ndarray], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-5):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k in params:
            self.m[k] = b1 * self.m[k] + (1 - b1) * grads[k]
            self.v[k] = b2 * self.v[k] + (1 - b2) * grads[k] ** 2
            m_hat = self.m[k] / (1 - b1**self.t)
            v_hat = self.v[k] / (1 - b2**self.t)
            params[k] = params[k] - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    total = float(np.sqrt(sum(float((g**2).sum()) for g in grads.values())))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for k in grads:
            grads[k] = grads[k] * scale
    return total


# ---------------------------------------------------------------------------
# acting


@dataclass(frozen=True)
class Action:
    rule: int
    flip: int
    logp: float  # joint log-probability
    logp_rule: float
    logp_flip: float
    value: float
    obs: np.ndarray  # normalized observation the action was taken on

    @property
    def dispatch_rule(self) -> DispatchRule:
        return RULE_ACTIONS[self.rule]

    @property
    def flip_action(self) -> Flip:
        return FLIP_ACTIONS[self.flip]


def act(net: PolicyNet, features: np.ndarray, mode: str = "sample", rng: np.random.Generator | None = None) -> Action:
    """Pick (rule, flip) from the two categorical heads."""
    features = np.asarray(features, dtype=float)
    if not np.all(np.isfinite(features)):
        raise ValueError("features must be finite")
    obs = net.norm(features[None, :])
    c = net.forward(obs)
    lr, lf = c["lr"][0], c["lf"][0]
    if mode == "greedy":
        a1, a2 = int(np.argmax(lr)), int(np.argmax(lf))
    elif mode == "sample":
        rng = rng if rng is not None else np.random.default_rng()
        a1 = int(rng.choice(len(lr), p=_normalized(np.exp(lr))))
        a2 = int(rng.choice(len(lf), p=_normalized(np.exp(lf))))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return Action(a1, a2, float(lr[a1] + lf[a2]), float(lr[a1]), float(lf[a2]), float(c["v"][0]), obs[0])


def _normalized(p: np.ndarray) -> np.ndarray:
    return p / p.sum()


# ---------------------------------------------------------------------------
# checkpoints

MAGIC = b"DRCPOLv"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_policy(net: PolicyNet) -> bytes:
    """Header (magic, version, array shapes) followed by a little-endian
    float32 blob of all arrays, row-major, in header order."""
    arrays = [(name, net.params[name]) for name in PARAM_NAMES]
    arrays += [("norm_mean", net.norm.mean), ("norm_var", net.norm.var), ("norm_count", net.norm.count)]
    header = bytearray(MAGIC + struct.pack("<HH", VERSION, len(arrays)))
    for name, arr in arrays:
        enc = name.encode()
        header += struct.pack("<B", len(enc)) + enc + struct.pack("<B", arr.ndim)
        header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    blob = b"".join(np.ascontiguousarray(arr, dtype="<f4").tobytes() for _, arr in arrays)
    return bytes(header) + blob


def load_policy(data: bytes) -> PolicyNet:
    mv = memoryview(data)
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(mv):
            raise CheckpointError("truncated checkpoint")
        out = bytes(mv[pos : pos + n])
        pos += n
        return out

    if take(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a policy checkpoint (bad magic)")
    version, count = struct.unpack("<HH", take(4))
    if version != VERSION:
        raise CheckpointError(f"incompatible checkpoint version {version}, expected {VERSION}")
    specs = []
    for _ in range(count):
        (n,) = struct.unpack("<B", take(1))
        name = take(n).decode()
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        specs.append((name, shape))
    arrays = {}
    for name, shape in specs:
        size = int(np.prod(shape)) if shape else 1
        arrays[name] = np.frombuffer(take(4 * size), dtype="<f4").reshape(shape).astype(np.float64)
    if pos != len(mv):
        raise CheckpointError("trailing bytes after weight blob")
    expected = set(PARAM_NAMES) | {"norm_mean", "norm_var", "norm_count"}
    if set(arrays) != expected:
        raise CheckpointError(f"unexpected arrays {sorted(set(arrays) ^ expected)}")

    n_in, trunk = arrays["W0"].shape
    shape = NetShape(
        n_in=n_in,
        trunk=trunk,
        policy=arrays["Wp"].shape[1],
        value=(arrays["Wv1"].shape[1], arrays["Wv2"].shape[1]),
        n_rules=arrays["Wr"].shape[1],
        n_flips=arrays["Wf"].shape[1],
    )
    net = PolicyNet.__new__(PolicyNet)
    net.shape = shape
    ref = _shapes(shape)
    for name in PARAM_NAMES:
        if arrays[name].shape != ref[name]:
            raise CheckpointError(f"array {name} has shape {arrays[name].shape}, expected {ref[name]}")
    net.params = {name: arrays[name] for name in PARAM_NAMES}
    net.norm = RunningNorm(n_in)
    if arrays["norm_mean"].shape != (n_in,) or arrays["norm_var"].shape != (n_in,) or arrays["norm_count"].shape != (1,):
        raise CheckpointError("normalizer size does not match the input layer")
    net.norm.mean, net.norm.var, net.norm.count = arrays["norm_mean"], arrays["norm_var"], arrays["norm_count"]
    return net


def _shapes(s: NetShape) -> dict[str, tuple]:
    return {
        "W0": (s.n_in, s.trunk), "b0": (s.trunk,),
        "Wp": (s.trunk, s.policy), "bp": (s.policy,),
        "Wr": (s.policy, s.n_rules), "br": (s.n_rules,),
        "Wf": (s.policy, s.n_flips), "bf": (s.n_flips,),
        "Wv1": (s.trunk, s.value[0]), "bv1": (s.value[0],),
        "Wv2": (s.value[0], s.value[1]), "bv2": (s.value[1],),
        "Wv3": (s.value[1], 1), "bv3": (1,),
    }  # fmt: skip

