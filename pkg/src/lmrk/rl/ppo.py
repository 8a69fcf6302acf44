"""PPO kernels: returns, GAE, clipped-surrogate loss with analytic gradients, learner."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..broadcast import StalenessRecord, record_staleness
from ..core import PolicyPacket, Trajectory, VersionCounter
from .policy import MlpPolicy, _log_softmax


class NonFiniteLoss(FloatingPointError):
    """The loss or its gradient stopped being finite; training has diverged."""


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    learning_rate: float = 0.01
    batch_size: int = 8192
    batch_reuse: int = 1
    policy_weight: float = 1.0
    critic_weight: float = 0.5
    entropy_weight: float = 0.01
    optimizer: str = "sgd"
    max_grad_norm: float = 0.0
    reward_scale: float = 1.0
    minibatches: int = 1

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0 <= self.gae_lambda <= 1:
            raise ValueError("gae_lambda must lie in [0, 1]")
        if self.clip <= 0:
            raise ValueError("clip must be positive")
        if self.batch_reuse < 1 or self.batch_size < 1 or self.minibatches < 1:
            raise ValueError("batch_size, batch_reuse and minibatches must be >= 1")
        if min(self.policy_weight, self.critic_weight, self.entropy_weight) < 0:
            raise ValueError("loss weights must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    total = 0.0
    for r in reversed(list(rewards)):
        total = r + gamma * total
    return total


def compute_gae(rewards, values, bootstrap_value: float, dones, gamma: float, lam: float
                ) -> tuple[np.ndarray, np.ndarray]:
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    if not (len(rewards) == len(values) == len(dones)):
        raise ValueError(f"length mismatch: {len(rewards)}, {len(values)}, {len(dones)}")
    n = len(rewards)
    adv = np.zeros(n)
    next_value = bootstrap_value
    running = 0.0
    for t in range(n - 1, -1, -1):
        live = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * next_value * live - values[t]
        running = delta + gamma * lam * live * running
        adv[t] = running
        next_value = values[t]
    return adv, adv + values


@dataclass
class TrainBatch:
    states: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    sample_versions: np.ndarray

    def __len__(self):
        return len(self.states)

    def subset(self, idx: np.ndarray) -> "TrainBatch":
        return TrainBatch(self.states[idx], self.actions[idx], self.old_log_probs[idx],
                          self.advantages[idx], self.returns[idx], self.sample_versions[idx])


def normalize(adv: np.ndarray) -> np.ndarray:
    adv = adv - adv.mean()
    std = adv.std()
    return adv / std if std > 0 else adv


ScalarReward = Callable[[np.ndarray], float]


def make_batch(pieces: Sequence[Trajectory], cfg: PpoConfig,
               scalarize: ScalarReward | None = None) -> TrainBatch:
    """Flatten trajectory pieces into a batch with normalized GAE advantages."""
    states, actions, logps, advs, rets, versions = [], [], [], [], [], []
    for tr in pieces:
        if not tr.steps:
            continue
        if scalarize is None:
            rew = [float(s.reward[0]) for s in tr.steps]
        else:
            rew = [scalarize(s.reward) for s in tr.steps]
        rew = np.asarray(rew) * cfg.reward_scale
        vals = [s.value for s in tr.steps]
        adv, ret = compute_gae(rew, vals, tr.bootstrap_value, [s.done for s in tr.steps],
                               cfg.gamma, cfg.gae_lambda)
        states.extend(s.state for s in tr.steps)
        actions.extend(s.action for s in tr.steps)
        logps.extend(s.log_prob for s in tr.steps)
        advs.append(adv)
        rets.append(ret)
        versions.extend([tr.policy_version] * len(tr.steps))
    return TrainBatch(
        states=np.asarray(states, dtype=float),
        actions=np.asarray(actions),
        old_log_probs=np.asarray(logps, dtype=float),
        advantages=normalize(np.concatenate(advs)),
        returns=np.concatenate(rets),
        sample_versions=np.asarray(versions, dtype=np.int64),
    )


@dataclass(frozen=True)
class LossTerms:
    total: float
    policy: float
    critic: float
    entropy: float


def ppo_loss(batch: TrainBatch, policy: MlpPolicy, cfg: PpoConfig, grad: bool = False):
    """Clipped-surrogate loss (no KL term).

    Returns :class:`LossTerms`, plus the gradient list in
    :meth:`MlpPolicy.flat_params` order when ``grad`` is true.
    """
    n = len(batch)
    head, value, cache = policy.forward(batch.states)
    logp = policy.log_prob(head, batch.actions)
    ratio = np.exp(logp - batch.old_log_probs)
    adv = batch.advantages
    surr1 = ratio * adv
    surr2 = np.clip(ratio, 1 - cfg.clip, 1 + cfg.clip) * adv
    policy_term = -float(np.minimum(surr1, surr2).mean())
    diff = value - batch.returns
    critic_term = float((diff * diff).mean())
    ent = policy.entropy(head)
    entropy_term = -float(ent.mean())
    total = (cfg.policy_weight * policy_term + cfg.critic_weight * critic_term
             + cfg.entropy_weight * entropy_term)
    terms = LossTerms(total, policy_term, critic_term, entropy_term)
    if not math.isfinite(total):
        raise NonFiniteLoss(f"loss {terms} is not finite (max |ratio| {np.abs(ratio).max():.3g})")
    if not grad:
        return terms

    # d total / d log pi(a|s): only the unclipped branch carries gradient
    active = surr1 <= surr2
    d_logp = -cfg.policy_weight * np.where(active, adv * ratio, 0.0) / n
    d_value = cfg.critic_weight * 2.0 * diff / n
    we = cfg.entropy_weight
    if policy.arch.continuous:
        std = np.exp(policy.log_std)
        acts = batch.actions.reshape(head.shape)
        z = (acts - head) / std
        d_head = d_logp[:, None] * z / std
        d_log_std = (d_logp[:, None] * (z * z - 1.0)).sum(axis=0) - we * np.ones_like(policy.log_std)
    else:
        logp_all = _log_softmax(head)
        p = np.exp(logp_all)
        onehot = np.zeros_like(p)
        onehot[np.arange(n), batch.actions.astype(int)] = 1.0
        d_head = d_logp[:, None] * (onehot - p)
        # entropy_term = -mean(H); dH/dz_j = -p_j (log p_j + H)
        d_head += we * p * (logp_all + ent[:, None]) / n
        d_log_std = None
    grads = policy.backward(cache, d_head, d_value)
    if d_log_std is not None:
        grads.append(d_log_std)
    return terms, grads


# ---------------------------------------------------------------------------
# Optimizers

class Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(cfg: PpoConfig):
    return Adam(cfg.learning_rate) if cfg.optimizer == "adam" else Sgd(cfg.learning_rate)


# ---------------------------------------------------------------------------
# Learner

_F32_MAX = float(np.finfo(np.float32).max)


@dataclass
class UpdateResult:
    packet: PolicyPacket
    staleness: list[StalenessRecord]
    losses: list[LossTerms] = field(default_factory=list)


class Learner:
    """Owns the trainable parameters; one version bump per gradient step."""

    def __init__(self, policy: MlpPolicy, cfg: PpoConfig, version: int = 0,
                 broadcaster: Callable[[PolicyPacket], object] | None = None,
                 rng: np.random.Generator | None = None):
        self.policy = policy
        # only used to shuffle minibatches
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.cfg = cfg
        self.versions = VersionCounter(version)
        self.optimizer = make_optimizer(cfg)
        self.broadcaster = broadcaster
        self.gradient_steps = 0

    @property
    def version(self) -> int:
        return self.versions.value

    def set_learning_rate(self, lr: float) -> None:
        self.optimizer.lr = lr

    def packet(self, produced_at: float = 0.0) -> PolicyPacket:
        return PolicyPacket(self.version, self.policy.to_params(), produced_at)

    def update(self, batch: TrainBatch, produced_at: float = 0.0) -> UpdateResult:
        """Apply ``batch_reuse`` passes of ``minibatches`` gradient steps each."""
        records, losses = [], []
        params = self.policy.flat_params()
        k = self.cfg.minibatches
        for _ in range(self.cfg.batch_reuse):
            if k == 1:
                parts = [batch]
            else:
                order = self.rng.permutation(len(batch))
                parts = [batch.subset(idx) for idx in np.array_split(order, k) if len(idx)]
            for part in parts:
                terms, grads = ppo_loss(part, self.policy, self.cfg, grad=True)
                self._apply(params, grads, terms)
                v = self.versions.bump()
                self.gradient_steps += 1
                losses.append(terms)
                versions, counts = np.unique(part.sample_versions, return_counts=True)
                records.extend(record_staleness(int(sv), v, float(c))
                               for sv, c in zip(versions, counts))
        packet = self.packet(produced_at)
        if self.broadcaster is not None:
            self.broadcaster(packet)
        return UpdateResult(packet, records, losses)

    def _apply(self, params, grads, terms) -> None:
        if not all(np.all(np.isfinite(g)) for g in grads):
            raise NonFiniteLoss(f"non-finite gradient at version {self.version} (loss {terms})")
        if self.cfg.max_grad_norm > 0:
            norm = math.sqrt(sum(float((g * g).sum()) for g in grads))
            if norm > self.cfg.max_grad_norm:
                grads = [g * (self.cfg.max_grad_norm / norm) for g in grads]
        saved = [p.copy() for p in params]
        self.optimizer.step(params, grads)
        # parameters travel as float32, so they must stay inside its range;
        # a rejected step is rolled back so the last good policy survives
        if not all(np.all(np.abs(p) < _F32_MAX) for p in params):
            for p, old in zip(params, saved):
                p[...] = old
            raise NonFiniteLoss(f"parameters diverged at version {self.version} (loss {terms})")
