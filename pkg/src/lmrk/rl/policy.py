"""Actor-critic MLP in numpy with hand-written backpropagation.

The critic sits on top of the policy trunk: observations pass through the
shared trunk, then the policy head reads the trunk output directly while
the critic adds its own hidden layers before a scalar value head.  Every
hidden layer uses LeakyReLU.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import Layer, PolicyParams
from ..mdp.base import Continuous, Discrete

LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class PolicyArch:
    obs_dim: int
    action: Discrete | Continuous
    trunk: tuple[int, ...] = (256, 128)
    critic: tuple[int, ...] = (128, 64)
    slope: float = 0.01

    @property
    def continuous(self) -> bool:
        return isinstance(self.action, Continuous)

    @property
    def head_dim(self) -> int:
        return self.action.dim if self.continuous else self.action.n

    def shapes(self) -> list[tuple[int, int]]:
        """Weight shapes in packing order: trunk, critic hidden, policy head, value head."""
        dims = [self.obs_dim, *self.trunk]
        out = list(zip(dims[:-1], dims[1:]))
        cdims = [dims[-1], *self.critic]
        out += list(zip(cdims[:-1], cdims[1:]))
        out.append((dims[-1], self.head_dim))
        out.append((cdims[-1], 1))
        return out


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def _leaky(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z > 0, z, slope * z)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


class MlpPolicy:
    """Parameters live in ``self.weights`` / ``self.biases`` (float64), plus
    ``self.log_std`` for continuous actions."""

    def __init__(self, arch: PolicyArch, weights, biases, log_std=None):
        self.arch = arch
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        if arch.continuous:
            self.log_std = (np.zeros(arch.head_dim) if log_std is None
                            else np.asarray(log_std, dtype=np.float64).copy())
        else:
            self.log_std = None
        shapes = arch.shapes()
        if [w.shape for w in self.weights] != shapes:
            raise ValueError(f"weight shapes {[w.shape for w in self.weights]} != {shapes}")
        self._nt = len(arch.trunk)
        self._nc = len(arch.critic)

    @classmethod
    def init(cls, arch: PolicyArch, rng: np.random.Generator) -> "MlpPolicy":
        shapes = arch.shapes()
        gains = [math.sqrt(2)] * (len(shapes) - 2) + [0.01, 1.0]
        weights = [_orthogonal(rng, r, c, g) for (r, c), g in zip(shapes, gains)]
        biases = [np.zeros(c) for _, c in shapes]
        return cls(arch, weights, biases)

    # -- parameter plumbing ---------------------------------------------------

    def flat_params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        if self.log_std is not None:
            out.append(self.log_std)
        return out

    def copy(self) -> "MlpPolicy":
        return MlpPolicy(self.arch, [w.copy() for w in self.weights],
                         [b.copy() for b in self.biases], self.log_std)

    def to_params(self) -> PolicyParams:
        layers = [Layer(w, b) for w, b in zip(self.weights, self.biases)]
        if self.log_std is not None:
            layers.append(Layer(np.zeros((0, self.arch.head_dim)), self.log_std))
        return PolicyParams(tuple(layers))

    @classmethod
    def from_params(cls, arch: PolicyArch, params: PolicyParams) -> "MlpPolicy":
        layers = list(params.layers)
        log_std = None
        if arch.continuous:
            log_std = layers.pop().bias
        return cls(arch, [l.weight for l in layers], [l.bias for l in layers], log_std)

    # -- forward --------------------------------------------------------------

    def forward(self, obs: np.ndarray):
        """Return (head output, values, cache) for a batch of observations."""
        slope = self.arch.slope
        x = np.atleast_2d(obs)
        trunk_in, trunk_pre = [], []
        h = x
        for i in range(self._nt):
            trunk_in.append(h)
            z = h @ self.weights[i] + self.biases[i]
            trunk_pre.append(z)
            h = _leaky(z, slope)
        feat = h
        crit_in, crit_pre = [], []
        c = feat
        for j in range(self._nt, self._nt + self._nc):
            crit_in.append(c)
            z = c @ self.weights[j] + self.biases[j]
            crit_pre.append(z)
            c = _leaky(z, slope)
        head = feat @ self.weights[-2] + self.biases[-2]
        value = (c @ self.weights[-1] + self.biases[-1])[:, 0]
        cache = (trunk_in, trunk_pre, feat, crit_in, crit_pre, c)
        return head, value, cache

    def value(self, obs: np.ndarray) -> np.ndarray:
        return self.forward(obs)[1]

    def log_prob(self, head: np.ndarray, actions: np.ndarray) -> np.ndarray:
        if self.arch.continuous:
            std = np.exp(self.log_std)
            z = (np.asarray(actions).reshape(head.shape) - head) / std
            return (-0.5 * z * z - self.log_std - 0.5 * LOG_2PI).sum(axis=1)
        logp = _log_softmax(head)
        return logp[np.arange(len(head)), np.asarray(actions, dtype=int)]

    def entropy(self, head: np.ndarray) -> np.ndarray:
        if self.arch.continuous:
            h = (self.log_std + 0.5 * (LOG_2PI + 1.0)).sum()
            return np.full(len(head), h)
        logp = _log_softmax(head)
        return -(np.exp(logp) * logp).sum(axis=1)

    def sample(self, obs: np.ndarray, rng: np.random.Generator):
        """Draw one action for one observation: (action, log-prob, value)."""
        head, value, _ = self.forward(obs)
        head = head[0]
        if self.arch.continuous:
            std = np.exp(self.log_std)
            noise = rng.standard_normal(head.shape)
            action = head + std * noise
            logp = float((-0.5 * noise * noise - self.log_std - 0.5 * LOG_2PI).sum())
            return action, logp, float(value[0])
        logp_all = _log_softmax(head[None])[0]
        p = np.exp(logp_all)
        a = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
        a = min(a, len(p) - 1)
        return a, float(logp_all[a]), float(value[0])

    # -- backward -------------------------------------------------------------

    def backward(self, cache, d_head: np.ndarray, d_value: np.ndarray) -> list[np.ndarray]:
        """Gradients for weights and biases (in :meth:`flat_params` order, no log-std)."""
        slope = self.arch.slope
        trunk_in, trunk_pre, feat, crit_in, crit_pre, c_out = cache
        n_layers = len(self.weights)
        gw: list = [None] * n_layers
        gb: list = [None] * n_layers
        # heads
        gw[-2] = feat.T @ d_head
        gb[-2] = d_head.sum(axis=0)
        d_feat = d_head @ self.weights[-2].T
        dv = d_value[:, None]
        gw[-1] = c_out.T @ dv
        gb[-1] = dv.sum(axis=0)
        dc = dv @ self.weights[-1].T
        for k in reversed(range(self._nc)):
            j = self._nt + k
            dz = dc * np.where(crit_pre[k] > 0, 1.0, slope)
            gw[j] = crit_in[k].T @ dz
            gb[j] = dz.sum(axis=0)
            dc = dz @ self.weights[j].T
        dh = d_feat + dc
        for i in reversed(range(self._nt)):
            dz = dh * np.where(trunk_pre[i] > 0, 1.0, slope)
            gw[i] = trunk_in[i].T @ dz
            gb[i] = dz.sum(axis=0)
            if i:
                dh = dz @ self.weights[i].T
        out = []
        for w, b in zip(gw, gb):
            out += [w, b]
        return out


class FastActor:
    """Single-observation inference from one snapshot, tuned for rollout loops."""

    def __init__(self, policy: MlpPolicy):
        self.policy = policy
        self._ws = policy.weights
        self._bs = policy.biases
        self._nt = len(policy.arch.trunk)
        self._nc = len(policy.arch.critic)
        self._slope = policy.arch.slope
        self._cont = policy.arch.continuous
        if self._cont:
            self._std = np.exp(policy.log_std)
            self._logp_const = float(-(policy.log_std + 0.5 * LOG_2PI).sum())

    def _features(self, obs):
        h = obs
        s = self._slope
        for i in range(self._nt):
            z = h @ self._ws[i] + self._bs[i]
            h = np.maximum(z, s * z)
        c = h
        for j in range(self._nt, self._nt + self._nc):
            z = c @ self._ws[j] + self._bs[j]
            c = np.maximum(z, s * z)
        head = h @ self._ws[-2] + self._bs[-2]
        value = float(c @ self._ws[-1][:, 0] + self._bs[-1][0])
        return head, value

    def step(self, obs: np.ndarray, rng: np.random.Generator):
        head, value = self._features(obs)
        if self._cont:
            noise = rng.standard_normal(head.shape)
            return head + self._std * noise, self._logp_const - 0.5 * float(noise @ noise), value
        z = head - head.max()
        p = np.exp(z)
        total = p.sum()
        a = int(np.searchsorted(np.cumsum(p), rng.random() * total, side="right"))
        a = min(a, len(p) - 1)
        return a, float(z[a] - math.log(total)), value

    def value(self, obs: np.ndarray) -> float:
        return self._features(obs)[1]
