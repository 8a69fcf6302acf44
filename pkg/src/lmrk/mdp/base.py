"""Controller-based asynchronous MDP interface.

Each agent is driven by its own :class:`Controller`.  A controller observes,
then submits an action; the environment advances one tick when every live
controller has an action pending, or earlier when a controller submits a
second action while its first is still pending.  Agents that have not acted
by then get their role's default action, so a silent agent never stalls the
game.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class MdpError(RuntimeError):
    pass


class UnknownEnv(MdpError, KeyError):
    pass


class BadConfig(MdpError, ValueError):
    pass


class ActionOutOfRange(MdpError, ValueError):
    pass


class ActAfterDone(MdpError):
    pass


class ProtocolError(MdpError):
    """observe() and act() were not called alternately."""


@dataclass(frozen=True)
class Discrete:
    n: int
    default: int = 0

    def contains(self, a) -> bool:
        return isinstance(a, (int, np.integer)) and 0 <= a < self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return ()


@dataclass(frozen=True)
class Continuous:
    dim: int
    low: float
    high: float

    @property
    def default(self) -> np.ndarray:
        return np.zeros(self.dim)

    def contains(self, a) -> bool:
        a = np.asarray(a, dtype=float)
        return a.shape == (self.dim,) and bool(np.all((a >= self.low) & (a <= self.high)))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.dim,)


ActionSpace = Discrete | Continuous


@dataclass(frozen=True)
class RoleSpec:
    name: str
    obs_dim: int
    action_space: ActionSpace
    reward_dim: int
    training: bool = True

    def __post_init__(self):
        if self.training and self.reward_dim < 1:
            raise ValueError("training roles need a reward dimension >= 1")


@dataclass(frozen=True)
class MdpSpec:
    roles: tuple[RoleSpec, ...]

    def __post_init__(self):
        if not self.roles:
            raise ValueError("an MDP needs at least one role")


@dataclass(frozen=True)
class StepResult:
    """What a controller sees after acting.

    ``reward`` is the reward vector accumulated since this controller's
    previous result (zeros when no tick happened) and is ``None`` for
    sparring controllers.
    """

    observation: np.ndarray
    reward: np.ndarray | None
    done: bool
    tick: int


class Controller:
    def __init__(self, env: "AsyncEnv", index: int, agent_id: int):
        self.env = env
        self.index = index
        self.agent_id = agent_id
        self.spec = env.spec.roles[index]
        self.role = "training" if self.spec.training else "sparring"
        self._observed = False
        self._pending = None
        self._has_pending = False
        self._reward = np.zeros(self.spec.reward_dim) if self.spec.training else None

    @property
    def done(self) -> bool:
        return self.env.done

    def observe(self) -> np.ndarray:
        if self._observed:
            raise ProtocolError(f"controller {self.agent_id}: observe() twice without act()")
        self._observed = True
        return self.env._observe(self.index)

    def act(self, action) -> StepResult:
        return self.env._act(self, action)

    def _result(self) -> StepResult:
        reward = None
        if self._reward is not None:
            reward = self._reward
            self._reward = np.zeros_like(reward)
        return StepResult(self.env._observe(self.index), reward, self.env.done, self.env.tick)


class AsyncEnv:
    """Base class; subclasses implement ``_reset``, ``_observe`` and ``_advance``."""

    spec: MdpSpec
    horizon: int

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.tick = 0
        self.done = False
        self.controllers = [Controller(self, i, i) for i in range(len(self.spec.roles))]

    # -- subclass hooks -------------------------------------------------------

    def _reset(self) -> None:
        raise NotImplementedError

    def _observe(self, index: int) -> np.ndarray:
        raise NotImplementedError

    def _advance(self, actions: Sequence) -> tuple[list[np.ndarray | None], bool]:
        """Apply one tick; return per-role reward vectors and the episode-end flag."""
        raise NotImplementedError

    # -- driver ---------------------------------------------------------------

    def reset(self) -> None:
        self.tick = 0
        self.done = False
        for c in self.controllers:
            c._observed = False
            c._has_pending = False
            c._pending = None
            if c._reward is not None:
                c._reward[:] = 0.0
        self._reset()

    def _act(self, ctrl: Controller, action) -> StepResult:
        if self.done:
            raise ActAfterDone(f"controller {ctrl.agent_id} acted after the episode ended")
        if not ctrl._observed:
            raise ProtocolError(f"controller {ctrl.agent_id}: act() without observe()")
        if not ctrl.spec.action_space.contains(action):
            raise ActionOutOfRange(f"{action!r} not in {ctrl.spec.action_space}")
        ctrl._observed = False
        if ctrl._has_pending:
            self._step()
            if self.done:
                return ctrl._result()
        ctrl._pending = action
        ctrl._has_pending = True
        if all(c._has_pending for c in self.controllers):
            self._step()
        return ctrl._result()

    def _step(self) -> None:
        actions = []
        for c in self.controllers:
            actions.append(c._pending if c._has_pending else c.spec.action_space.default)
            c._has_pending = False
            c._pending = None
        rewards, done = self._advance(actions)
        self.tick += 1
        for c, r in zip(self.controllers, rewards):
            if c._reward is not None and r is not None:
                c._reward += r
        if done or self.tick >= self.horizon:
            self.done = True
