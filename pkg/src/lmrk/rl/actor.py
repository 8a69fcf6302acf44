"""Actors: roll a policy snapshot through the asynchronous controller interface."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..core import PolicyPacket, Step, Trajectory
from ..mdp import AsyncEnv, Continuous, Controller
from ..mdp.ponglite import STAY, PongLite, scripted_sparring_policy
from .policy import FastActor, MlpPolicy, PolicyArch


def arch_for(env: AsyncEnv, trunk=None, critic=None) -> PolicyArch:
    """Default network for an environment's training role."""
    role = env.spec.roles[0]
    if trunk is None:
        trunk = (256, 128)
    if critic is None:
        # Pong's critic reuses the whole trunk; Pendulum's adds two layers
        critic = () if isinstance(env, PongLite) else (128, 64)
    return PolicyArch(role.obs_dim, role.action_space, tuple(trunk), tuple(critic))


@dataclass
class EpisodeStats:
    ret: float
    length: int
    moves: int = 0
    won: bool = False
    score_self: int = 0
    score_enemy: int = 0
    # position on the run's clock when the episode ended (orders episodes across actors)
    end_time: float = 0.0

    @property
    def move_fraction(self) -> float:
        return self.moves / self.length if self.length else 0.0


# step reward shaping hook: (env reward vector, action, moved, episode over, env) -> stored vector
RewardFn = Callable[[np.ndarray, object, bool, bool, AsyncEnv], np.ndarray]


@dataclass
class Actor:
    """Owns one environment instance and its controllers.

    The training controller is driven by the current policy snapshot; any
    sparring controller acts first each tick with the scripted policy.
    """

    env: AsyncEnv
    controllers: list[Controller]
    rng: np.random.Generator
    agent_id: int = 0
    reward_fn: RewardFn | None = None
    on_episode: Callable[[EpisodeStats], None] | None = None
    clock: Callable[[], float] | None = None
    episodes: list[EpisodeStats] = field(default_factory=list)
    frames: int = 0

    def __post_init__(self):
        self.train = next(c for c in self.controllers if c.role == "training")
        self.spars = [c for c in self.controllers if c.role == "sparring"]
        self._actor: FastActor | None = None
        self.version = 0
        self._ret = 0.0
        self._len = 0
        self._moves = 0
        space = self.train.spec.action_space
        self._cont = isinstance(space, Continuous)
        self._low, self._high = (space.low, space.high) if self._cont else (0, 0)

    def load(self, policy: MlpPolicy, version: int) -> None:
        self._actor = FastActor(policy)
        self.version = version

    def load_packet(self, packet: PolicyPacket, arch: PolicyArch) -> None:
        self.load(MlpPolicy.from_params(arch, packet.params), packet.version)

    def rollout(self, horizon: int) -> Trajectory:
        """Run up to ``horizon`` training steps, stopping early at episode end."""
        if self._actor is None:
            raise RuntimeError("actor has no policy snapshot")
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        actor, rng = self._actor, self.rng
        steps = []
        obs = None
        for _ in range(horizon):
            for sp in self.spars:
                sp.act(scripted_sparring_policy(sp.observe(), rng))
            obs = self.train.observe()
            action, logp, value = actor.step(obs, rng)
            if self._cont:
                env_action = np.clip(action, self._low, self._high)
                moved = bool(np.any(env_action != 0))
            else:
                env_action = action
                moved = action != STAY
            res = self.train.act(env_action)
            reward = res.reward
            self._ret += float(reward[0])
            self._len += 1
            self._moves += moved
            if self.reward_fn is not None:
                reward = self.reward_fn(reward, action, moved, res.done, self.env)
            steps.append(Step(obs, action, logp, value, reward, res.done))
            self.frames += 1
            obs = res.observation
            if res.done:
                self._end_episode()
                break
        boot = 0.0 if steps[-1].done else actor.value(obs)
        return Trajectory(self.agent_id, self.version, steps, boot)

    def _end_episode(self) -> None:
        env = self.env
        st = EpisodeStats(self._ret, self._len, self._moves)
        st.end_time = self.clock() if self.clock is not None else float(self.frames)
        if isinstance(env, PongLite):
            st.won = env.won
            st.score_self = env.state.score_left
            st.score_enemy = env.state.score_right
        self.episodes.append(st)
        if self.on_episode is not None:
            self.on_episode(st)
        self._ret, self._len, self._moves = 0.0, 0, 0
        env.reset()


def actor_rollout(packet_or_policy, env: AsyncEnv, controllers: list[Controller], horizon: int,
                  rng: np.random.Generator, version: int | None = None,
                  arch: PolicyArch | None = None) -> Trajectory:
    """One-shot rollout of a snapshot for ``horizon`` steps or until the episode ends."""
    actor = Actor(env, controllers, rng)
    if isinstance(packet_or_policy, PolicyPacket):
        actor.load_packet(packet_or_policy, arch or arch_for(env))
    else:
        actor.load(packet_or_policy, 0 if version is None else version)
    return actor.rollout(horizon)


def mean_recent_return(episodes: list[EpisodeStats], window: int = 10) -> float:
    if not episodes:
        return float("nan")
    return float(np.mean([e.ret for e in episodes[-window:]]))
