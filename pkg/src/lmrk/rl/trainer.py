"""In-process PPO training loop used by the RL-training evaluators."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from ..core import PolicyParams, make_rng
from ..mdp import spawn
from .actor import Actor, EpisodeStats, RewardFn, arch_for
from .policy import MlpPolicy, PolicyArch
from .ppo import Learner, PpoConfig, make_batch


@dataclass
class TrainResult:
    params: PolicyParams
    episodes: list[EpisodeStats]
    frames: int
    gradient_steps: int
    # mean episodic return per completed batch, for learning curves
    curve: list[tuple[int, float]] = field(default_factory=list)


def train_ppo(env_name: str, cfg: PpoConfig, frames: int, seed: int, *,
              env_config: Mapping[str, Any] | None = None, n_envs: int = 8,
              fragment: int = 200, init: PolicyParams | None = None,
              trunk: tuple[int, ...] | None = None, critic: tuple[int, ...] | None = None,
              reward_fn: RewardFn | None = None,
              scalarize: Callable[[np.ndarray], float] | None = None) -> TrainResult:
    """Train for ``frames`` training-agent steps with synchronous batch collection.

    Every batch holds exactly ``cfg.batch_size`` steps gathered round-robin
    from ``n_envs`` actors, each contributing fragments of at most
    ``fragment`` steps under the current policy.
    """
    if frames < cfg.batch_size:
        raise ValueError(f"frame budget {frames} is below one batch ({cfg.batch_size})")

    def clock() -> float:
        return float(sum(a.frames for a in actors))

    actors: list[Actor] = []
    for i in range(n_envs):
        env, ctrls = spawn(env_name, env_config, seed=int(make_rng(seed, "env", i).integers(2**63)))
        actors.append(Actor(env, ctrls, make_rng(seed, "actor", i), agent_id=i, reward_fn=reward_fn,
                            clock=clock))
    arch: PolicyArch = arch_for(actors[0].env, trunk, critic)
    if init is None:
        policy = MlpPolicy.init(arch, make_rng(seed, "init"))
    else:
        policy = MlpPolicy.from_params(arch, init)
    learner = Learner(policy, cfg, rng=make_rng(seed, "minibatch"))
    done = 0
    curve = []
    turn = 0
    while done + cfg.batch_size <= frames:
        snapshot = policy.copy()
        for a in actors:
            a.load(snapshot, learner.version)
        pieces, n = [], 0
        while n < cfg.batch_size:
            a = actors[turn % n_envs]
            turn += 1
            tr = a.rollout(min(fragment, cfg.batch_size - n))
            pieces.append(tr)
            n += len(tr)
        learner.update(make_batch(pieces, cfg, scalarize))
        done += n
        recent = [e.ret for a in actors for e in a.episodes[-2:]]
        curve.append((done, float(np.mean(recent)) if recent else float("nan")))
    episodes = sorted((e for a in actors for e in a.episodes), key=lambda e: e.end_time)
    return TrainResult(policy.to_params(), episodes, done, learner.gradient_steps, curve)
