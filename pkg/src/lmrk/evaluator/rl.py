"""Evaluators that score a candidate by training PPO on it."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import numpy as np

from ..core import Candidate, HyperParams, NetWeights, ObjectiveVector, next_id
from ..ec import CodingMismatch
from ..mdp.ponglite import PongLite
from ..rl import NonFiniteLoss, PpoConfig, train_ppo
from ..rl.actor import EpisodeStats
from .benchmarks import EvaluationFailed, Evaluator, EvaluatorSpec, Outcome
from .emogi import EmogiConfig, emogi_step, emogi_terms, normalized_score

# hyperparameter name -> PpoConfig field
PPO_FIELDS = {"lr": "learning_rate", "critic_weight": "critic_weight",
              "entropy_weight": "entropy_weight", "clip": "clip"}
PREFERENCE = "beta"  # EMOGI weighting between activeness (1) and laziness (0)


@dataclass
class RlTrainingEvaluator(Evaluator):
    """Train PPO for ``budget`` frames from the candidate's hyperparameters and weights.

    Fitness is the mean episodic return over the final ``window`` episodes.
    With ``emogi`` set, the objectives are instead the mean (f1, f2) of the
    final ``window`` epochs and the training reward mixes the point score
    with the per-step activeness/laziness shaping weighted by ``beta``.
    """

    env_name: str
    ppo: PpoConfig
    budget: int
    ranges: Mapping[str, tuple[float, float]]
    defaults: Mapping[str, float] = field(default_factory=dict)
    env_config: Mapping[str, Any] = field(default_factory=dict)
    n_envs: int = 8
    fragment: int = 200
    trunk: tuple[int, ...] | None = None
    critic: tuple[int, ...] | None = None
    window: int = 10
    emogi: EmogiConfig | None = None
    point_weight: float = 1.0

    def __post_init__(self):
        unknown = set(self.ranges) - set(PPO_FIELDS) - {PREFERENCE}
        if unknown:
            raise ValueError(f"unknown searchable hyperparameters {sorted(unknown)}")
        if self.emogi is not None and PREFERENCE not in self.ranges:
            raise ValueError("EMOGI evaluation needs a 'beta' range")

    def describe(self) -> EvaluatorSpec:
        if self.emogi is None:
            return EvaluatorSpec("hyper", 1, ("max",), ranges=dict(self.ranges))
        return EvaluatorSpec("hyper", 2, ("max", "max"), ranges=dict(self.ranges))

    def initialize(self, rng, id=None) -> Candidate:
        values = {}
        for name in sorted(self.ranges):
            lo, hi = self.ranges[name]
            if name in self.defaults:
                values[name] = min(max(self.defaults[name], lo), hi)
            elif lo > 0:
                values[name] = float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
            else:
                values[name] = float(rng.uniform(lo, hi))
        return Candidate(HyperParams(values, dict(self.ranges)), id=next_id() if id is None else id)

    def config_for(self, values: Mapping[str, float]) -> PpoConfig:
        updates = {PPO_FIELDS[k]: v for k, v in values.items() if k in PPO_FIELDS}
        return replace(self.ppo, **updates)

    def evaluate(self, candidate, rng=None) -> ObjectiveVector:
        return self.run(candidate, rng).objectives

    def run(self, candidate: Candidate, rng: np.random.Generator | None = None) -> Outcome:
        coding = candidate.coding
        if isinstance(coding, NetWeights):
            values, init = dict(self.defaults), coding.params
        elif isinstance(coding, HyperParams):
            if set(coding.values) != set(self.ranges):
                raise CodingMismatch(f"expected hyperparameters {sorted(self.ranges)}")
            values, init = dict(coding.values), coding.weights
        else:
            raise CodingMismatch(f"cannot train from a {type(coding).__name__} coding")
        if self.budget < self.ppo.batch_size:
            raise EvaluationFailed(candidate.id, f"budget {self.budget} below one batch")
        seed = int((rng if rng is not None else np.random.default_rng(0)).integers(2**63))
        reward_fn = scalarize = None
        if self.emogi is not None:
            reward_fn = self._emogi_reward_fn()
            beta = values.get(PREFERENCE, 0.5)
            w = np.array([self.point_weight, beta, 1.0 - beta])
            scalarize = w.__matmul__
        try:
            res = train_ppo(self.env_name, self.config_for(values), self.budget, seed,
                            env_config=self.env_config, n_envs=self.n_envs, fragment=self.fragment,
                            init=init, trunk=self.trunk, critic=self.critic,
                            reward_fn=reward_fn, scalarize=scalarize)
        except (NonFiniteLoss, FloatingPointError) as exc:
            raise EvaluationFailed(candidate.id, str(exc)) from exc
        tail = res.episodes[-self.window:]
        if not tail:
            raise EvaluationFailed(candidate.id, "no episode finished within the budget")
        info = {"frames": float(res.frames), "episodes": float(len(res.episodes)),
                "return": float(np.mean([e.ret for e in tail]))}
        if isinstance(coding, NetWeights):
            new_coding = NetWeights(res.params)
        else:
            new_coding = coding.with_weights(res.params)
        if self.emogi is None:
            return Outcome(ObjectiveVector.maximize(info["return"]), new_coding, info)
        info.update(self._emogi_info(tail))
        return Outcome(ObjectiveVector.maximize(info["f1"], info["f2"]), new_coding, info)

    # -- EMOGI ----------------------------------------------------------------

    def _emogi_reward_fn(self):
        cfg = self.emogi

        def reward_fn(reward, action, moved, over, env):
            won = over and isinstance(env, PongLite) and env.won
            f1, f2 = emogi_step(moved, won, cfg.T, cfg)
            return np.array([float(reward[0]), float(f1), float(f2)])

        return reward_fn

    def _emogi_info(self, tail: list[EpisodeStats]) -> dict:
        cfg = self.emogi
        f = np.array([[float(v) for v in emogi_terms(e.won, e.moves, e.length, cfg)] for e in tail])
        score_max = float(self.env_config.get("points_to_win", 5))
        scores = [normalized_score(e.score_self, e.score_enemy, score_max) for e in tail]
        return {"f1": float(f[:, 0].mean()), "f2": float(f[:, 1].mean()),
                "move_fraction": float(np.mean([e.move_fraction for e in tail])),
                "normalized_score": float(np.mean(scores)),
                "win_rate": float(np.mean([e.won for e in tail]))}
