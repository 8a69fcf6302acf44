from __future__ import annotations

from .actor import Actor, EpisodeStats, actor_rollout, arch_for, mean_recent_return
from .trainer import TrainResult, train_ppo
from .policy import FastActor, MlpPolicy, PolicyArch
from .ppo import (
    Adam,
    Learner,
    LossTerms,
    NonFiniteLoss,
    PpoConfig,
    Sgd,
    TrainBatch,
    UpdateResult,
    compute_gae,
    discounted_return,
    make_batch,
    normalize,
    ppo_loss,
)

__all__ = [
    "Actor", "Adam", "EpisodeStats", "FastActor", "Learner", "LossTerms", "MlpPolicy",
    "NonFiniteLoss", "PolicyArch", "PpoConfig", "Sgd", "TrainBatch", "TrainResult", "UpdateResult",
    "actor_rollout", "arch_for", "compute_gae", "discounted_return", "make_batch",
    "mean_recent_return", "normalize", "ppo_loss", "train_ppo",
]
