from __future__ import annotations

from .benchmarks import (
    Outcome,
    Dtlz2,
    EvaluationFailed,
    Evaluator,
    EvaluatorSpec,
    OutOfBounds,
    Zdt1,
    dtlz2,
    zdt1,
    zdt1_front_distance,
)
from .emogi import (
    DomainError,
    EmogiConfig,
    emogi_reward,
    emogi_step,
    emogi_stream,
    emogi_terms,
    normalized_score,
)
from .rl import RlTrainingEvaluator

__all__ = [
    "DomainError", "Dtlz2", "EmogiConfig", "EvaluationFailed", "Evaluator", "EvaluatorSpec",
    "OutOfBounds", "Outcome", "RlTrainingEvaluator", "Zdt1", "dtlz2", "emogi_reward",
    "emogi_step", "emogi_stream", "emogi_terms", "normalized_score", "zdt1",
    "zdt1_front_distance",
]
