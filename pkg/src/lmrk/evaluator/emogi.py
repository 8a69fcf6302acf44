"""Activeness/laziness rewards for behaviour-diverse game agents.

An epoch is one game.  With ``M`` moving actions out of ``T``:

    f1 = win + w1 * M / T
    f2 = win + laziness

where laziness is ``w2 * (1 - M / T)`` in the normalized form, or the
per-action sum ``w2 * (T - M / T)`` in the literal form (every action
contributes ``w2 * (1 - move(a))`` with ``move(a)`` equal to ``1/T`` for a
moving action).  All helpers use plain arithmetic, so they are exact on
``fractions.Fraction`` inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from ..core import ObjectiveVector

LAZINESS_FORMS = ("normalized", "literal")


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class EmogiConfig:
    w1: float = 1.0
    w2: float = 1.0
    T: int = 100  # reference epoch length for per-step shaping during training
    laziness_form: str = "normalized"

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError("w1 and w2 must be non-negative")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.laziness_form not in LAZINESS_FORMS:
            raise ValueError(f"laziness_form must be one of {LAZINESS_FORMS}")


def emogi_terms(won: bool, moves: int, total: int, cfg: EmogiConfig) -> tuple:
    """Epoch-level (f1, f2) for ``moves`` moving actions out of ``total``."""
    if total < 1 or not 0 <= moves <= total:
        raise DomainError(f"need 0 <= M <= T and T >= 1, got M={moves}, T={total}")
    win = 1 if won else 0
    frac = Fraction(moves, total)
    if cfg.laziness_form == "normalized":
        lazy = cfg.w2 * (1 - frac)
    else:
        lazy = cfg.w2 * (total - frac)
    return win + cfg.w1 * frac, win + lazy


def emogi_reward(won: bool, moves: int, total: int, cfg: EmogiConfig) -> ObjectiveVector:
    return ObjectiveVector.maximize(*(float(v) for v in emogi_terms(won, moves, total, cfg)))


def emogi_step(moved: bool, terminal_win: bool, total: int, cfg: EmogiConfig) -> tuple:
    """Per-step (f1, f2) increments within an epoch of ``total`` actions."""
    win = 1 if terminal_win else 0
    move = Fraction(1, total) if moved else Fraction(0)
    if cfg.laziness_form == "literal":
        lazy = cfg.w2 * (1 - move)
    else:
        lazy = 0 if moved else cfg.w2 * Fraction(1, total)
    return win + cfg.w1 * move, win + lazy


def emogi_stream(moves: Sequence[bool], won: bool, cfg: EmogiConfig) -> list[tuple]:
    """Streaming form: win credited on the final step; sums to :func:`emogi_terms`."""
    total = len(moves)
    if total < 1:
        raise DomainError("an epoch needs at least one action")
    return [emogi_step(m, won and i == total - 1, total, cfg) for i, m in enumerate(moves)]


def normalized_score(score_self: float, score_enemy: float, score_max: float) -> float:
    if score_max <= 0 or abs(score_self - score_enemy) > score_max:
        raise DomainError(f"need |self - enemy| <= max and max > 0, got "
                          f"({score_self}, {score_enemy}, {score_max})")
    return (score_self - score_enemy + score_max) / (2 * score_max)
