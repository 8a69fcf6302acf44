"""The describe/initialize/evaluate contract and the numerical benchmarks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from ..core import Candidate, ObjectiveVector, RealVector, next_id
from ..ec import CodingMismatch


class OutOfBounds(ValueError):
    pass


class EvaluationFailed(RuntimeError):
    def __init__(self, candidate_id: int, reason: str):
        super().__init__(f"candidate {candidate_id}: {reason}")
        self.candidate_id = candidate_id
        self.reason = reason


@dataclass(frozen=True)
class EvaluatorSpec:
    """What an EC algorithm may know about a problem."""

    kind: str  # "real" | "hyper" | "weights"
    n_objectives: int
    senses: tuple[str, ...]
    dim: int = 0
    lower: tuple[float, ...] = ()
    upper: tuple[float, ...] = ()
    ranges: Mapping[str, tuple[float, float]] | None = None

    def __post_init__(self):
        if self.n_objectives < 1 or len(self.senses) != self.n_objectives:
            raise ValueError("need >= 1 objective and one sense per objective")


@dataclass
class Outcome:
    """Everything an evaluation produced; ``coding`` may carry trained weights."""

    objectives: ObjectiveVector
    coding: Any
    info: dict = field(default_factory=dict)


class Evaluator:
    """Base class for problems the EC layer can optimize."""

    def describe(self) -> EvaluatorSpec:
        raise NotImplementedError

    def initialize(self, rng: np.random.Generator, id: int | None = None) -> Candidate:
        raise NotImplementedError

    def evaluate(self, candidate: Candidate, rng: np.random.Generator | None = None) -> ObjectiveVector:
        raise NotImplementedError

    def run(self, candidate: Candidate, rng: np.random.Generator | None = None) -> Outcome:
        return Outcome(self.evaluate(candidate, rng), candidate.coding)

    def worst(self) -> ObjectiveVector:
        """Penalty objectives for candidates whose evaluation failed twice."""
        spec = self.describe()
        big = 1e12
        return ObjectiveVector(tuple(big if s == "min" else -big for s in spec.senses), spec.senses)


def _check_unit(x: np.ndarray) -> None:
    if np.any(x < 0) or np.any(x > 1) or not np.all(np.isfinite(x)):
        raise OutOfBounds("decision variables must lie in [0, 1]")


def zdt1(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("ZDT1 needs at least two variables")
    _check_unit(x)
    f1 = float(x[0])
    g = 1.0 + 9.0 * float(x[1:].sum()) / (len(x) - 1)
    return f1, g * (1.0 - math.sqrt(f1 / g))


def dtlz2(x, m: int) -> tuple[float, ...]:
    x = np.asarray(x, dtype=float)
    if m < 2 or len(x) < m:
        raise ValueError(f"DTLZ2 needs m >= 2 and at least m variables (n={len(x)}, m={m})")
    _check_unit(x)
    g = float(((x[m - 1:] - 0.5) ** 2).sum())
    angles = x[: m - 1] * (math.pi / 2)
    out = []
    for j in range(m):
        f = 1.0 + g
        for a in angles[: m - 1 - j]:
            f *= math.cos(a)
        if j > 0:
            f *= math.sin(angles[m - 1 - j])
        out.append(f)
    return tuple(out)


class _RealBenchmark(Evaluator):
    n: int
    m: int

    def describe(self) -> EvaluatorSpec:
        return EvaluatorSpec("real", self.m, ("min",) * self.m, self.n,
                             (0.0,) * self.n, (1.0,) * self.n)

    def initialize(self, rng, id=None) -> Candidate:
        coding = RealVector(rng.random(self.n), np.zeros(self.n), np.ones(self.n))
        return Candidate(coding, id=next_id() if id is None else id)

    def _values(self, candidate: Candidate) -> np.ndarray:
        c = candidate.coding
        if not isinstance(c, RealVector) or len(c.values) != self.n:
            raise CodingMismatch(f"{type(self).__name__} expects a RealVector of length {self.n}")
        return c.values


class Zdt1(_RealBenchmark):
    def __init__(self, n: int = 30):
        if n < 2:
            raise ValueError("ZDT1 needs n >= 2")
        self.n, self.m = n, 2

    def evaluate(self, candidate, rng=None) -> ObjectiveVector:
        return ObjectiveVector.minimize(*zdt1(self._values(candidate)))


class Dtlz2(_RealBenchmark):
    def __init__(self, n: int = 12, m: int = 3):
        if m < 2 or n < m:
            raise ValueError("DTLZ2 needs m >= 2 and n >= m")
        self.n, self.m = n, m

    def evaluate(self, candidate, rng=None) -> ObjectiveVector:
        return ObjectiveVector.minimize(*dtlz2(self._values(candidate), self.m))


def zdt1_front_distance(points) -> float:
    """Mean vertical distance of (f1, f2) points to the front f2 = 1 - sqrt(f1)."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    return float(np.mean(np.abs(p[:, 1] - (1.0 - np.sqrt(np.clip(p[:, 0], 0.0, 1.0))))))
