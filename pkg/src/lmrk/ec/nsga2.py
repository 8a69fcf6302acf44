"""Pareto dominance, non-dominated sorting, crowding distance and NSGA-II survival."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import Candidate, ObjectiveVector


@dataclass(frozen=True)
class Population:
    members: tuple[Candidate, ...]
    generation: int = 0

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


def _check_pair(a: ObjectiveVector, b: ObjectiveVector) -> None:
    if len(a) != len(b):
        raise ValueError(f"objective lengths differ: {len(a)} vs {len(b)}")
    if a.sense != b.sense:
        raise ValueError(f"objective senses differ: {a.sense} vs {b.sense}")


def dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    _check_pair(a, b)
    x, y = a.as_minimization(), b.as_minimization()
    return bool(np.all(x <= y) and np.any(x < y))


def as_matrix(objectives) -> np.ndarray:
    """Minimization matrix (n, m) from ObjectiveVectors, Candidates or a raw array."""
    if isinstance(objectives, np.ndarray):
        return np.atleast_2d(objectives).astype(float)
    rows = []
    for o in objectives:
        if isinstance(o, Candidate):
            o = o.objectives
        rows.append(o.as_minimization() if isinstance(o, ObjectiveVector) else np.asarray(o, float))
    return np.array(rows, dtype=float)


def domination_matrix(f: np.ndarray) -> np.ndarray:
    """``D[i, j]`` is true when row i dominates row j (minimization)."""
    le = np.all(f[:, None, :] <= f[None, :, :], axis=2)
    lt = np.any(f[:, None, :] < f[None, :, :], axis=2)
    return le & lt


def fast_nondominated_sort(objectives) -> list[list[int]]:
    f = as_matrix(objectives)
    n = len(f)
    if n == 0:
        return []
    dom = domination_matrix(f)
    counts = dom.sum(axis=0)  # how many dominate j
    fronts = []
    current = np.flatnonzero(counts == 0)
    while current.size:
        fronts.append([int(i) for i in current])
        counts = counts - dom[current].sum(axis=0)
        counts[current] = -1
        current = np.flatnonzero(counts == 0)
    return fronts


def crowding_distance(front) -> np.ndarray:
    f = as_matrix(front)
    n, m = f.shape
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for k in range(m):
        order = np.argsort(f[:, k], kind="stable")
        col = f[order, k]
        dist[order[0]] = dist[order[-1]] = np.inf
        span = col[-1] - col[0]
        if span > 0:
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def rank_and_crowding(members: Sequence[Candidate]) -> tuple[np.ndarray, np.ndarray]:
    """Front rank (0 = best) and crowding distance within that front, per member."""
    f = as_matrix(members)
    ranks = np.zeros(len(members), dtype=int)
    crowd = np.zeros(len(members))
    for r, front in enumerate(fast_nondominated_sort(f)):
        ranks[front] = r
        crowd[front] = crowding_distance(f[front])
    return ranks, crowd


def nsga2_survival(merged: Sequence[Candidate], n: int) -> list[Candidate]:
    """Keep ``n`` members: whole fronts first, then the boundary front by crowding."""
    if len(merged) < n:
        raise ValueError(f"cannot select {n} survivors from {len(merged)}")
    f = as_matrix(merged)
    chosen: list[int] = []
    for front in fast_nondominated_sort(f):
        if len(chosen) + len(front) <= n:
            chosen.extend(front)
            if len(chosen) == n:
                break
            continue
        crowd = crowding_distance(f[front])
        order = sorted(range(len(front)), key=lambda i: (-crowd[i], merged[front[i]].id))
        chosen.extend(front[i] for i in order[: n - len(chosen)])
        break
    return [merged[i] for i in chosen]


def binary_tournament_mating(members: Sequence[Candidate], rng: np.random.Generator,
                             ranks: np.ndarray | None = None, crowd: np.ndarray | None = None
                             ) -> list[tuple[Candidate, Candidate]]:
    """N/2 parent pairs; tournaments compare (rank, -crowding, id)."""
    n = len(members)
    if n < 2:
        raise ValueError("mating needs at least two members")
    if ranks is None or crowd is None:
        ranks, crowd = rank_and_crowding(members)

    def key(i):
        return (ranks[i], -crowd[i], members[i].id)

    def tournament(pool: list[int]) -> int:
        if len(pool) == 1:
            return pool[0]
        a, b = rng.choice(len(pool), size=2, replace=False)
        return min(pool[a], pool[b], key=key)

    everyone = list(range(n))
    pairs = []
    for _ in range(n // 2):
        first = tournament(everyone)
        second = tournament([i for i in everyone if i != first])
        pairs.append((members[first], members[second]))
    return pairs
