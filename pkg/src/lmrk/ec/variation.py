"""Variation operators: SBX crossover, polynomial mutation, Gaussian ES noise, PBT."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..core import Candidate, HyperParams, Layer, NetWeights, PolicyParams, RealVector, next_id

EPS = 1e-14


class CodingMismatch(TypeError):
    pass


def _real(x) -> RealVector:
    if isinstance(x, Candidate):
        x = x.coding
    if not isinstance(x, RealVector):
        raise CodingMismatch(f"expected a RealVector coding, got {type(x).__name__}")
    return x


def _sbx_beta_q(rand: float, beta: float, eta: float) -> float:
    alpha = 2.0 - beta ** -(eta + 1.0)
    if rand <= 1.0 / alpha:
        return (rand * alpha) ** (1.0 / (eta + 1.0))
    return (1.0 / (2.0 - rand * alpha)) ** (1.0 / (eta + 1.0))


def sbx_crossover(p1, p2, rng: np.random.Generator, eta: float = 15.0, prob: float = 0.9
                  ) -> tuple[RealVector, RealVector]:
    """Bounded simulated binary crossover.

    With probability ``prob`` the pair is recombined; each variable is then
    crossed with probability 1/2 using the spread factor of distribution
    index ``eta``, limited so children stay inside the bounds.
    """
    a, b = _real(p1), _real(p2)
    if a.values.shape != b.values.shape or not (
            np.array_equal(a.lower, b.lower) and np.array_equal(a.upper, b.upper)):
        raise CodingMismatch("parents have different bounds")
    c1, c2 = a.values.copy(), b.values.copy()
    if rng.random() >= prob:
        return a.replace(c1), b.replace(c2)
    lo, hi = a.lower, a.upper
    for i in range(len(c1)):
        # draws happen for every variable so the stream does not depend on the data
        swap, r = rng.random(), rng.random()
        if swap > 0.5:
            continue
        x1, x2 = c1[i], c2[i]
        if abs(x1 - x2) <= EPS:
            continue
        y1, y2 = min(x1, x2), max(x1, x2)
        yl, yu = lo[i], hi[i]
        gap = y2 - y1
        bq = _sbx_beta_q(r, 1.0 + 2.0 * (y1 - yl) / gap, eta)
        k1 = 0.5 * ((y1 + y2) - bq * gap)
        bq = _sbx_beta_q(r, 1.0 + 2.0 * (yu - y2) / gap, eta)
        k2 = 0.5 * ((y1 + y2) + bq * gap)
        k1, k2 = min(max(k1, yl), yu), min(max(k2, yl), yu)
        if rng.random() <= 0.5:
            k1, k2 = k2, k1
        c1[i], c2[i] = k1, k2
    return a.replace(c1), b.replace(c2)


def poly_delta(u: float, eta: float, d1: float, d2: float) -> float:
    """Bounded polynomial-mutation perturbation for draw ``u``; zero at ``u = 0.5``."""
    power = 1.0 / (eta + 1.0)
    if u < 0.5:
        val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)
        return val ** power - 1.0
    val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)
    return 1.0 - val ** power


def polynomial_mutation(x, rng: np.random.Generator, eta: float = 20.0,
                        prob: float | None = None) -> RealVector:
    v = _real(x)
    y = v.values.copy()
    lo, hi = v.lower, v.upper
    p = 1.0 / len(y) if prob is None else prob
    for i in range(len(y)):
        hit, u = rng.random(), rng.random()
        span = hi[i] - lo[i]
        if hit >= p or span <= 0:
            continue
        d1 = (y[i] - lo[i]) / span
        d2 = (hi[i] - y[i]) / span
        y[i] = y[i] + poly_delta(u, eta, d1, d2) * span
    return v.replace(y)


def es_variation(parent: Candidate, sigma: float, rng: np.random.Generator,
                 id: int | None = None) -> Candidate:
    """Offspring with i.i.d. N(0, sigma^2) noise on every coded real."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    new_id = next_id() if id is None else id
    coding = parent.coding
    if isinstance(coding, RealVector):
        noise = rng.standard_normal(coding.values.shape) * sigma
        return Candidate(coding.replace(coding.values + noise), id=new_id)
    if isinstance(coding, NetWeights):
        layers = []
        for l in coding.params.layers:
            w = l.weight + sigma * rng.standard_normal(l.weight.shape)
            b = l.bias + sigma * rng.standard_normal(l.bias.shape)
            layers.append(Layer(w, b))
        return Candidate(NetWeights(PolicyParams(tuple(layers))), id=new_id)
    raise CodingMismatch(f"ES needs RealVector or NetWeights, got {type(coding).__name__}")


# ---------------------------------------------------------------------------
# PBT

def fitness(c: Candidate) -> float:
    """Scalar fitness (larger is better) from the first objective."""
    if c.objectives is None:
        raise ValueError(f"candidate {c.id} has no fitness yet")
    return -float(c.objectives.as_minimization()[0])


def pbt_ranking(population: Sequence[Candidate]) -> list[int]:
    """Indices from best to worst; ties go to the lower id."""
    return sorted(range(len(population)), key=lambda i: (-fitness(population[i]), population[i].id))


def pbt_exploit(population: Sequence[Candidate], member: Candidate, rng: np.random.Generator,
                quantile: float = 0.2) -> tuple[Candidate, bool]:
    """Bottom-quantile members copy weights and hyperparameters from a random top-quantile one.

    Returns the (possibly replaced) member, keeping its id, and whether a copy happened.
    """
    k = int(quantile * len(population))
    if k < 1:
        return member, False
    order = pbt_ranking(population)
    pos = next(i for i, j in enumerate(order) if population[j].id == member.id)
    if pos < len(population) - k:
        return member, False
    donor = population[order[int(rng.integers(k))]]
    return Candidate(donor.coding, donor.objectives, member.id, dict(donor.info)), True


def pbt_explore(hp: HyperParams, rng: np.random.Generator,
                factors: tuple[float, float] = (0.8, 1.2)) -> HyperParams:
    """Scale each hyperparameter by a fair-coin factor and clamp into its interval."""
    values = {}
    for name in sorted(hp.values):
        lo, hi = hp.ranges[name]
        f = factors[int(rng.integers(2))]
        values[name] = min(max(hp.values[name] * f, lo), hi)
    return hp.with_values(**values)
