from __future__ import annotations

from .nsga2 import (
    Population,
    as_matrix,
    binary_tournament_mating,
    crowding_distance,
    domination_matrix,
    dominates,
    fast_nondominated_sort,
    nsga2_survival,
    rank_and_crowding,
)
from .variation import (
    CodingMismatch,
    es_variation,
    fitness,
    pbt_exploit,
    pbt_explore,
    pbt_ranking,
    poly_delta,
    polynomial_mutation,
    sbx_crossover,
)

__all__ = [
    "CodingMismatch", "Population", "as_matrix", "binary_tournament_mating", "crowding_distance",
    "domination_matrix", "dominates", "es_variation", "fast_nondominated_sort", "fitness",
    "nsga2_survival", "pbt_exploit", "pbt_explore", "pbt_ranking", "poly_delta",
    "polynomial_mutation", "rank_and_crowding", "sbx_crossover",
]
