"""Run metrics, the metrics.csv writer and the population.json snapshot."""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ..broadcast import StalenessRecord, mean_staleness
from ..core import Candidate, HyperParams, NetWeights, RealVector

CSV_HEADER = "wall_time_s,frames,fps,staleness_mean,score_mean,generation,obj_min,obj_mean,obj_max"


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    return format(v, ".10g")


@dataclass
class MetricsRow:
    wall_time_s: float
    frames: int
    fps: float | None = None
    staleness_mean: float | None = None
    score_mean: float | None = None
    generation: int | None = None
    # one entry per objective; joined with ';' in the CSV
    obj_min: Sequence[float] | None = None
    obj_mean: Sequence[float] | None = None
    obj_max: Sequence[float] | None = None

    def csv(self) -> str:
        return ",".join(_fmt(getattr(self, k)) for k in CSV_HEADER.split(","))


@dataclass
class RunMetrics:
    rows: list[MetricsRow] = field(default_factory=list)
    staleness: list[StalenessRecord] = field(default_factory=list)
    frames: int = 0
    elapsed_s: float = 0.0
    gradient_steps: int = 0
    aborted: str | None = None

    @property
    def staleness_mean(self) -> float:
        return mean_staleness(self.staleness)

    @property
    def fps(self) -> float:
        return self.frames / self.elapsed_s if self.elapsed_s > 0 else math.nan

    def to_csv(self) -> str:
        return "\n".join([CSV_HEADER] + [r.csv() for r in self.rows]) + "\n"

    def write_csv(self, path: str | os.PathLike) -> None:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def objective_stats(members: Sequence[Candidate]):
    """Per-objective (min, mean, max) in each objective's own sense."""
    vals = np.array([m.objectives.values for m in members if m.objectives is not None])
    if vals.size == 0:
        return None, None, None
    return list(vals.min(axis=0)), list(vals.mean(axis=0)), list(vals.max(axis=0))


def coding_json(coding) -> dict:
    if isinstance(coding, RealVector):
        return {"kind": "real", "values": coding.values.tolist(),
                "lower": coding.lower.tolist(), "upper": coding.upper.tolist()}
    if isinstance(coding, HyperParams):
        out = {"kind": "hyper", "values": dict(sorted(coding.values.items())),
               "ranges": {k: list(v) for k, v in sorted(coding.ranges.items())}}
        if coding.weights is not None:
            out["weights_shapes"] = [[l.rows, l.cols] for l in coding.weights.layers]
        return out
    if isinstance(coding, NetWeights):
        return {"kind": "weights", "weights_shapes": [[l.rows, l.cols] for l in coding.params.layers]}
    raise TypeError(f"unknown coding {type(coding).__name__}")


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating, np.integer)):
        return _clean(v.item())
    return v


def population_json(members: Sequence[Candidate], *, mode: str, seed: int, generation: int,
                    evaluator: str, senses: Sequence[str], ranks=None, crowding=None,
                    weights_files: dict[int, str] | None = None) -> str:
    out = []
    for i, m in enumerate(members):
        entry = {
            "id": m.id,
            "objectives": None if m.objectives is None else list(m.objectives.values),
            "coding": coding_json(m.coding),
            "info": {k: _clean(v) for k, v in sorted(m.info.items())},
        }
        if ranks is not None:
            entry["rank"] = int(ranks[i])
        if crowding is not None:
            entry["crowding"] = _clean(float(crowding[i]))
        if weights_files and m.id in weights_files:
            entry["weights_file"] = weights_files[m.id]
        out.append(entry)
    doc = {"schema": "lmrk.population/1", "mode": mode, "seed": seed, "generation": generation,
           "evaluator": evaluator, "objective_senses": list(senses), "members": out}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
