"""NSGA-II on ZDT1 and how close its final front gets to f2 = 1 - sqrt(f1)."""
from __future__ import annotations

import os

import numpy as np

from lmrk.config import load
from lmrk.workflow import run_evolution

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")

if __name__ == "__main__":
    res = run_evolution(load(os.path.join(CONFIGS, "zdt1_nsga2.toml")))
    f = np.array(sorted(m.objectives.values for m in res.front()))
    gap = np.abs(f[:, 1] - (1 - np.sqrt(f[:, 0])))
    print(f"{len(f)} non-dominated points, mean vertical gap {gap.mean():.4f}")
    for f1, f2 in f[:: max(1, len(f) // 10)]:
        print(f"  f1 {f1:.3f}  f2 {f2:.3f}  true {1 - np.sqrt(f1):.3f}")
