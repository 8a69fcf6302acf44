"""Population-based training of the PPO learning rate against fixed-rate runs.

Both sides spend the same number of frames: eight PBT members, or eight
independent runs at the default learning rate.
"""
from __future__ import annotations

import os
import sys

import numpy as np

from lmrk.config import load
from lmrk.workflow import fixed_baseline, run_evolution

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")

if __name__ == "__main__":
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    cfg = load(os.path.join(CONFIGS, "pbt_pendulum.toml")).with_seed(seed)
    res = run_evolution(cfg)
    for g, ids in enumerate(res.exploited, start=1):
        print(f"round {g}: members {ids} copied a stronger member")
    for m in sorted(res.population.members, key=lambda m: -m.info["return"]):
        print(f"member {m.id}: lr {m.coding.values['lr']:.5f} return {m.info['return']:.1f}")
    base = fixed_baseline(cfg)
    print(f"fixed lr {cfg.rl.learning_rate}: returns {np.round(base).tolist()}, "
          f"median {np.median(base):.1f}")
