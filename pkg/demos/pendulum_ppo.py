"""Train PPO on Pendulum-lite and print the learning curve.

Usage: python demos/pendulum_ppo.py [seed]
"""
from __future__ import annotations

import os
import sys

import numpy as np

from lmrk.config import load
from lmrk.workflow import run_rl

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")

if __name__ == "__main__":
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    res = run_rl(load(os.path.join(CONFIGS, "pendulum_ppo.toml")).with_seed(seed))
    rets = np.array([e.ret for e in res.episodes])
    step = max(1, len(rets) // 20)
    for i in range(0, len(rets), step):
        window = rets[i:i + step]
        print(f"episodes {i:>5}-{i + len(window) - 1:<5} mean return {window.mean():8.1f}")
    print(f"staleness {res.metrics.staleness_mean:.2f}, {res.metrics.fps:.0f} simulated fps")
