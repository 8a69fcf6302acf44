"""Evolve Pong-lite agents that trade off activeness against laziness.

Each member carries a learning rate and a preference beta: beta near 1
rewards moving the paddle, beta near 0 rewards standing still. The final
non-dominated members should play similarly well with very different
movement fractions. This takes a while on one core.
"""
from __future__ import annotations

import os

from lmrk.config import load
from lmrk.workflow import run_evolution

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")

if __name__ == "__main__":
    res = run_evolution(load(os.path.join(CONFIGS, "emogi_pong.toml")))
    front = {m.id for m in res.front()}
    print(f"{'id':>5} {'front':>5} {'beta':>5} {'lr':>8} {'moves':>6} {'score':>6} {'f1':>7} {'f2':>7}")
    for m in sorted(res.population.members, key=lambda m: m.info["move_fraction"]):
        v = m.coding.values
        print(f"{m.id:>5} {'*' if m.id in front else '':>5} {v['beta']:5.2f} {v['lr']:8.5f} "
              f"{m.info['move_fraction']:6.2f} {m.info['normalized_score']:6.3f} "
              f"{m.objectives.values[0]:7.3f} {m.objectives.values[1]:7.3f}")
