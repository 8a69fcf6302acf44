"""Policy staleness and frames per second against the number of simulated actors.

More actors produce more data per learner step, so each sample lags further
behind the learner in asynchronous mode; synchronous mode keeps the lag fixed
but idles the actors while the learner trains.
"""
from __future__ import annotations

import os

from lmrk.config import load
from lmrk.workflow import run_rl

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")

if __name__ == "__main__":
    base = load(os.path.join(CONFIGS, "staleness_async_flat_a4.toml"))
    print(f"{'schedule':>8} {'layout':>6} {'actors':>6} {'staleness':>10} {'fps':>8}")
    for schedule in ("async", "sync"):
        for layout in ("flat", "tree"):
            for actors in (4, 16, 64):
                cfg = base.replace(run={"schedule": schedule}, broadcast={"layout": layout},
                                   transport={"actors": actors})
                m = run_rl(cfg).metrics
                print(f"{schedule:>8} {layout:>6} {actors:>6} {m.staleness_mean:>10.3f} {m.fps:>8.0f}")
