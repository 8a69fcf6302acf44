"""Run orchestration: the RL loop, the evolution loop and their outputs."""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Any

from ..config import RunConfig
from ..core import serialize_packet
from ..transport.sim import CostModel
from .bench import BENCH_HEADER, BenchRow, bench_broadcast, bench_csv
from .collector import Collector, StaleGeneration
from .evolution import EvolutionResult, EvolutionRun, fixed_baseline, make_evaluator, run_evolution
from .metrics import CSV_HEADER, MetricsRow, RunMetrics, population_json
from .rl_sim import RlResult, SimRlRun, run_rl_simulated
from .rl_socket import run_rl_socket


class RunAborted(RuntimeError):
    """The run stopped early; partial metrics were written before raising."""


def run_rl(cfg: RunConfig) -> RlResult:
    if cfg.transport.kind == "socket":
        return run_rl_socket(cfg)
    return run_rl_simulated(cfg)


@dataclass
class RunOutput:
    result: Any
    files: list[str]


def run(cfg: RunConfig, out_dir: str | None = None) -> RunOutput:
    """Execute ``cfg.run.mode`` and write its artifacts under ``out_dir``.

    ``ppo`` writes metrics.csv and policy.lmrk; evolution modes write
    metrics.csv, population.json and policies/; ``bench_broadcast`` writes
    broadcast.csv.
    """
    out_dir = out_dir or cfg.metrics.path
    os.makedirs(out_dir, exist_ok=True)
    mode = cfg.run.mode
    if mode == "bench_broadcast":
        t = cfg.transport
        rows = bench_broadcast(cfg.broadcast.bench_n, cfg.broadcast.bench_layouts,
                               CostModel(t.inter_machine_send_cost, t.intra_machine_send_cost,
                                         t.per_byte_cost))
        path = os.path.join(out_dir, "broadcast.csv")
        with open(path, "w") as fh:
            fh.write(bench_csv(rows))
        return RunOutput(rows, [path])
    if mode == "ppo":
        res = run_rl(cfg)
        metrics_path = os.path.join(out_dir, "metrics.csv")
        res.metrics.write_csv(metrics_path)
        if res.metrics.aborted:
            raise RunAborted(res.metrics.aborted)
        policy_path = os.path.join(out_dir, "policy.lmrk")
        with open(policy_path, "wb") as fh:
            fh.write(serialize_packet(res.packet))
        return RunOutput(res, [metrics_path, policy_path])
    runner = EvolutionRun(cfg)
    res = runner.run()
    runner.write(out_dir)
    return RunOutput(res, [os.path.join(out_dir, "metrics.csv"),
                           os.path.join(out_dir, "population.json")])


__all__ = [
    "BENCH_HEADER", "BenchRow", "CSV_HEADER", "Collector", "EvolutionResult", "EvolutionRun",
    "MetricsRow", "RlResult", "RunAborted", "RunMetrics", "RunOutput", "SimRlRun",
    "StaleGeneration", "bench_broadcast", "bench_csv", "fixed_baseline", "make_evaluator", "population_json",
    "run", "run_evolution", "run_rl", "run_rl_simulated", "run_rl_socket",
]
