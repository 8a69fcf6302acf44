"""Command-line entry point: ``lmrk run | bench-broadcast | validate``."""
from __future__ import annotations

import argparse
import sys

from . import config as config_mod
from . import workflow
from .config import ConfigError
from .rl import NonFiniteLoss
from .transport.sim import CostModel


def _ints(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("node counts must be >= 1")
    return out


def _layouts(text: str) -> list[str]:
    out = [x.strip() for x in text.split(",") if x.strip()]
    bad = [x for x in out if x not in ("flat", "tree")]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"layouts must be flat and/or tree, got {text!r}")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lmrk", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="execute the experiment a config describes")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="output directory (default: [metrics] path)")
    b = sub.add_parser("bench-broadcast", help="print broadcast delay and root traffic as CSV")
    b.add_argument("--n", type=_ints, default=[9, 25, 100, 400], help="e.g. 9,25,100,400")
    b.add_argument("--layouts", type=_layouts, default=["flat", "tree"])
    b.add_argument("--cost", type=float, default=1.0, help="per-message send cost")
    v = sub.add_parser("validate", help="parse a config and print the effective TOML")
    v.add_argument("--config", required=True)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "bench-broadcast":
            rows = workflow.bench_broadcast(args.n, args.layouts, CostModel.uniform(args.cost))
            sys.stdout.write(workflow.bench_csv(rows))
            return 0
        cfg = config_mod.load(args.config)
        if args.command == "validate":
            sys.stdout.write(config_mod.dumps(cfg))
            return 0
        out = workflow.run(cfg, args.out)
        if cfg.run.mode == "bench_broadcast":
            sys.stdout.write(workflow.bench_csv(out.result))
        for path in out.files:
            print(f"wrote {path}", file=sys.stderr)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (workflow.RunAborted, NonFiniteLoss) as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
