from __future__ import annotations

import glob
import os
import subprocess
import sys

import pytest

from lmrk import cli
from lmrk.config import ConfigError, RunConfig, dumps, load, loads

CONFIGS = sorted(glob.glob(os.path.join(os.path.dirname(__file__), "..", "configs", "*.toml")))


def test_default_hyperparameters():
    rl = RunConfig().rl
    assert (rl.gamma, rl.clip, rl.learning_rate, rl.batch_size, rl.batch_reuse) == (
        0.99, 0.2, 0.01, 8192, 1)
    assert (rl.policy_weight, rl.critic_weight, rl.entropy_weight) == (1.0, 0.5, 0.01)


@pytest.mark.parametrize("path", CONFIGS, ids=os.path.basename)
def test_shipped_configs_round_trip(path):
    cfg = load(path, env={})
    assert loads(dumps(cfg), env={}) == cfg


@pytest.mark.parametrize("path", CONFIGS, ids=os.path.basename)
def test_validate_shipped_configs(path, capsys, monkeypatch):
    monkeypatch.delenv("LMRK_SEED", raising=False)
    assert cli.main(["validate", "--config", path]) == 0
    out = capsys.readouterr().out
    assert "gamma = 0.99" in out and "clip = 0.2" in out
    assert loads(out, env={}) == load(path, env={})


def test_unknown_key_names_path(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("[rl]\nklcoef = 0.2\n")
    assert cli.main(["validate", "--config", str(p)]) == 1
    assert "rl.klcoef" in capsys.readouterr().err


@pytest.mark.parametrize("text,path", [
    ("[nosuch]\nx = 1\n", "nosuch"),
    ("[rl]\ngamma = \"high\"\n", "rl.gamma"),
    ("[rl]\nbatch_size = 1.5\n", "rl.batch_size"),
    ("[run]\nmode = \"dance\"\n", "run.mode"),
    ("[ec]\npopulation = 5\n", "ec.population"),
    ("[rl]\ngamma = 1.0\n", "rl"),
    ("[run]\nmode = \"emogi\"\n", "evaluator.name"),
    ("[run]\nmode = \"pbt_ppo\"\n[evaluator]\nname = \"ppo\"\n[evaluator.search]\nmomentum = [0.1, 0.9]\n",
     "evaluator.search.momentum"),
    ("[run]\nframes = 100\n", "run.frames"),
    ("not toml [", "config"),
])
def test_config_errors(text, path):
    with pytest.raises(ConfigError) as info:
        loads(text, env={})
    assert info.value.path == path


def test_seed_override_from_environment():
    assert loads("[run]\nseed = 3\n", env={"LMRK_SEED": "17"}).run.seed == 17
    assert loads("[run]\nseed = 3\n", env={}).run.seed == 3
    with pytest.raises(ConfigError):
        loads("", env={"LMRK_SEED": "x"})


def test_missing_file(capsys):
    assert cli.main(["validate", "--config", "/nonexistent.toml"]) == 1


def test_bench_broadcast_subcommand(capsys):
    assert cli.main(["bench-broadcast", "--n", "9,100", "--layouts", "flat,tree"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "n,layout,out_degree,max_delay,root_traffic"
    rows = [l.split(",") for l in lines[1:]]
    assert ["9", "tree", "3"] == rows[1][:3] and float(rows[1][3]) == 5
    assert float(rows[3][3]) == 19 and float(rows[2][3]) == 100


def test_run_bench_config(tmp_path, capsys):
    path = [c for c in CONFIGS if c.endswith("bench_broadcast.toml")][0]
    assert cli.main(["run", "--config", path, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "broadcast.csv").exists()


def test_runtime_abort_exit_code(tmp_path):
    p = tmp_path / "diverge.toml"
    p.write_text(
        "[run]\nmode = \"ppo\"\nframes = 4096\n"
        "[transport]\nactors = 2\n"
        "[rl]\nbatch_size = 512\nlearning_rate = 1e30\ntrunk = [8]\ncritic = []\n")
    assert cli.main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert (tmp_path / "o" / "metrics.csv").exists()


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lmrk.cli", "bench-broadcast", "--n", "4"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.startswith("n,layout")
