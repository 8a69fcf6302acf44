"""Strict TOML run configuration.

Every section maps onto a frozen dataclass.  Unknown sections or keys and
wrongly typed values raise :class:`ConfigError` naming the offending path.
"""
from __future__ import annotations

import dataclasses
import os
import sys
from dataclasses import dataclass, field, fields
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .rl import PpoConfig

MODES = ("ppo", "pbt_ppo", "nsga2", "es", "emogi", "bench_broadcast")
SEED_ENV = "LMRK_SEED"


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class RunSection:
    mode: str = "ppo"
    seed: int = 0
    frames: int = 500_000  # learner frame budget for mode = ppo
    generations: int = 10
    schedule: str = "async"  # async | sync


@dataclass(frozen=True)
class EnvSection:
    name: str = "pendulum"
    seed: int = 0  # added to per-actor environment seeds
    horizon: int = 0  # 0 keeps the environment default
    points_to_win: int = 0


@dataclass(frozen=True)
class TransportSection:
    kind: str = "simulated"  # simulated | socket
    inter_machine_send_cost: float = 1.0  # time unit: simulated milliseconds
    intra_machine_send_cost: float = 0.05
    per_byte_cost: float = 0.0
    actors: int = 8
    actors_per_machine: int = 8
    actor_frame_cost: float = 1.0
    learner_step_cost: float = 100.0  # per pass over one batch
    fragment: int = 200
    eval_contexts: int = 4
    eval_latency_min: float = 10.0
    eval_latency_max: float = 100.0
    address: str = "127.0.0.1:0"


@dataclass(frozen=True)
class BroadcastSection:
    layout: str = "tree"  # tree | flat
    bench_n: tuple[int, ...] = (9, 25, 100, 400)
    bench_layouts: tuple[str, ...] = ("flat", "tree")


@dataclass(frozen=True)
class RlSection:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    learning_rate: float = 0.01
    batch_size: int = 8192
    batch_reuse: int = 1
    policy_weight: float = 1.0
    critic_weight: float = 0.5
    entropy_weight: float = 0.01
    optimizer: str = "sgd"
    max_grad_norm: float = 0.0
    reward_scale: float = 1.0
    minibatches: int = 1
    trunk: tuple[int, ...] = ()  # empty: environment default
    critic: tuple[int, ...] = ()
    no_critic_layers: bool = False  # force a critic that reuses the whole trunk

    def ppo(self) -> PpoConfig:
        names = {f.name for f in fields(PpoConfig)}
        return PpoConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})

    def network(self) -> tuple[tuple[int, ...] | None, tuple[int, ...] | None]:
        trunk = self.trunk or None
        critic = () if self.no_critic_layers else (self.critic or None)
        return trunk, critic


@dataclass(frozen=True)
class EcSection:
    population: int = 100
    eta_c: float = 15.0
    p_c: float = 0.9
    eta_m: float = 20.0
    p_m: float = -1.0  # negative: 1 / dimension
    sigma: float = 0.1
    pbt_quantile: float = 0.2
    pbt_factors: tuple[float, float] = (0.8, 1.2)


@dataclass(frozen=True)
class EmogiSection:
    w1: float = 1.0
    w2: float = 1.0
    T: int = 100
    laziness_form: str = "normalized"
    point_weight: float = 1.0


@dataclass(frozen=True)
class EvaluatorSection:
    name: str = "zdt1"  # zdt1 | dtlz2 | ppo
    n: int = 0  # 0: benchmark default
    m: int = 3
    budget: int = 50_000
    n_envs: int = 8
    window: int = 10
    search: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    defaults: Mapping[str, float] = field(default_factory=dict)
    emogi: EmogiSection = field(default_factory=EmogiSection)


@dataclass(frozen=True)
class MetricsSection:
    path: str = "runs/out"
    interval: float = 1000.0  # simulated ms between rows
    wall_interval: float = 5.0  # seconds between rows on the socket backend


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    env: EnvSection = field(default_factory=EnvSection)
    transport: TransportSection = field(default_factory=TransportSection)
    broadcast: BroadcastSection = field(default_factory=BroadcastSection)
    rl: RlSection = field(default_factory=RlSection)
    ec: EcSection = field(default_factory=EcSection)
    evaluator: EvaluatorSection = field(default_factory=EvaluatorSection)
    metrics: MetricsSection = field(default_factory=MetricsSection)

    def env_config(self) -> dict[str, int]:
        out = {}
        if self.env.horizon:
            out["horizon"] = self.env.horizon
        if self.env.points_to_win:
            out["points_to_win"] = self.env.points_to_win
        return out

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(self, run=dataclasses.replace(self.run, seed=seed))

    def replace(self, **sections: Mapping[str, Any]) -> "RunConfig":
        """Copy with some keys changed, e.g. ``cfg.replace(transport={"actors": 64})``."""
        data = to_dict(self)
        for name, updates in sections.items():
            data.setdefault(name, {}).update(updates)
        return from_dict(data, env={})


# ---------------------------------------------------------------------------
# Parsing

def _coerce(path: str, value: Any, default: Any) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {value!r}")
        proto = default[0] if default else 0
        return tuple(_coerce(f"{path}[{i}]", v, proto) for i, v in enumerate(value))
    raise ConfigError(path, "unsupported value")


def _section(cls, data: Mapping[str, Any], path: str):
    if not isinstance(data, Mapping):
        raise ConfigError(path or "config", "expected a table")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(_join(path, unknown[0]), "unknown key")
    proto = cls()
    kwargs = {}
    for name, value in data.items():
        sub = _join(path, name)
        default = getattr(proto, name)
        if dataclasses.is_dataclass(default):
            kwargs[name] = _section(type(default), value, sub)
        elif name == "search":
            kwargs[name] = _ranges(sub, value)
        elif name == "defaults":
            if not isinstance(value, Mapping):
                raise ConfigError(sub, "expected a table")
            kwargs[name] = {k: _coerce(f"{sub}.{k}", v, 0.0) for k, v in value.items()}
        else:
            kwargs[name] = _coerce(sub, value, default)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path or "config", str(exc)) from None


def _join(path: str, name: str) -> str:
    return f"{path}.{name}" if path else name


def _ranges(path: str, value: Any) -> dict[str, tuple[float, float]]:
    if not isinstance(value, Mapping):
        raise ConfigError(path, "expected a table of [low, high] pairs")
    out = {}
    for k, v in value.items():
        pair = _coerce(f"{path}.{k}", v, (0.0,))
        if len(pair) != 2 or pair[0] > pair[1]:
            raise ConfigError(f"{path}.{k}", "expected [low, high] with low <= high")
        out[k] = pair
    return out


def _validate(cfg: RunConfig) -> None:
    checks = [
        ("run.mode", cfg.run.mode in MODES, f"must be one of {MODES}"),
        ("run.schedule", cfg.run.schedule in ("async", "sync"), "must be async or sync"),
        ("run.frames", cfg.run.frames >= 1, "must be >= 1"),
        ("run.generations", cfg.run.generations >= 1, "must be >= 1"),
        ("run.seed", 0 <= cfg.run.seed < 2**64, "must fit in 64 unsigned bits"),
        ("env.name", cfg.env.name in ("pendulum", "ponglite"), "must be pendulum or ponglite"),
        ("transport.kind", cfg.transport.kind in ("simulated", "socket"),
         "must be simulated or socket"),
        ("transport.actors", cfg.transport.actors >= 1, "must be >= 1"),
        ("transport.actors_per_machine", cfg.transport.actors_per_machine >= 1, "must be >= 1"),
        ("transport.fragment", cfg.transport.fragment >= 1, "must be >= 1"),
        ("transport.eval_contexts", cfg.transport.eval_contexts >= 1, "must be >= 1"),
        ("transport.eval_latency_max", cfg.transport.eval_latency_max >= cfg.transport.eval_latency_min >= 0,
         "needs 0 <= eval_latency_min <= eval_latency_max"),
        ("transport.actor_frame_cost", cfg.transport.actor_frame_cost >= 0, "must be >= 0"),
        ("transport.learner_step_cost", cfg.transport.learner_step_cost >= 0, "must be >= 0"),
        ("broadcast.layout", cfg.broadcast.layout in ("tree", "flat"), "must be tree or flat"),
        ("broadcast.bench_n", all(n >= 1 for n in cfg.broadcast.bench_n), "entries must be >= 1"),
        ("broadcast.bench_layouts", all(l in ("tree", "flat") for l in cfg.broadcast.bench_layouts),
         "entries must be tree or flat"),
        ("ec.population", cfg.ec.population >= 2 and cfg.ec.population % 2 == 0,
         "must be even and >= 2"),
        ("ec.p_c", 0 <= cfg.ec.p_c <= 1, "must lie in [0, 1]"),
        ("ec.p_m", cfg.ec.p_m <= 1, "must be <= 1 (negative means 1/dimension)"),
        ("ec.sigma", cfg.ec.sigma >= 0, "must be >= 0"),
        ("ec.pbt_quantile", 0 <= cfg.ec.pbt_quantile <= 0.5, "must lie in [0, 0.5]"),
        ("ec.pbt_factors", len(cfg.ec.pbt_factors) == 2, "needs two factors"),
        ("evaluator.name", cfg.evaluator.name in ("zdt1", "dtlz2", "ppo"),
         "must be zdt1, dtlz2 or ppo"),
        ("evaluator.budget", cfg.evaluator.budget >= 1, "must be >= 1"),
        ("evaluator.n_envs", cfg.evaluator.n_envs >= 1, "must be >= 1"),
        ("metrics.interval", cfg.metrics.interval > 0, "must be > 0"),
    ]
    mode, ev = cfg.run.mode, cfg.evaluator
    rl_eval = ev.name == "ppo"
    checks += [
        ("run.frames", mode != "ppo" or cfg.run.frames >= cfg.rl.batch_size,
         "must cover at least one batch (rl.batch_size)"),
        ("evaluator.budget", not rl_eval or ev.budget >= cfg.rl.batch_size,
         "must cover at least one batch (rl.batch_size)"),
        ("evaluator.name", mode not in ("pbt_ppo", "emogi") or rl_eval,
         f"mode {mode} needs the ppo evaluator"),
        ("evaluator.name", mode != "es" or not rl_eval, "es mode needs a real-vector benchmark"),
        ("env.name", mode != "emogi" or cfg.env.name == "ponglite", "emogi mode needs ponglite"),
        ("evaluator.search", not rl_eval or mode not in ("pbt_ppo", "emogi", "nsga2") or bool(ev.search),
         "needs at least one searchable hyperparameter"),
        ("evaluator.search.beta", mode != "emogi" or "beta" in ev.search, "emogi mode needs a beta range"),
    ]
    for path, ok, message in checks:
        if not ok:
            raise ConfigError(path, message)
    unknown = sorted(set(ev.search) - {"lr", "critic_weight", "entropy_weight", "clip", "beta"})
    if unknown:
        raise ConfigError(f"evaluator.search.{unknown[0]}", "not a searchable hyperparameter")
    try:
        cfg.rl.ppo()
    except ValueError as exc:
        raise ConfigError("rl", str(exc)) from None
    try:
        from .evaluator import EmogiConfig
        e = cfg.evaluator.emogi
        EmogiConfig(e.w1, e.w2, e.T, e.laziness_form)
    except ValueError as exc:
        raise ConfigError("evaluator.emogi", str(exc)) from None


def from_dict(data: Mapping[str, Any], env: Mapping[str, str] | None = None) -> RunConfig:
    cfg = _section(RunConfig, data, "")
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        try:
            seed = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(SEED_ENV, f"not an integer: {env[SEED_ENV]!r}") from None
        cfg = cfg.with_seed(seed)
    _validate(cfg)
    return cfg


def loads(text: str, env: Mapping[str, str] | None = None) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"invalid TOML: {exc}") from None
    return from_dict(data, env)


def load(path: str | os.PathLike, env: Mapping[str, str] | None = None) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode()
    except OSError as exc:
        raise ConfigError(str(path), exc.strerror or str(exc)) from None
    return loads(text, env)


def to_dict(cfg: RunConfig) -> dict[str, Any]:
    def plain(v):
        if dataclasses.is_dataclass(v):
            return {f.name: plain(getattr(v, f.name)) for f in fields(v)}
        if isinstance(v, tuple):
            return [plain(x) for x in v]
        if isinstance(v, Mapping):
            return {k: plain(x) for k, x in sorted(v.items())}
        return v

    return plain(cfg)


def dumps(cfg: RunConfig) -> str:
    return tomli_w.dumps(to_dict(cfg))
