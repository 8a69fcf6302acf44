from __future__ import annotations

from typing import Any, Mapping

from .base import (
    ActAfterDone,
    ActionOutOfRange,
    AsyncEnv,
    BadConfig,
    Continuous,
    Controller,
    Discrete,
    MdpSpec,
    ProtocolError,
    RoleSpec,
    StepResult,
    UnknownEnv,
)
from .pendulum import Pendulum, pendulum_step
from .ponglite import PongLite, PongState, ponglite_step, scripted_sparring_policy

ENVIRONMENTS = {
    "pendulum": Pendulum,
    "ponglite": PongLite,
}


def spawn(env_name: str, config: Mapping[str, Any] | None = None, seed: int = 0
          ) -> tuple[AsyncEnv, list[Controller]]:
    """Create an environment and its controllers (one per role, training roles first)."""
    try:
        cls = ENVIRONMENTS[env_name]
    except KeyError:
        raise UnknownEnv(env_name) from None
    try:
        env = cls(seed=seed, **dict(config or {}))
    except TypeError as exc:
        raise BadConfig(f"{env_name}: {exc}") from None
    except ValueError as exc:
        raise BadConfig(f"{env_name}: {exc}") from None
    return env, list(env.controllers)


__all__ = [
    "ActAfterDone", "ActionOutOfRange", "AsyncEnv", "BadConfig", "Continuous", "Controller",
    "Discrete", "ENVIRONMENTS", "MdpSpec", "Pendulum", "PongLite", "PongState", "ProtocolError",
    "RoleSpec", "StepResult", "UnknownEnv", "pendulum_step", "ponglite_step",
    "scripted_sparring_policy", "spawn",
]
