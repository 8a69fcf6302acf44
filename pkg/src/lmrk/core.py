"""Shared value types, versioning, seeding and the policy packet wire format."""
from __future__ import annotations

import itertools
import struct
import zlib
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

MAGIC = b"LMRK"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHQI")  # magic, format version, policy version, layer count
_DIMS = struct.Struct("<II")
HEADER_SIZE = _HEADER.size  # 18

# Hard caps checked before any allocation during decoding.
MAX_LAYERS = 1 << 16
MAX_LAYER_ELEMENTS = 1 << 28


class PacketError(ValueError):
    """Base class for wire-format decoding failures."""


class BadMagic(PacketError):
    pass


class TruncatedInput(PacketError):
    pass


class ShapeOverflow(PacketError):
    pass


class VersionRegression(ValueError):
    """A version counter or staleness record went backwards."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Layer:
    """One dense layer: ``y = x @ weight + bias`` with ``weight`` of shape (rows, cols).

    ``rows == 0`` is allowed and carries a bare parameter vector in ``bias``
    (used for the state-independent log standard deviation).
    """

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.array(self.weight, dtype=np.float32, copy=True)
        b = np.array(self.bias, dtype=np.float32, copy=True).reshape(-1)
        if w.ndim != 2:
            raise ValueError(f"weight must be 2-D, got shape {w.shape}")
        if b.shape[0] != w.shape[1]:
            raise ValueError(f"bias length {b.shape[0]} != cols {w.shape[1]}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("layer parameters must be finite")
        object.__setattr__(self, "weight", _frozen(w))
        object.__setattr__(self, "bias", _frozen(b))

    @property
    def rows(self) -> int:
        return self.weight.shape[0]

    @property
    def cols(self) -> int:
        return self.weight.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Layer):
            return NotImplemented
        return (
            self.weight.shape == other.weight.shape
            and self.weight.tobytes() == other.weight.tobytes()
            and self.bias.tobytes() == other.bias.tobytes()
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PolicyParams:
    layers: tuple[Layer, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    @classmethod
    def from_arrays(cls, pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> "PolicyParams":
        return cls(tuple(Layer(w, b) for w, b in pairs))

    def is_chain(self) -> bool:
        """True when every layer's output width feeds the next layer's input."""
        return all(a.cols == b.rows for a, b in zip(self.layers, self.layers[1:]))

    @property
    def nbytes(self) -> int:
        return sum(4 * (l.weight.size + l.bias.size) + _DIMS.size for l in self.layers)

    def __eq__(self, other):
        if not isinstance(other, PolicyParams):
            return NotImplemented
        return len(self.layers) == len(other.layers) and all(
            a == b for a, b in zip(self.layers, other.layers)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PolicyPacket:
    version: int
    params: PolicyParams
    # logical timestamp; not part of the wire format, hence not compared
    produced_at: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if not 0 <= self.version < 1 << 64:
            raise ValueError(f"version out of u64 range: {self.version}")

    def __eq__(self, other):
        if not isinstance(other, PolicyPacket):
            return NotImplemented
        return self.version == other.version and self.params == other.params

    __hash__ = None


def serialize_packet(packet: PolicyPacket) -> bytes:
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, packet.version, len(packet.params.layers))]
    for layer in packet.params.layers:
        parts.append(_DIMS.pack(layer.rows, layer.cols))
        parts.append(layer.weight.astype("<f4", copy=False).tobytes(order="C"))
        parts.append(layer.bias.astype("<f4", copy=False).tobytes())
    return b"".join(parts)


def deserialize_packet(data: bytes | bytearray | memoryview) -> PolicyPacket:
    buf = memoryview(bytes(data))
    if len(buf) < len(MAGIC):
        raise TruncatedInput(f"need {len(MAGIC)} magic bytes, got {len(buf)}")
    if bytes(buf[:4]) != MAGIC:
        raise BadMagic(f"bad magic {bytes(buf[:4])!r}")
    if len(buf) < HEADER_SIZE:
        raise TruncatedInput(f"header needs {HEADER_SIZE} bytes, got {len(buf)}")
    _, fmt, version, n_layers = _HEADER.unpack_from(buf, 0)
    if fmt != FORMAT_VERSION:
        raise PacketError(f"unsupported format version {fmt}")
    if n_layers > MAX_LAYERS:
        raise ShapeOverflow(f"{n_layers} layers exceeds cap {MAX_LAYERS}")
    off = HEADER_SIZE
    layers = []
    for i in range(n_layers):
        if len(buf) < off + _DIMS.size:
            raise TruncatedInput(f"layer {i}: missing shape")
        rows, cols = _DIMS.unpack_from(buf, off)
        off += _DIMS.size
        if rows * cols > MAX_LAYER_ELEMENTS or cols > MAX_LAYER_ELEMENTS:
            raise ShapeOverflow(f"layer {i}: {rows}x{cols} exceeds cap")
        need = 4 * (rows * cols + cols)
        if len(buf) < off + need:
            raise TruncatedInput(f"layer {i}: need {need} bytes, have {len(buf) - off}")
        w = np.frombuffer(buf, dtype="<f4", count=rows * cols, offset=off).reshape(rows, cols)
        off += 4 * rows * cols
        b = np.frombuffer(buf, dtype="<f4", count=cols, offset=off)
        off += 4 * cols
        layers.append(Layer(w.astype(np.float32), b.astype(np.float32)))
    if off != len(buf):
        raise PacketError(f"{len(buf) - off} trailing bytes")
    return PolicyPacket(version=version, params=PolicyParams(tuple(layers)))


class VersionCounter:
    """Monotone u64 policy version owned by one learner."""

    def __init__(self, start: int = 0):
        self._value = start

    @property
    def value(self) -> int:
        return self._value

    def bump(self) -> int:
        self._value += 1
        return self._value

    def check_emit(self, version: int) -> None:
        if version < self._value:
            raise VersionRegression(f"emitting v{version} after v{self._value}")
        self._value = version


# ---------------------------------------------------------------------------
# Seeding

def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode())


def derive_seed(seed: int, *path) -> np.random.SeedSequence:
    """Split one global seed into an independent stream addressed by ``path``.

    ``path`` elements may be ints or strings; equal paths give equal streams
    regardless of the order in which streams are requested.
    """
    return np.random.SeedSequence(entropy=int(seed) & ((1 << 64) - 1),
                                  spawn_key=tuple(_key(p) for p in path))


def make_rng(seed: int, *path) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *path))


# ---------------------------------------------------------------------------
# Rollout and EC value types

@dataclass(frozen=True)
class Step:
    state: np.ndarray
    action: np.ndarray | int
    log_prob: float
    value: float
    reward: np.ndarray
    done: bool


@dataclass(frozen=True)
class Trajectory:
    """Rollout segment produced by one agent under one policy version.

    ``bootstrap_value`` is the critic's estimate of the state following the
    last step; it is ignored when the last step is terminal.
    """

    agent_id: int
    policy_version: int
    steps: tuple[Step, ...]
    bootstrap_value: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        for i, s in enumerate(self.steps[:-1]):
            if s.done:
                raise ValueError(f"step {i} is done but not last")

    def __len__(self):
        return len(self.steps)


_ids = itertools.count(1)


def next_id() -> int:
    return next(_ids)


@dataclass(frozen=True, eq=False)
class RealVector:
    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        v, lo, hi = (np.array(a, dtype=float).reshape(-1) for a in (self.values, self.lower, self.upper))
        if not (v.shape == lo.shape == hi.shape):
            raise ValueError("values and bounds must have equal length")
        if np.any(lo > hi):
            raise ValueError("lower bound above upper bound")
        if np.any(v < lo) or np.any(v > hi):
            raise ValueError("values outside bounds")
        for name, a in (("values", v), ("lower", lo), ("upper", hi)):
            object.__setattr__(self, name, _frozen(a))

    def replace(self, values) -> "RealVector":
        return RealVector(np.clip(values, self.lower, self.upper), self.lower, self.upper)

    def __eq__(self, other):
        return (isinstance(other, RealVector)
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.lower, other.lower)
                and np.array_equal(self.upper, other.upper))

    __hash__ = None


@dataclass(frozen=True)
class HyperParams:
    """Named reals, each with a closed search interval ``(low, high)``."""

    values: Mapping[str, float]
    ranges: Mapping[str, tuple[float, float]]
    # trained weights travelling with the hyperparameters (PBT / EMOGI)
    weights: PolicyParams | None = field(default=None, compare=False)

    def __post_init__(self):
        values = {k: float(v) for k, v in self.values.items()}
        ranges = {k: (float(lo), float(hi)) for k, (lo, hi) in self.ranges.items()}
        if set(values) != set(ranges):
            raise ValueError("every hyperparameter needs a range")
        for k, v in values.items():
            lo, hi = ranges[k]
            if not lo <= v <= hi:
                raise ValueError(f"{k}={v} outside [{lo}, {hi}]")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ranges", ranges)

    def with_values(self, **updates) -> "HyperParams":
        return HyperParams({**self.values, **updates}, self.ranges, self.weights)

    def with_weights(self, weights: PolicyParams | None) -> "HyperParams":
        return HyperParams(self.values, self.ranges, weights)


@dataclass(frozen=True)
class NetWeights:
    params: PolicyParams


Coding = RealVector | HyperParams | NetWeights


@dataclass(frozen=True)
class ObjectiveVector:
    values: tuple[float, ...]
    sense: tuple[str, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        sense = tuple(self.sense)
        if len(values) != len(sense):
            raise ValueError("values and sense differ in length")
        if any(s not in ("min", "max") for s in sense):
            raise ValueError(f"sense must be 'min' or 'max', got {sense}")
        if not all(np.isfinite(values)):
            raise ValueError(f"objectives must be finite: {values}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sense", sense)

    @classmethod
    def minimize(cls, *values: float) -> "ObjectiveVector":
        return cls(tuple(values), ("min",) * len(values))

    @classmethod
    def maximize(cls, *values: float) -> "ObjectiveVector":
        return cls(tuple(values), ("max",) * len(values))

    def as_minimization(self) -> np.ndarray:
        signs = np.array([1.0 if s == "min" else -1.0 for s in self.sense])
        return signs * np.asarray(self.values)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class Candidate:
    coding: Coding
    objectives: ObjectiveVector | None = None
    id: int = field(default_factory=next_id)
    # free-form evaluation extras (episode stats, movement fractions, ...)
    info: Mapping[str, float] = field(default_factory=dict, compare=False)

    def evaluated(self, objectives: ObjectiveVector, **info) -> "Candidate":
        return Candidate(self.coding, objectives, self.id, dict(info))
