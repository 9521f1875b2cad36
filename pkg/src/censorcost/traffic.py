"""Seeded synthetic traffic: allowed and disallowed flows with probe responses.

Every flow is drawn from its own random stream, derived from the master seed
and the flow's index, so serial and parallel generation produce the same
trace.  Allowed flows come from one :class:`ClassSpec`, disallowed flows
(the untransformed evasion protocol) from another.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Iterator, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import ConfigError, MeasurementUnavailable

__all__ = [
    "TrafficType", "Packet", "Flow", "TrafficTrace",
    "TruncNormal", "LengthComponent", "RateComponent", "ClassSpec",
    "ProbeBehavior", "ProbeSpec", "TrafficSpec",
    "generate_traffic", "generate_flow", "apply_probe", "flow_rng",
    "write_trace_jsonl", "read_trace_jsonl",
    "TLS_TELLTALE", "NO_MARKER", "COVER_MARKER",
]

TLS_TELLTALE = "tls-telltale"
NO_MARKER = "none"
COVER_MARKER = "cover-protocol-id"

MAX_ENTROPY = 8.0


class TrafficType(str, enum.Enum):
    ALLOWED = "allowed"
    DISALLOWED = "disallowed"

    def __str__(self) -> str:
        return self.value


class Packet(NamedTuple):
    length: int
    arrival_offset: float
    payload_entropy: float


def _check(cond: bool, field_name: str, message: str) -> None:
    if not cond:
        raise ConfigError(field_name, message)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Flow:
    """One simulated flow.

    Packet attributes are held column-wise; ``packets`` gives the row view.
    ``true_type`` is the hidden label and must never feed a censor decision.
    """

    flow_id: int
    lengths: np.ndarray
    offsets: np.ndarray
    entropy: np.ndarray
    duration: float
    marker: str
    probe_responses: Mapping[str, str]
    true_type: TrafficType

    def __post_init__(self):
        lengths = _frozen(np.array(self.lengths, dtype=np.int64))
        offsets = _frozen(np.array(self.offsets, dtype=np.float64))
        entropy = _frozen(np.array(self.entropy, dtype=np.float64))
        if lengths.ndim != 1 or lengths.size == 0:
            raise ValueError("a flow needs at least one packet")
        if not (lengths.shape == offsets.shape == entropy.shape):
            raise ValueError("packet columns differ in length")
        if lengths.min() < 1:
            raise ValueError("packet lengths must be >= 1")
        if offsets[0] < 0 or np.any(np.diff(offsets) < 0):
            raise ValueError("arrival offsets must be non-negative and non-decreasing")
        if entropy.min() < 0 or entropy.max() > MAX_ENTROPY:
            raise ValueError("payload entropy must lie in [0, 8]")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "entropy", entropy)
        object.__setattr__(self, "duration", float(self.duration))
        object.__setattr__(self, "probe_responses", dict(self.probe_responses))
        object.__setattr__(self, "true_type", TrafficType(self.true_type))

    @property
    def packets(self) -> tuple[Packet, ...]:
        return tuple(
            Packet(int(l), float(o), float(e))
            for l, o, e in zip(self.lengths, self.offsets, self.entropy)
        )

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.offsets)

    def replace(self, **changes) -> "Flow":
        kw = dict(
            flow_id=self.flow_id, lengths=self.lengths, offsets=self.offsets,
            entropy=self.entropy, duration=self.duration, marker=self.marker,
            probe_responses=self.probe_responses, true_type=self.true_type,
        )
        kw.update(changes)
        return Flow(**kw)

    def __eq__(self, other):
        if not isinstance(other, Flow):
            return NotImplemented
        return (
            self.flow_id == other.flow_id
            and self.true_type == other.true_type
            and self.marker == other.marker
            and self.duration == other.duration
            and self.probe_responses == other.probe_responses
            and np.array_equal(self.lengths, other.lengths)
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.entropy, other.entropy)
        )

    __hash__ = None

    def to_record(self) -> dict:
        return {
            "id": self.flow_id,
            "true_type": self.true_type.value,
            "lengths": self.lengths.tolist(),
            "offsets": self.offsets.tolist(),
            "entropy": self.entropy.tolist(),
            "duration": self.duration,
            "marker": self.marker,
            "probe_responses": dict(sorted(self.probe_responses.items())),
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "Flow":
        return cls(
            flow_id=int(rec["id"]), lengths=rec["lengths"], offsets=rec["offsets"],
            entropy=rec["entropy"], duration=rec["duration"], marker=rec["marker"],
            probe_responses=rec["probe_responses"], true_type=rec["true_type"],
        )


class TrafficTrace(Sequence):
    """Ordered, immutable sequence of flows."""

    def __init__(self, flows):
        self._flows = tuple(flows)

    def __len__(self):
        return len(self._flows)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return TrafficTrace(self._flows[idx])
        return self._flows[idx]

    def __iter__(self) -> Iterator[Flow]:
        return iter(self._flows)

    def __eq__(self, other):
        if not isinstance(other, TrafficTrace):
            return NotImplemented
        return len(self) == len(other) and all(a == b for a, b in zip(self, other))

    __hash__ = None

    def __repr__(self):
        n_d = int(self.is_disallowed().sum())
        return f"TrafficTrace(n={len(self)}, disallowed={n_d})"

    @property
    def flows(self) -> tuple[Flow, ...]:
        return self._flows

    def is_disallowed(self) -> np.ndarray:
        return np.fromiter(
            (f.true_type is TrafficType.DISALLOWED for f in self._flows),
            dtype=bool, count=len(self._flows),
        )

    def of_type(self, t: TrafficType) -> "TrafficTrace":
        return TrafficTrace(f for f in self._flows if f.true_type is t)

    def split(self, fraction: float) -> tuple["TrafficTrace", "TrafficTrace"]:
        """Stratified split: the first ``floor(fraction * n_t)`` flows of each type train."""
        _check(0.0 < fraction < 1.0, "training_fraction", "must lie in (0, 1)")
        train, held = [], []
        for t in TrafficType:
            group = [f for f in self._flows if f.true_type is t]
            k = int(math.floor(fraction * len(group)))
            train.extend(group[:k])
            held.extend(group[k:])
        train.sort(key=lambda f: f.flow_id)
        held.sort(key=lambda f: f.flow_id)
        return TrafficTrace(train), TrafficTrace(held)


# --------------------------------------------------------------------------
# generative families


def sample_truncnorm(rng: np.random.Generator, mean, std, low, high, size) -> np.ndarray:
    """Inverse-CDF draw from N(mean, std) restricted to [low, high]."""
    if std == 0:
        return np.full(size, float(np.clip(mean, low, high)))
    a = (low - mean) / std
    b = (high - mean) / std
    # reflect upper-tail windows so the CDF differences stay well conditioned
    flip = a > 0
    if flip:
        a, b = -b, -a
    pa, pb = ndtr(a), ndtr(b)
    u = rng.random(size)
    z = ndtri(pa + u * (pb - pa))
    z = np.clip(z, a, b)
    if flip:
        z = -z
    return np.clip(mean + std * z, low, high)


@dataclass(frozen=True)
class TruncNormal:
    mean: float
    std: float
    low: float
    high: float

    def __post_init__(self):
        _check(self.std >= 0, "std", "must be non-negative")
        _check(self.low < self.high, "low", "must be below high")
        _check(self.low <= self.mean <= self.high or self.std > 0, "mean",
               "degenerate distribution outside its support")

    def sample(self, rng, size):
        return sample_truncnorm(rng, self.mean, self.std, self.low, self.high, size)


@dataclass(frozen=True)
class LengthComponent:
    """One packet-length mode; a flow draws all of its packets from one mode."""

    weight: float
    mean: float
    std: float
    min: int = 1
    max: int = 1500

    def __post_init__(self):
        _check(self.weight > 0, "weight", "must be positive")
        _check(self.std >= 0, "std", "must be non-negative")
        _check(self.min >= 1, "min", "packet lengths must be >= 1")
        _check(self.min < self.max, "min", "must be below max")

    def sample(self, rng, size) -> np.ndarray:
        x = sample_truncnorm(rng, self.mean, self.std, self.min, self.max, size)
        return np.clip(np.rint(x), self.min, self.max).astype(np.int64)


@dataclass(frozen=True)
class RateComponent:
    """Exponential interarrival mode (``rate`` packets per second)."""

    weight: float
    rate: float

    def __post_init__(self):
        _check(self.weight > 0, "weight", "must be positive")
        _check(self.rate > 0, "rate", "must be positive")

    def sample(self, rng, size) -> np.ndarray:
        return rng.exponential(1.0 / self.rate, size)


def _pick(rng: np.random.Generator, weights: Sequence[float]) -> int:
    w = np.asarray(weights, dtype=float)
    return int(rng.choice(len(w), p=w / w.sum()))


@dataclass(frozen=True)
class ClassSpec:
    """Generative parameters for one traffic type."""

    lengths: tuple[LengthComponent, ...]
    interarrival: tuple[RateComponent, ...]
    entropy: TruncNormal
    duration: TruncNormal
    markers: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(self.lengths))
        object.__setattr__(self, "interarrival", tuple(self.interarrival))
        if isinstance(self.markers, Mapping):
            object.__setattr__(self, "markers", tuple(self.markers.items()))
        else:
            object.__setattr__(self, "markers", tuple(tuple(m) for m in self.markers))
        _check(len(self.lengths) > 0, "lengths", "needs at least one component")
        _check(len(self.interarrival) > 0, "interarrival", "needs at least one component")
        _check(0.0 <= self.entropy.low and self.entropy.high <= MAX_ENTROPY,
               "entropy", "support must lie within [0, 8]")
        _check(self.duration.low >= 0, "duration", "support must be non-negative")
        _check(len(self.markers) > 0, "markers", "needs at least one marker")
        probs = [p for _, p in self.markers]
        _check(all(p >= 0 for p in probs), "markers", "probabilities must be non-negative")
        _check(abs(sum(probs) - 1.0) <= 1e-9, "markers", "probabilities must sum to 1")

    @property
    def marker_probs(self) -> dict[str, float]:
        return dict(self.markers)

    def sample_lengths(self, rng, n) -> np.ndarray:
        comp = self.lengths[_pick(rng, [c.weight for c in self.lengths])]
        return comp.sample(rng, n)

    def sample_gaps(self, rng, n) -> np.ndarray:
        comp = self.interarrival[_pick(rng, [c.weight for c in self.interarrival])]
        return comp.sample(rng, n)

    def sample_entropy(self, rng, n) -> np.ndarray:
        return self.entropy.sample(rng, n)

    def sample_duration(self, rng) -> float:
        return float(self.duration.sample(rng, 1)[0])

    def sample_marker(self, rng) -> str:
        names = [m for m, _ in self.markers]
        return names[_pick(rng, [p for _, p in self.markers])]


# --------------------------------------------------------------------------
# probes


class ProbeBehavior(str, enum.Enum):
    RESPOND_AS_TOOL = "respond-as-tool"
    RESPOND_AS_COVER = "respond-as-cover"
    SILENT = "silent"


@dataclass(frozen=True)
class ProbeSpec:
    """An active probe the censor may send to a flow's endpoint.

    ``initiation`` probes open the tool's own handshake and look for the
    tool's characteristic reply.  ``masquerade`` probes apply only to flows
    claiming the cover protocol and exercise an error path that the real cover
    protocol handles in a known way.
    """

    id: str
    kind: str = "initiation"
    cover_marker: str = COVER_MARKER
    false_alarm_rate: float = 0.0
    positive: str = "responds-as-tor"
    negative: str = "no-tor-response"

    NOT_APPLICABLE = "not-applicable"
    CONFORMANT = "cover-conformant"
    ANOMALOUS = "cover-anomalous"
    NO_RESPONSE = "no-response"

    def __post_init__(self):
        _check(self.kind in ("initiation", "masquerade"), "kind",
               "must be 'initiation' or 'masquerade'")
        _check(0.0 <= self.false_alarm_rate <= 1.0, "false_alarm_rate", "must lie in [0, 1]")

    def respond(self, marker: str, true_type: TrafficType, behavior: ProbeBehavior,
                rng: np.random.Generator) -> str:
        tool = true_type is TrafficType.DISALLOWED
        behavior = ProbeBehavior(behavior)
        if self.kind == "initiation":
            if tool and behavior is ProbeBehavior.RESPOND_AS_TOOL:
                return self.positive
            return self.positive if rng.random() < self.false_alarm_rate else self.negative
        if marker != self.cover_marker:
            return self.NOT_APPLICABLE
        if tool and behavior is ProbeBehavior.RESPOND_AS_TOOL:
            return self.ANOMALOUS
        if tool and behavior is ProbeBehavior.SILENT:
            return self.NO_RESPONSE
        return self.ANOMALOUS if rng.random() < self.false_alarm_rate else self.CONFORMANT


# --------------------------------------------------------------------------
# trace generation


@dataclass(frozen=True)
class TrafficSpec:
    n_flows: int
    disallowed_fraction: float
    allowed: ClassSpec
    disallowed: ClassSpec
    probes: tuple[ProbeSpec, ...] = ()
    packets_per_flow: int = 50
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "probes", tuple(self.probes))
        _check(isinstance(self.n_flows, (int, np.integer)) and self.n_flows > 0,
               "n_flows", "must be a positive integer")
        _check(0.0 < self.disallowed_fraction < 1.0, "disallowed_fraction",
               f"must lie in (0, 1), got {self.disallowed_fraction}")
        _check(self.packets_per_flow >= 2, "packets_per_flow", "must be at least 2")
        _check(0 <= self.seed < 2**64, "seed", "must be a 64-bit unsigned integer")
        ids = [p.id for p in self.probes]
        _check(len(ids) == len(set(ids)), "probes", "probe ids must be unique")

    @property
    def n_disallowed(self) -> int:
        return int(math.floor(self.n_flows * self.disallowed_fraction + 0.5))

    def class_spec(self, t: TrafficType) -> ClassSpec:
        return self.allowed if t is TrafficType.ALLOWED else self.disallowed

    def probe(self, probe_id: str) -> ProbeSpec:
        for p in self.probes:
            if p.id == probe_id:
                return p
        raise ConfigError("probe", f"unknown probe id {probe_id!r}")

    def with_seed(self, seed: int) -> "TrafficSpec":
        return TrafficSpec(self.n_flows, self.disallowed_fraction, self.allowed,
                           self.disallowed, self.probes, self.packets_per_flow, seed)


def flow_rng(seed: int, index: int, stream: int = 1) -> np.random.Generator:
    """Independent generator for one flow; ``stream`` separates purposes."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, index)))


def generate_flow(spec: TrafficSpec, index: int, true_type: TrafficType) -> Flow:
    rng = flow_rng(spec.seed, index)
    cls = spec.class_spec(true_type)
    n = spec.packets_per_flow
    lengths = cls.sample_lengths(rng, n)
    gaps = cls.sample_gaps(rng, n - 1)
    offsets = np.concatenate(([0.0], np.cumsum(gaps)))
    entropy = cls.sample_entropy(rng, n)
    duration = max(cls.sample_duration(rng), float(offsets[-1]))
    marker = cls.sample_marker(rng)
    responses = {
        p.id: p.respond(marker, true_type, ProbeBehavior.RESPOND_AS_TOOL, rng)
        for p in spec.probes
    }
    return Flow(index, lengths, offsets, entropy, duration, marker, responses, true_type)


def generate_traffic(spec: TrafficSpec) -> TrafficTrace:
    """Sample ``spec.n_flows`` flows; exactly ``spec.n_disallowed`` are disallowed."""
    label_rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(0,)))
    order = label_rng.permutation(spec.n_flows)
    disallowed = np.zeros(spec.n_flows, dtype=bool)
    disallowed[order[: spec.n_disallowed]] = True
    return TrafficTrace(
        generate_flow(spec, i, TrafficType.DISALLOWED if d else TrafficType.ALLOWED)
        for i, d in enumerate(disallowed)
    )


def apply_probe(flow: Flow, probe: str, probes=None, used: set | None = None) -> str:
    """Return the flow's recorded reply to ``probe``.

    ``probes`` is the scenario's probe set; an id outside it is a configuration
    error.  When ``used`` is given the probe id is added to it so operating
    cost can be charged for the probe measurement.
    """
    if probes is not None:
        known = {p.id if isinstance(p, ProbeSpec) else p for p in probes}
        if probe not in known:
            raise ConfigError("probe", f"unknown probe id {probe!r}")
    try:
        response = flow.probe_responses[probe]
    except KeyError:
        raise MeasurementUnavailable(f"flow {flow.flow_id} has no response to probe {probe!r}") from None
    if used is not None:
        used.add(probe)
    return response


def write_trace_jsonl(trace: TrafficTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for flow in trace:
            fh.write(json.dumps(flow.to_record(), separators=(",", ":")))
            fh.write("\n")


def read_trace_jsonl(path) -> TrafficTrace:
    with open(path, encoding="utf-8") as fh:
        return TrafficTrace(Flow.from_record(json.loads(line)) for line in fh if line.strip())
