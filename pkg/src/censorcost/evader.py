"""Evasion tools as transformations of disallowed flows.

A tool is an ordered list of :class:`FeatureTransform` plus a policy saying
how its endpoints answer each active probe.  Transforms act on generator
attributes (packet lengths, interarrival gaps, payload entropy, connection
duration, handshake marker), never on derived features, so every feature the
censor might compute sees the change.

* ``polymorphic`` redraws the attribute per flow from a spread of variants:
  a uniform ``range`` or a list of ``variants`` (``"allowed"`` means the
  allowed class's own modes).
* ``steganographic`` redraws the attribute from the allowed class's
  generative distribution.
* ``set-marker`` stamps a fixed handshake marker.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError
from .traffic import (
    COVER_MARKER, NO_MARKER, TLS_TELLTALE, ClassSpec, Flow, LengthComponent,
    ProbeBehavior, RateComponent, TrafficSpec, TrafficTrace, TrafficType, flow_rng,
    sample_truncnorm,
)

__all__ = [
    "TARGETS", "MODES", "FeatureTransform", "Tool", "transform_flow", "transform_trace",
    "tool_preset", "PRESETS",
]

TARGETS = ("lengths", "timings", "entropy", "duration", "marker")
MODES = ("polymorphic", "steganographic", "set-marker")

TRANSFORM_STREAM = 2


@dataclass(frozen=True)
class FeatureTransform:
    target: str
    mode: str
    range: tuple[float, float] | None = None
    jitter: float | None = None
    variants: object = None
    value: str | None = None

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ConfigError("target", f"unknown transform target {self.target!r}")
        if self.mode not in MODES:
            raise ConfigError("mode", f"unknown transform mode {self.mode!r}")
        if self.mode == "set-marker":
            if self.target != "marker" or not self.value:
                raise ConfigError("value", "set-marker targets the marker and needs a value")
        if self.mode == "polymorphic":
            if (self.range is None) == (self.variants is None):
                raise ConfigError("range", "polymorphic transforms need exactly one of range/variants")
            if self.range is not None:
                if self.target == "marker":
                    raise ConfigError("range", "the marker is categorical; use variants")
                lo, hi = self.range
                object.__setattr__(self, "range", (float(lo), float(hi)))
                if not lo < hi:
                    raise ConfigError("range", "polymorphic range must be non-degenerate")
                if self.target == "entropy" and not (0 <= lo and hi <= 8):
                    raise ConfigError("range", "entropy range must lie within [0, 8]")
            if isinstance(self.variants, (list, tuple)):
                if not self.variants:
                    raise ConfigError("variants", "need at least one variant")
                object.__setattr__(self, "variants", tuple(self.variants))
                if self.target in ("entropy", "duration"):
                    raise ConfigError("variants", f"{self.target} only supports a range")
            elif self.variants is not None and self.variants != "allowed":
                raise ConfigError("variants", "must be a list or 'allowed'")

    def to_dict(self) -> dict:
        d = {"target": self.target, "mode": self.mode}
        if self.range is not None:
            d["range"] = list(self.range)
        if self.jitter is not None:
            d["jitter"] = self.jitter
        if self.variants is not None:
            if self.variants == "allowed":
                d["variants"] = "allowed"
            else:
                d["variants"] = [
                    v.__dict__.copy() if hasattr(v, "__dict__") else v for v in self.variants
                ]
        if self.value is not None:
            d["value"] = self.value
        return d


@dataclass(frozen=True)
class Tool:
    id: str
    transforms: tuple[FeatureTransform, ...] = ()
    probe_policy: Mapping[str, ProbeBehavior] = field(default_factory=dict)
    default_probe_behavior: ProbeBehavior = ProbeBehavior.RESPOND_AS_TOOL

    def __post_init__(self):
        object.__setattr__(self, "transforms", tuple(self.transforms))
        object.__setattr__(self, "probe_policy",
                           {k: ProbeBehavior(v) for k, v in dict(self.probe_policy).items()})
        object.__setattr__(self, "default_probe_behavior",
                           ProbeBehavior(self.default_probe_behavior))

    @classmethod
    def identity(cls, tool_id: str = "identity") -> "Tool":
        return cls(tool_id)

    @property
    def is_identity(self) -> bool:
        return (not self.transforms
                and self.default_probe_behavior is ProbeBehavior.RESPOND_AS_TOOL
                and all(b is ProbeBehavior.RESPOND_AS_TOOL for b in self.probe_policy.values()))

    def behavior(self, probe_id: str) -> ProbeBehavior:
        return self.probe_policy.get(probe_id, self.default_probe_behavior)

    def to_dict(self) -> dict:
        d = {"id": self.id, "transforms": [t.to_dict() for t in self.transforms]}
        if self.probe_policy:
            d["probe_policy"] = {k: v.value for k, v in sorted(self.probe_policy.items())}
        d["default_probe_behavior"] = self.default_probe_behavior.value
        return d


# --------------------------------------------------------------------------


def _length_variants(t: FeatureTransform, ref: ClassSpec):
    if t.variants == "allowed":
        return ref.lengths
    return tuple(v if isinstance(v, LengthComponent) else LengthComponent(**v) for v in t.variants)


def _rate_variants(t: FeatureTransform, ref: ClassSpec):
    if t.variants == "allowed":
        return ref.interarrival
    return tuple(v if isinstance(v, RateComponent) else RateComponent(**v) for v in t.variants)


def _apply(t: FeatureTransform, flow: Flow, ref: ClassSpec, rng: np.random.Generator) -> Flow:
    n = flow.lengths.size
    if t.target == "marker":
        if t.mode == "set-marker":
            return flow.replace(marker=t.value)
        if t.mode == "steganographic":
            return flow.replace(marker=ref.sample_marker(rng))
        choices = sorted(ref.marker_probs) if t.variants == "allowed" else list(t.variants)
        return flow.replace(marker=str(choices[int(rng.integers(len(choices)))]))

    if t.target == "lengths":
        if t.mode == "steganographic":
            lengths = ref.sample_lengths(rng, n)
        elif t.range is not None:
            lo, hi = t.range
            jitter = t.jitter if t.jitter is not None else (hi - lo) / 20.0
            center = rng.uniform(lo, hi)
            x = sample_truncnorm(rng, center, jitter, max(lo, 1.0), hi, n)
            lengths = np.clip(np.rint(x), 1, None).astype(np.int64)
        else:
            variants = _length_variants(t, ref)
            lengths = variants[int(rng.integers(len(variants)))].sample(rng, n)
        return flow.replace(lengths=lengths)

    if t.target == "timings":
        if t.mode == "steganographic":
            gaps = ref.sample_gaps(rng, n - 1)
        elif t.range is not None:
            mean_gap = rng.uniform(*t.range)
            gaps = rng.exponential(mean_gap, n - 1)
        else:
            variants = _rate_variants(t, ref)
            gaps = variants[int(rng.integers(len(variants)))].sample(rng, n - 1)
        offsets = np.concatenate(([0.0], np.cumsum(gaps)))
        return flow.replace(offsets=offsets, duration=max(flow.duration, float(offsets[-1])))

    if t.target == "entropy":
        if t.mode == "steganographic":
            entropy = ref.sample_entropy(rng, n)
        else:
            lo, hi = t.range
            jitter = t.jitter if t.jitter is not None else (hi - lo) / 20.0
            entropy = sample_truncnorm(rng, rng.uniform(lo, hi), jitter, lo, hi, n)
        return flow.replace(entropy=entropy)

    if t.target == "duration":
        if t.mode == "steganographic":
            d = ref.sample_duration(rng)
        else:
            d = rng.uniform(*t.range)
        return flow.replace(duration=max(d, float(flow.offsets[-1])))

    raise ConfigError("target", f"flow has no attribute {t.target!r}")


def transform_flow(tool: Tool, flow: Flow, allowed_ref: TrafficSpec,
                   rng: np.random.Generator) -> Flow:
    """Apply ``tool`` to one flow.  Allowed flows are returned untouched."""
    if flow.true_type is not TrafficType.DISALLOWED or tool.is_identity:
        return flow
    ref = allowed_ref.allowed
    out = flow
    for t in tool.transforms:
        out = _apply(t, out, ref, rng)
    responses = {}
    for pid in sorted(flow.probe_responses):
        probe = allowed_ref.probe(pid)
        responses[pid] = probe.respond(out.marker, TrafficType.DISALLOWED, tool.behavior(pid), rng)
    return out.replace(probe_responses=responses)


def transform_trace(tool: Tool, trace: TrafficTrace, spec: TrafficSpec,
                    seed: int | None = None) -> TrafficTrace:
    """Apply ``tool`` to every disallowed flow of ``trace``.

    Each flow gets its own stream keyed by ``(seed, flow_id)``; ``seed``
    defaults to ``spec.seed``.
    """
    seed = spec.seed if seed is None else seed
    if tool.is_identity:
        return trace
    return TrafficTrace(
        transform_flow(tool, f, spec, flow_rng(seed, f.flow_id, TRANSFORM_STREAM))
        if f.true_type is TrafficType.DISALLOWED else f
        for f in trace
    )


# --------------------------------------------------------------------------
# presets


def _plain_tor() -> Tool:
    return Tool("plain-tor-like", (FeatureTransform("marker", "set-marker", value=TLS_TELLTALE),))


def _scramblesuit() -> Tool:
    # no telltale handshake, polymorphic lengths and gaps over allowed modes,
    # and a password gate that keeps the endpoint silent to unauthenticated probes
    return Tool(
        "scramblesuit-like",
        (
            FeatureTransform("lengths", "polymorphic", variants="allowed"),
            FeatureTransform("timings", "polymorphic", variants="allowed"),
            FeatureTransform("marker", "set-marker", value=NO_MARKER),
        ),
        default_probe_behavior=ProbeBehavior.SILENT,
    )


def _skypemorph() -> Tool:
    return Tool(
        "skypemorph-like",
        (
            FeatureTransform("lengths", "steganographic"),
            FeatureTransform("timings", "steganographic"),
            FeatureTransform("marker", "set-marker", value=COVER_MARKER),
        ),
    )


def _stegotorus() -> Tool:
    return Tool(
        "stegotorus-like",
        (
            FeatureTransform("lengths", "steganographic"),
            FeatureTransform("timings", "steganographic"),
            FeatureTransform("entropy", "steganographic"),
            FeatureTransform("duration", "steganographic"),
            FeatureTransform("marker", "set-marker", value=COVER_MARKER),
        ),
    )


PRESETS = {
    "plain-tor-like": _plain_tor,
    "scramblesuit-like": _scramblesuit,
    "skypemorph-like": _skypemorph,
    "stegotorus-like": _stegotorus,
}


def tool_preset(name: str, tool_id: str | None = None) -> Tool:
    try:
        tool = PRESETS[name]()
    except KeyError:
        raise ConfigError("preset", f"unknown tool preset {name!r}; "
                                    f"choose from {sorted(PRESETS)}") from None
    if tool_id is not None and tool_id != tool.id:
        tool = Tool(tool_id, tool.transforms, tool.probe_policy, tool.default_probe_behavior)
    return tool
