"""Measurements, features and the extractors that compute them from flows."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, MeasurementUnavailable
from .traffic import Flow, TrafficTrace, apply_probe

__all__ = [
    "MEASUREMENT_KINDS", "FEATURE_LEVELS", "EXTRACTORS",
    "Measurement", "Feature", "FeatureValue", "FeatureCatalog",
    "compute_feature", "feature_column", "histogram_entropy",
]

MEASUREMENT_KINDS = (
    "per-packet-length",
    "per-packet-timing",
    "per-packet-entropy",
    "handshake-inspection",
    "active-probe",
)

FEATURE_LEVELS = ("packet-level", "flow-distributional", "stateful", "probe")


def histogram_entropy(values, bins: int, low: float, high: float) -> float:
    """Shannon entropy (bits) of the fixed-bin histogram of ``values``.

    Values outside ``[low, high]`` are counted in the nearest edge bin.
    """
    v = np.clip(np.asarray(values, dtype=float), low, high)
    counts, _ = np.histogram(v, bins=bins, range=(low, high))
    p = counts[counts > 0] / counts.sum()
    h = float(-(p * np.log2(p)).sum())
    return h if h > 0 else 0.0


def _length_entropy(flow: Flow, bins=16, low=1.0, high=1501.0):
    return histogram_entropy(flow.lengths, bins, low, high)


def _probe_response(flow: Flow, probe):
    return apply_probe(flow, probe)


@dataclass(frozen=True)
class _Extractor:
    fn: Callable
    measurement_kind: str
    categorical: bool = False


EXTRACTORS: dict[str, _Extractor] = {
    "mean-packet-length": _Extractor(lambda f: float(np.mean(f.lengths)), "per-packet-length"),
    "packet-length-stddev": _Extractor(lambda f: float(np.std(f.lengths)), "per-packet-length"),
    "first-packet-length": _Extractor(lambda f: float(f.lengths[0]), "per-packet-length"),
    "length-entropy": _Extractor(_length_entropy, "per-packet-length"),
    "mean-interarrival": _Extractor(lambda f: float(np.mean(f.gaps)) if f.gaps.size else 0.0,
                                    "per-packet-timing"),
    "interarrival-stddev": _Extractor(lambda f: float(np.std(f.gaps)) if f.gaps.size else 0.0,
                                      "per-packet-timing"),
    "connection-duration": _Extractor(lambda f: float(f.duration), "per-packet-timing"),
    "mean-payload-entropy": _Extractor(lambda f: float(np.mean(f.entropy)), "per-packet-entropy"),
    "first-payload-entropy": _Extractor(lambda f: float(f.entropy[0]), "per-packet-entropy"),
    "handshake-marker": _Extractor(lambda f: f.marker, "handshake-inspection", categorical=True),
    "probe-response": _Extractor(_probe_response, "active-probe", categorical=True),
}


@dataclass(frozen=True)
class Measurement:
    id: str
    kind: str
    probe: str | None = None

    def __post_init__(self):
        if self.kind not in MEASUREMENT_KINDS:
            raise ConfigError("kind", f"unknown measurement kind {self.kind!r}")
        if (self.kind == "active-probe") != (self.probe is not None):
            raise ConfigError("probe", "exactly the active-probe measurements name a probe")


@dataclass(frozen=True)
class Feature:
    """A censor feature and its cost surrogates.

    ``store_bytes`` and ``impl_loc`` are the storage and lines-of-code
    surrogates that :mod:`censorcost.economics` prices.
    """

    id: str
    extractor: str
    measurements: tuple[str, ...]
    level: str
    store_bytes: int = 0
    impl_loc: int = 0
    params: tuple[tuple[str, object], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "measurements", tuple(self.measurements))
        params = self.params.items() if isinstance(self.params, Mapping) else self.params
        object.__setattr__(self, "params", tuple(sorted((str(k), v) for k, v in params)))
        if self.extractor not in EXTRACTORS:
            raise ConfigError("extractor", f"unknown extractor {self.extractor!r}")
        if not self.measurements:
            raise ConfigError("measurements", "a feature needs at least one measurement")
        if self.level not in FEATURE_LEVELS:
            raise ConfigError("level", f"unknown feature level {self.level!r}")
        if self.store_bytes < 0 or self.impl_loc < 0:
            raise ConfigError("store_bytes", "surrogates must be non-negative")
        if self.extractor == "probe-response" and "probe" not in dict(self.params):
            raise ConfigError("params.probe", "probe features must name their probe")

    @property
    def categorical(self) -> bool:
        return EXTRACTORS[self.extractor].categorical

    @property
    def kwargs(self) -> dict:
        return dict(self.params)

    def to_dict(self) -> dict:
        d = {"id": self.id, "extractor": self.extractor, "measurements": list(self.measurements),
             "level": self.level, "store_bytes": self.store_bytes, "impl_loc": self.impl_loc}
        if self.params:
            d["params"] = dict(self.params)
        return d


@dataclass(frozen=True)
class FeatureValue:
    feature_id: str
    value: float | str

    def __post_init__(self):
        if not isinstance(self.value, str) and not math.isfinite(self.value):
            raise ValueError(f"feature {self.feature_id} produced a non-finite value")


def compute_feature(feature: Feature, flow: Flow) -> FeatureValue:
    ex = EXTRACTORS[feature.extractor]
    return FeatureValue(feature.id, ex.fn(flow, **feature.kwargs))


_COLUMN_CACHE_ATTR = "_feature_columns"


def feature_column(feature: Feature, trace: TrafficTrace) -> np.ndarray:
    """Values of ``feature`` for every flow in ``trace`` (cached per trace).

    Numeric features give a float array, categorical ones an array of str.
    """
    cache = trace.__dict__.setdefault(_COLUMN_CACHE_ATTR, {})
    col = cache.get(feature)
    if col is None:
        ex = EXTRACTORS[feature.extractor]
        kw = feature.kwargs
        if ex.categorical:
            col = np.array([ex.fn(f, **kw) for f in trace], dtype=object)
        else:
            col = np.fromiter((ex.fn(f, **kw) for f in trace), dtype=float, count=len(trace))
            if not np.all(np.isfinite(col)):
                raise ValueError(f"feature {feature.id} produced a non-finite value")
        col.setflags(write=False)
        cache[feature] = col
    return col


class FeatureCatalog:
    """The universe of measurements and features a censor can draw on."""

    def __init__(self, measurements: Iterable[Measurement], features: Iterable[Feature]):
        self.measurements = tuple(measurements)
        self.features = tuple(features)
        self._meas = {}
        for m in self.measurements:
            if m.id in self._meas:
                raise ConfigError("catalog.measurements", f"duplicate measurement id {m.id!r}")
            self._meas[m.id] = m
        self._feat = {}
        for i, f in enumerate(self.features):
            where = f"catalog.features[{i}]"
            if f.id in self._feat:
                raise ConfigError(where + ".id", f"duplicate feature id {f.id!r}")
            unknown = [m for m in f.measurements if m not in self._meas]
            if unknown:
                raise ConfigError(where + ".measurements", f"unknown measurement(s) {unknown}")
            need = EXTRACTORS[f.extractor].measurement_kind
            kinds = {self._meas[m].kind for m in f.measurements}
            if need not in kinds:
                raise ConfigError(where + ".measurements",
                                  f"extractor {f.extractor} needs a {need} measurement")
            if f.extractor == "probe-response":
                probe = f.kwargs["probe"]
                if not any(self._meas[m].probe == probe for m in f.measurements):
                    raise ConfigError(where + ".measurements",
                                      f"no measurement sends probe {probe!r}")
            self._feat[f.id] = f

    def __len__(self):
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def __contains__(self, fid):
        return fid in self._feat

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._feat))

    def feature(self, fid: str) -> Feature:
        try:
            return self._feat[fid]
        except KeyError:
            raise ConfigError("feature_set", f"feature {fid!r} is not in the catalog") from None

    def measurement(self, mid: str) -> Measurement:
        return self._meas[mid]

    def resolve(self, ids: Iterable[str]) -> tuple[Feature, ...]:
        """Features for ``ids`` in sorted-id order."""
        return tuple(self.feature(i) for i in sorted(set(ids)))

    def meas(self, ids: Iterable[str]) -> frozenset[str]:
        out = set()
        for i in ids:
            out.update(self.feature(i).measurements)
        return frozenset(out)

    def restrict(self, ids: Sequence[str]) -> "FeatureCatalog":
        feats = self.resolve(ids)
        used = {m for f in feats for m in f.measurements}
        return FeatureCatalog([m for m in self.measurements if m.id in used], feats)

    def extended(self, feature: Feature, measurements: Iterable[Measurement] = ()) -> "FeatureCatalog":
        have = {m.id for m in self.measurements}
        extra = [m for m in measurements if m.id not in have]
        return FeatureCatalog(self.measurements + tuple(extra), self.features + (feature,))

    def to_dict(self) -> dict:
        return {
            "measurements": [
                {"id": m.id, "kind": m.kind, **({"probe": m.probe} if m.probe else {})}
                for m in self.measurements
            ],
            "features": [
f.to_dict() for f in self.features
            ],
        }

    @property
    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
