"""Scenario files: schema validation, overrides, stock scenarios, round-trip.

A scenario file is YAML (JSON is accepted too) with the sections ``name``,
``seed``, ``traffic``, ``catalog``, ``economy``, ``cost_matrix``, ``tools``,
``schedule``, ``demand`` and ``run``.  Unknown keys are rejected and every
error names the dotted path of the offending field.
"""
from __future__ import annotations

import copy
import dataclasses
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

import yaml

from .armsrace import AccuracyDemand, Scenario
from .censor import CostMatrix
from .economics import EconomyConfig
from .errors import ConfigError
from .evader import FeatureTransform, Tool, tool_preset
from .features import Feature, FeatureCatalog, Measurement
from .traffic import (
    ClassSpec, LengthComponent, ProbeSpec, RateComponent, TrafficSpec, TruncNormal,
)

__all__ = [
    "STOCK_SCENARIOS", "stock_path", "read_config", "apply_overrides", "parse_scenario",
    "scenario_to_dict", "load_scenario",
]

STOCK_SCENARIOS = ("figure1-polymorphism", "figure2-steganography", "blacklist-poly-vs-steg",
                   "tool-reeval")


class _Section:
    """Typed access to one mapping of the config; remembers its dotted path."""

    def __init__(self, data, path: str):
        if not isinstance(data, Mapping):
            raise ConfigError(path or "<root>", "expected a mapping")
        self.data = data
        self.path = path
        self.seen: set[str] = set()

    def _p(self, key) -> str:
        return f"{self.path}.{key}" if self.path else str(key)

    def has(self, key) -> bool:
        return key in self.data

    def raw(self, key, default=...):
        self.seen.add(key)
        if key not in self.data:
            if default is ...:
                raise ConfigError(self._p(key), "required field is missing")
            return default
        return self.data[key]

    def number(self, key, default=..., integer=False):
        v = self.raw(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(self._p(key), f"expected a number, got {v!r}")
        if integer and (not isinstance(v, int) and not float(v).is_integer()):
            raise ConfigError(self._p(key), f"expected an integer, got {v!r}")
        return int(v) if integer else float(v)

    def string(self, key, default=...):
        v = self.raw(key, default)
        if not isinstance(v, str):
            raise ConfigError(self._p(key), f"expected a string, got {v!r}")
        return v

    def boolean(self, key, default=...):
        v = self.raw(key, default)
        if not isinstance(v, bool):
            raise ConfigError(self._p(key), f"expected true/false, got {v!r}")
        return v

    def section(self, key, default=...) -> "_Section":
        return _Section(self.raw(key, default), self._p(key))

    def items(self, key, default=...) -> list[tuple[str, Any]]:
        v = self.raw(key, default)
        if not isinstance(v, list):
            raise ConfigError(self._p(key), "expected a list")
        return [(f"{self._p(key)}[{i}]", x) for i, x in enumerate(v)]

    def done(self) -> None:
        extra = sorted(set(self.data) - self.seen, key=str)
        if extra:
            raise ConfigError(self._p(extra[0]), "unknown key")


def _build(path: str, ctor, *args, **kwargs):
    try:
        return ctor(*args, **kwargs)
    except ConfigError as e:
        field = e.field if e.field.startswith(path + ".") else f"{path}.{e.field}"
        raise ConfigError(field, e.message) from None
    except (TypeError, ValueError) as e:
        raise ConfigError(path, str(e)) from None


# --------------------------------------------------------------------------
# section parsers


def _trunc(sec: _Section) -> TruncNormal:
    out = _build(sec.path, TruncNormal, sec.number("mean"), sec.number("std"),
                 sec.number("low"), sec.number("high"))
    sec.done()
    return out


def _length_component(path, data) -> LengthComponent:
    sec = _Section(data, path)
    out = _build(path, LengthComponent, sec.number("weight", 1.0), sec.number("mean"),
                 sec.number("std"), sec.number("min", 1, integer=True),
                 sec.number("max", 1500, integer=True))
    sec.done()
    return out


def _rate_component(path, data) -> RateComponent:
    sec = _Section(data, path)
    out = _build(path, RateComponent, sec.number("weight", 1.0), sec.number("rate"))
    sec.done()
    return out


def _class_spec(sec: _Section) -> ClassSpec:
    lengths = [_length_component(p, d) for p, d in sec.items("lengths")]
    rates = [_rate_component(p, d) for p, d in sec.items("interarrival")]
    entropy = _trunc(sec.section("entropy"))
    duration = _trunc(sec.section("duration"))
    markers_sec = sec.section("markers")
    markers = {}
    for k in markers_sec.data:
        markers[str(k)] = markers_sec.number(k)
    markers_sec.done()
    out = _build(sec.path, ClassSpec, lengths, rates, entropy, duration, markers)
    sec.done()
    return out


def _probe(path, data) -> ProbeSpec:
    sec = _Section(data, path)
    kw = {"id": sec.string("id"), "kind": sec.string("kind", "initiation")}
    if sec.has("cover_marker"):
        kw["cover_marker"] = sec.string("cover_marker")
    if sec.has("false_alarm_rate"):
        kw["false_alarm_rate"] = sec.number("false_alarm_rate")
    if sec.has("positive"):
        kw["positive"] = sec.string("positive")
    if sec.has("negative"):
        kw["negative"] = sec.string("negative")
    sec.done()
    return _build(path, ProbeSpec, **kw)


def _traffic(sec: _Section, seed: int) -> TrafficSpec:
    out = _build(
        sec.path, TrafficSpec,
        n_flows=sec.number("n_flows", integer=True),
        disallowed_fraction=sec.number("disallowed_fraction"),
        allowed=_class_spec(sec.section("allowed")),
        disallowed=_class_spec(sec.section("disallowed")),
        probes=[_probe(p, d) for p, d in sec.items("probes", [])],
        packets_per_flow=sec.number("packets_per_flow", 50, integer=True),
        seed=seed,
    )
    sec.done()
    return out


def _catalog(sec: _Section) -> FeatureCatalog:
    meas = []
    for path, data in sec.items("measurements"):
        m = _Section(data, path)
        probe = m.string("probe", None) if m.has("probe") else None
        meas.append(_build(path, Measurement, m.string("id"), m.string("kind"), probe))
        m.done()
    feats = []
    for path, data in sec.items("features"):
        f = _Section(data, path)
        ms = f.raw("measurements")
        if not isinstance(ms, list) or not all(isinstance(x, str) for x in ms):
            raise ConfigError(f"{path}.measurements", "expected a list of measurement ids")
        params = f.raw("params", {})
        if not isinstance(params, Mapping):
            raise ConfigError(f"{path}.params", "expected a mapping")
        feats.append(_build(
            path, Feature, f.string("id"), f.string("extractor"), tuple(ms), f.string("level"),
            f.number("store_bytes", 0, integer=True), f.number("impl_loc", 0, integer=True),
            dict(params),
        ))
        f.done()
    sec.done()
    return FeatureCatalog(meas, feats)


def _economy(sec: _Section) -> EconomyConfig:
    op = sec.section("op_cost", {})
    op_cost = {str(k): op.number(k) for k in op.data}
    op.done()
    lm = sec.section("level_multipliers", {})
    mult = {str(k): lm.number(k) for k in lm.data}
    lm.done()
    out = EconomyConfig(op_cost, sec.number("store_rate", 0.0), sec.number("imp_rate", 0.0),
                        mult, sec.string("operating_on", "current"))
    sec.done()
    return out


def _cost_matrix(sec: _Section) -> CostMatrix:
    a = sec.section("allowed")
    d = sec.section("disallowed")
    kw = dict(
        allowed_allow=a.number("allow", 0.0), allowed_disallow=a.number("disallow"),
        disallowed_allow=d.number("allow"), disallowed_disallow=d.number("disallow", 0.0),
    )
    a.done()
    d.done()
    sec.done()
    return CostMatrix(**kw)


def _transform(path, data) -> FeatureTransform:
    sec = _Section(data, path)
    kw = {"target": sec.string("target"), "mode": sec.string("mode")}
    if sec.has("range"):
        r = sec.raw("range")
        if not (isinstance(r, list) and len(r) == 2):
            raise ConfigError(f"{path}.range", "expected [low, high]")
        kw["range"] = tuple(r)
    if sec.has("jitter"):
        kw["jitter"] = sec.number("jitter")
    if sec.has("variants"):
        v = sec.raw("variants")
        if isinstance(v, list) and kw["target"] == "lengths":
            v = [_length_component(f"{path}.variants[{i}]", x) for i, x in enumerate(v)]
        elif isinstance(v, list) and kw["target"] == "timings":
            v = [_rate_component(f"{path}.variants[{i}]", x) for i, x in enumerate(v)]
        kw["variants"] = v
    if sec.has("value"):
        kw["value"] = sec.string("value")
    sec.done()
    return _build(path, FeatureTransform, **kw)


def _tool(path, data) -> Tool:
    sec = _Section(data, path)
    tid = sec.string("id")
    if sec.has("preset"):
        tool = _build(path, tool_preset, sec.string("preset"), tid)
        sec.done()
        return tool
    transforms = [_transform(p, d) for p, d in sec.items("transforms", [])]
    pol = sec.section("probe_policy", {})
    policy = {str(k): pol.string(k) for k in pol.data}
    pol.done()
    default = sec.string("default_probe_behavior", "respond-as-tool")
    sec.done()
    return _build(path, Tool, tid, transforms, policy, default)


def parse_scenario(raw: Mapping) -> Scenario:
    root = _Section(raw, "")
    seed = root.number("seed", 0, integer=True)
    if seed < 0:
        raise ConfigError("seed", "must be non-negative")
    traffic = _traffic(root.section("traffic"), seed)
    catalog = _catalog(root.section("catalog"))
    econ = _economy(root.section("economy"))
    cm = _cost_matrix(root.section("cost_matrix"))

    tools: dict[str, Tool] = {}
    for path, data in root.items("tools"):
        t = _tool(path, data)
        if t.id in tools:
            raise ConfigError(f"{path}.id", f"duplicate tool id {t.id!r}")
        tools[t.id] = t
    schedule = []
    for path, tid in root.items("schedule"):
        if tid not in tools:
            raise ConfigError(path, f"unknown tool id {tid!r}")
        schedule.append(tools[tid])
    if not schedule:
        raise ConfigError("schedule", "tool schedule must not be empty")

    dm = root.section("demand", {})
    demand = _build("demand", AccuracyDemand, dm.number("max_fn_rate", 0.05),
                    dm.number("max_fp_rate", 0.05))
    dm.done()

    run = root.section("run", {})
    kw = dict(
        n_cycles=run.number("n_cycles", 1, integer=True),
        training_fraction=run.number("training_fraction", 0.5),
        strategy=run.string("strategy", "exhaustive"),
        bins=run.number("bins", 16, integer=True),
        alpha=run.number("alpha", 1.0),
        frozen_classifier=run.boolean("frozen_classifier", False),
        epsilon=run.number("epsilon", 0.05),
    )
    run.done()
    if kw["bins"] < 2:
        raise ConfigError("run.bins", "need at least two bins")
    if kw["alpha"] <= 0:
        raise ConfigError("run.alpha", "must be positive")
    if not 0 <= kw["epsilon"] < 0.5:
        raise ConfigError("run.epsilon", "must lie in [0, 0.5)")
    name = root.string("name", "scenario")
    root.done()
    return Scenario(traffic, catalog, cm, econ, tuple(schedule), seed=seed, tools=tools,
                    demand=demand, name=name, **kw)


# --------------------------------------------------------------------------
# serialisation


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {k: _plain(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _class_dict(c: ClassSpec) -> dict:
    return {
        "lengths": [_plain(x) for x in c.lengths],
        "interarrival": [_plain(x) for x in c.interarrival],
        "entropy": _plain(c.entropy),
        "duration": _plain(c.duration),
        "markers": dict(c.markers),
    }


def scenario_to_dict(s: Scenario) -> dict:
    """Fully resolved configuration; :func:`parse_scenario` inverts it."""
    t = s.traffic
    return {
        "name": s.name,
        "seed": s.seed,
        "traffic": {
            "n_flows": t.n_flows,
            "disallowed_fraction": t.disallowed_fraction,
            "packets_per_flow": t.packets_per_flow,
            "allowed": _class_dict(t.allowed),
            "disallowed": _class_dict(t.disallowed),
            "probes": [_plain(p) for p in t.probes],
        },
        "catalog": s.catalog.to_dict(),
        "economy": s.econ.to_dict(),
        "cost_matrix": s.cost_matrix.to_dict(),
        "tools": [_tool_dict(tool) for tool in s.tools.values()],
        "schedule": [tool.id for tool in s.tool_schedule],
        "demand": _plain(s.demand),
        "run": {
            "n_cycles": s.n_cycles,
            "training_fraction": s.training_fraction,
            "strategy": s.strategy,
            "bins": s.bins,
            "alpha": s.alpha,
            "frozen_classifier": s.frozen_classifier,
            "epsilon": s.epsilon,
        },
    }


def _tool_dict(tool: Tool) -> dict:
    d = tool.to_dict()
    for tr in d["transforms"]:
        if isinstance(tr.get("variants"), list):
            tr["variants"] = [_plain(v) for v in tr["variants"]]
    return d


# --------------------------------------------------------------------------
# files and overrides


def stock_path(name: str) -> Path:
    if name not in STOCK_SCENARIOS:
        raise ConfigError("scenario", f"unknown stock scenario {name!r}")
    return Path(str(resources.files("censorcost") / "scenarios" / f"{name}.yaml"))


def read_config(source) -> dict:
    """Raw mapping from a path or a stock scenario name."""
    path = Path(source)
    if not path.exists() and str(source) in STOCK_SCENARIOS:
        path = stock_path(str(source))
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError("scenario", f"cannot read {source}: {e.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError("scenario", f"not valid YAML/JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError("<root>", "scenario file must hold a mapping")
    return data


def apply_overrides(raw: Mapping, overrides: Iterable[str]) -> dict:
    """Apply ``dotted.path=value`` overrides; values are parsed as YAML scalars."""
    out = copy.deepcopy(dict(raw))
    for item in overrides:
        if "=" not in item:
            raise ConfigError("override", f"expected key=value, got {item!r}")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        value = yaml.safe_load(text)
        node = out
        for i, part in enumerate(parts[:-1]):
            where = ".".join(parts[: i + 1])
            if isinstance(node, list):
                node = node[_index(part, node, where)]
            else:
                node = node.setdefault(part, {})
            if not isinstance(node, (dict, list)):
                raise ConfigError(where, "cannot override inside a scalar")
        last = parts[-1]
        if isinstance(node, list):
            node[_index(last, node, key)] = value
        else:
            node[last] = value
    return out


def _index(part: str, node: list, where: str) -> int:
    try:
        i = int(part)
        node[i]
    except (ValueError, IndexError):
        raise ConfigError(where, "list index out of range") from None
    return i


def load_scenario(source, overrides: Iterable[str] = ()) -> Scenario:
    return parse_scenario(apply_overrides(read_config(source), overrides))
