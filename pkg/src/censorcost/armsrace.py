"""Development-cycle loop between a censor and a scheduled sequence of tools."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .censor import (
    ConfusionReport, CostMatrix, PosteriorModel, classify_trace, select_feature_set,
    train_posterior,
)
from .economics import CostBreakdown, EconomyConfig, cycle_cost
from .errors import ConfigError
from .evader import Tool, transform_trace
from .features import FeatureCatalog
from .traffic import TrafficSpec, TrafficTrace, generate_traffic

__all__ = [
    "AccuracyDemand", "Scenario", "CensorState", "CycleReport", "run_cycle", "run_scenario",
    "cycle_seed", "cycle_traffic", "grand_total", "CSV_COLUMNS",
]

CSV_COLUMNS = ("cycle", "tool", "classification", "operating", "storage", "implementation",
               "total", "fn_rate", "fp_rate", "feature_set")


@dataclass(frozen=True)
class AccuracyDemand:
    """Highest false-negative and false-positive rates the censor tolerates."""

    max_fn_rate: float = 0.05
    max_fp_rate: float = 0.05

    def __post_init__(self):
        for name in ("max_fn_rate", "max_fp_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"demand.{name}", "must lie in [0, 1]")

    def met_by(self, report: ConfusionReport) -> bool:
        return report.fn_rate <= self.max_fn_rate and report.fp_rate <= self.max_fp_rate

    def looser(self, other: "AccuracyDemand") -> bool:
        return self.max_fn_rate >= other.max_fn_rate and self.max_fp_rate >= other.max_fp_rate


@dataclass(frozen=True)
class Scenario:
    traffic: TrafficSpec
    catalog: FeatureCatalog
    cost_matrix: CostMatrix
    econ: EconomyConfig
    tool_schedule: tuple[Tool, ...]
    n_cycles: int = 1
    training_fraction: float = 0.5
    strategy: str = "exhaustive"
    seed: int = 0
    bins: int = 16
    alpha: float = 1.0
    frozen_classifier: bool = False
    tools: Mapping[str, Tool] = field(default_factory=dict)
    demand: AccuracyDemand = field(default_factory=AccuracyDemand)
    epsilon: float = 0.05
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "tool_schedule", tuple(self.tool_schedule))
        if not self.tool_schedule:
            raise ConfigError("schedule", "tool schedule must not be empty")
        if self.n_cycles < 1:
            raise ConfigError("run.n_cycles", "need at least one cycle")
        if not 0.0 < self.training_fraction < 1.0:
            raise ConfigError("run.training_fraction", "must lie in (0, 1)")
        if self.strategy not in ("exhaustive", "greedy"):
            raise ConfigError("run.strategy", "must be 'exhaustive' or 'greedy'")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")
        registry = dict(self.tools)
        for t in self.tool_schedule:
            registry.setdefault(t.id, t)
        object.__setattr__(self, "tools", registry)

    def tool_for(self, cycle: int) -> Tool:
        """Tool active in 1-based ``cycle``; the last entry repeats."""
        return self.tool_schedule[min(cycle, len(self.tool_schedule)) - 1]

    def with_options(self, **changes) -> "Scenario":
        return replace(self, **changes)


def cycle_seed(seed: int, cycle: int) -> int:
    return int(np.random.SeedSequence([seed, cycle]).generate_state(1, np.uint64)[0])


def cycle_traffic(s: Scenario, cycle: int, tool: Tool | None = None) -> TrafficTrace:
    """Fresh traffic for ``cycle`` with the active (or given) tool applied."""
    spec = s.traffic.with_seed(cycle_seed(s.seed, cycle))
    tool = s.tool_for(cycle) if tool is None else tool
    return transform_trace(tool, generate_traffic(spec), spec)


@dataclass(frozen=True)
class CensorState:
    features: frozenset = frozenset()
    model: PosteriorModel | None = None
    last_tool: str | None = None


@dataclass(frozen=True)
class CycleReport:
    cycle: int
    tool: str
    feature_set: tuple[str, ...]
    breakdown: CostBreakdown
    confusion: ConfusionReport
    frozen: bool = False

    def row(self) -> dict:
        b = self.breakdown
        return {
            "cycle": self.cycle, "tool": self.tool,
            "classification": b.classification, "operating": b.operating,
            "storage": b.storage, "implementation": b.implementation, "total": b.total,
            "fn_rate": self.confusion.fn_rate, "fp_rate": self.confusion.fp_rate,
            "feature_set": ";".join(self.feature_set),
        }

    def as_dict(self) -> dict:
        return {
            "cycle": self.cycle, "tool": self.tool, "feature_set": list(self.feature_set),
            "frozen": self.frozen, "cost": self.breakdown.as_dict(),
            "confusion": self.confusion.as_dict(),
        }


def run_cycle(state: CensorState, s: Scenario, cycle: int) -> tuple[CycleReport, CensorState]:
    """One cycle: traffic, tool, split, (re)selection, classification, accounting.

    In frozen-classifier mode a cycle whose tool differs from the previous
    cycle's reuses the previous model unchanged; the censor responds in the
    following cycle.
    """
    tool = s.tool_for(cycle)
    trace = cycle_traffic(s, cycle, tool)
    train, held = trace.split(s.training_fraction)

    frozen = (s.frozen_classifier and state.model is not None
              and state.last_tool is not None and tool.id != state.last_tool)
    if frozen:
        model = state.model
        chosen = model.feature_set
    else:
        chosen = select_feature_set(s.catalog, state.features, train, s.cost_matrix, s.econ,
                                    s.strategy, s.bins, s.alpha)
        model = train_posterior(train, s.catalog.resolve(chosen), s.bins, s.alpha)

    result = classify_trace(model, s.cost_matrix, held)
    breakdown = cycle_cost(chosen, state.features, result.total, s.econ, s.catalog)
    report = CycleReport(cycle, tool.id, tuple(sorted(chosen)), breakdown, result.report, frozen)
    return report, CensorState(state.features | chosen, model, tool.id)


def run_scenario(s: Scenario) -> list[CycleReport]:
    state = CensorState()
    reports = []
    for cycle in range(1, s.n_cycles + 1):
        report, state = run_cycle(state, s, cycle)
        reports.append(report)
    return reports


def grand_total(reports: Sequence[CycleReport]) -> float:
    return float(sum(r.breakdown.total for r in reports))
