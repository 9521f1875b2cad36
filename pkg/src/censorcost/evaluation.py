"""Scoring evasion tools by the cost they force on the censor.

A tool's score is the operating + storage + implementation cost of the
cheapest feature set whose classifier meets the censor's accuracy demand on
the tool's traffic.  Higher is better for the evader; a tool no catalog
subset can catch scores infinity.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .armsrace import AccuracyDemand, Scenario, cycle_seed
from .censor import ConfusionReport, SubsetEvaluator
from .economics import (
    CostBreakdown, feature_imp_cost, feature_set_cost, feature_store_cost, operating_cost,
)
from .errors import ConfigError
from .evader import Tool, transform_trace
from .traffic import TrafficTrace, generate_traffic

__all__ = [
    "AccuracyDemand", "ToolScore", "FeatureFlag", "evaluate_tool", "evaluate_split",
    "obfuscation_report", "obfuscation_flags", "compare_tools", "rank_scores",
    "evaluation_traffic", "enumerate_by_cost", "single_feature_errors",
]

EVAL_CYCLE = 0


@dataclass(frozen=True)
class FeatureFlag:
    feature_id: str
    cost: float
    baseline_error: float
    error: float
    obfuscated: bool


@dataclass(frozen=True)
class ToolScore:
    tool_id: str
    feasible: bool
    score: float
    feature_set: tuple[str, ...] | None
    breakdown: CostBreakdown | None
    report: ConfusionReport | None
    catalog_id: str
    demand: AccuracyDemand
    flags: tuple[FeatureFlag, ...] = ()

    @property
    def obfuscated(self) -> tuple[str, ...]:
        return tuple(f.feature_id for f in self.flags if f.obfuscated)

    def as_dict(self) -> dict:
        return {
            "tool": self.tool_id,
            "feasible": self.feasible,
            "score": self.score if self.feasible else None,
            "feature_set": list(self.feature_set) if self.feature_set is not None else None,
            "cost": self.breakdown.as_dict() if self.breakdown else None,
            "fn_rate": self.report.fn_rate if self.report else None,
            "fp_rate": self.report.fp_rate if self.report else None,
            "obfuscated_features": list(self.obfuscated),
            "catalog": self.catalog_id,
        }


def evaluation_traffic(s: Scenario, tool: Tool) -> tuple[TrafficTrace, TrafficTrace]:
    """Train/held-out split of the tool's traffic.

    Every tool transforms the same base sample, so scores within one scenario
    are compared on common ground.
    """
    spec = s.traffic.with_seed(cycle_seed(s.seed, EVAL_CYCLE))
    trace = transform_trace(tool, generate_traffic(spec), spec)
    return trace.split(s.training_fraction)


def enumerate_by_cost(catalog, econ) -> list[tuple[str, ...]]:
    """All subsets, cheapest first; ties go to smaller, then lexicographic sets."""
    ids = catalog.ids
    subsets = [c for k in range(len(ids) + 1) for c in itertools.combinations(ids, k)]
    return sorted(subsets, key=lambda fs: (round(feature_set_cost(fs, catalog, econ), 9),
                                           len(fs), fs))


def evaluate_split(tool_id: str, train: TrafficTrace, held: TrafficTrace, s: Scenario,
                   demand: AccuracyDemand | None = None) -> ToolScore:
    """Cheapest adequate feature set for traffic already split into train/held-out."""
    demand = s.demand if demand is None else demand
    if len(s.catalog) > 20:
        raise ConfigError("catalog", "tool evaluation enumerates subsets; use <= 20 features")
    ev = SubsetEvaluator(s.catalog.features, train, held, s.cost_matrix, s.bins, s.alpha)
    for fs in enumerate_by_cost(s.catalog, s.econ):
        rep = ev.report(fs)
        if demand.met_by(rep):
            cost = feature_set_cost(fs, s.catalog, s.econ)
            full = CostBreakdown(rep.cost(s.cost_matrix), *_parts(fs, s))
            return ToolScore(tool_id, True, cost, fs, full, rep, s.catalog.fingerprint, demand)
    return ToolScore(tool_id, False, math.inf, None, None, None, s.catalog.fingerprint, demand)


def _parts(fs, s: Scenario) -> tuple[float, float, float]:
    feats = s.catalog.resolve(fs)
    return (operating_cost(s.catalog.meas(fs), s.econ),
            sum(feature_store_cost(f, s.econ) for f in feats),
            sum(feature_imp_cost(f, (), s.econ) for f in feats))


def single_feature_errors(train: TrafficTrace, held: TrafficTrace, s: Scenario) -> dict[str, float]:
    """Balanced held-out error of the censor's classifier on each lone feature."""
    ev = SubsetEvaluator(s.catalog.features, train, held, s.cost_matrix, s.bins, s.alpha)
    return {fid: ev.report((fid,)).balanced_error for fid in s.catalog.ids}


def obfuscation_report(tool: Tool, s: Scenario, epsilon: float | None = None) -> tuple[FeatureFlag, ...]:
    """Per-feature obfuscation flags, sorted by the feature's surrogate cost.

    A feature is obfuscated when it separated the untransformed disallowed
    traffic (balanced error below ``0.5 - epsilon``) and the best single-feature
    classifier on the tool's traffic has balanced error of at least
    ``0.5 - epsilon``.
    """
    epsilon = s.epsilon if epsilon is None else epsilon
    base = single_feature_errors(*evaluation_traffic(s, Tool.identity()), s)
    now = single_feature_errors(*evaluation_traffic(s, tool), s)
    return obfuscation_flags(base, now, s, epsilon)


def obfuscation_flags(base: dict, now: dict, s: Scenario, epsilon: float) -> tuple[FeatureFlag, ...]:
    cut = 0.5 - epsilon
    flags = [
        FeatureFlag(fid, feature_set_cost((fid,), s.catalog, s.econ), base[fid], now[fid],
                    base[fid] < cut and now[fid] >= cut)
        for fid in s.catalog.ids
    ]
    return tuple(sorted(flags, key=lambda f: (round(f.cost, 9), f.feature_id)))


def evaluate_tool(tool: Tool, s: Scenario, demand: AccuracyDemand | None = None,
                  flags: bool = True) -> ToolScore:
    train, held = evaluation_traffic(s, tool)
    score = evaluate_split(tool.id, train, held, s, demand)
    if flags:
        base = single_feature_errors(*evaluation_traffic(s, Tool.identity()), s)
        now = single_feature_errors(train, held, s)
        score = _with_flags(score, obfuscation_flags(base, now, s, s.epsilon))
    return score


def _with_flags(score: ToolScore, flags) -> ToolScore:
    return ToolScore(score.tool_id, score.feasible, score.score, score.feature_set,
                     score.breakdown, score.report, score.catalog_id, score.demand, tuple(flags))


def rank_scores(scores: Iterable[ToolScore]) -> list[ToolScore]:
    """Best tool first: infeasible, then descending score, then tool id.

    Scores are only meaningful relative to one catalog and one demand, so
    mixing them is refused.
    """
    scores = list(scores)
    if len({sc.catalog_id for sc in scores}) > 1:
        raise ValueError("cannot rank scores computed against different feature catalogs")
    if len({sc.demand for sc in scores}) > 1:
        raise ValueError("cannot rank scores computed under different accuracy demands")
    return sorted(scores, key=lambda sc: (-sc.score, sc.tool_id))


def compare_tools(tools: Sequence[Tool], s: Scenario, demand: AccuracyDemand | None = None,
                  flags: bool = False) -> list[ToolScore]:
    if len(tools) < 2:
        raise ConfigError("tools", "comparison needs at least two tools")
    if flags:
        base = single_feature_errors(*evaluation_traffic(s, Tool.identity()), s)
    scores = []
    for tool in tools:
        train, held = evaluation_traffic(s, tool)
        sc = evaluate_split(tool.id, train, held, s, demand)
        if flags:
            sc = _with_flags(sc, obfuscation_flags(base, single_feature_errors(train, held, s),
                                                   s, s.epsilon))
        scores.append(sc)
    return rank_scores(scores)
