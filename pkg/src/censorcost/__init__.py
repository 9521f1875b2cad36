"""Simulating the economics of a censor versus censorship-evasion tools.

The censor classifies flows with a cost-sensitive naive-Bayes rule and pays,
each development cycle, for misclassification plus the operating, storage and
implementation cost of the features it uses.  Evasion tools are
transformations of disallowed flows; a tool is scored by the cheapest feature
set that still catches it.
"""
from .armsrace import (
    AccuracyDemand, CensorState, CycleReport, Scenario, cycle_traffic, grand_total, run_cycle,
    run_scenario,
)
from .censor import (
    Action, Classification, ConfusionReport, CostMatrix, PosteriorModel, classify_trace,
    confusion, decide, decide_many, instance_cost, posterior, select_feature_set,
    train_posterior,
)
from .economics import (
    CostBreakdown, EconomyConfig, cycle_cost, feature_imp_cost, feature_set_cost,
    feature_store_cost, operating_cost,
)
from .errors import CensorCostError, ConfigError, MeasurementUnavailable, TrainingError
from .evader import FeatureTransform, Tool, tool_preset, transform_flow, transform_trace
from .evaluation import (
    FeatureFlag, ToolScore, compare_tools, evaluate_tool, obfuscation_report, rank_scores,
)
from .features import Feature, FeatureCatalog, FeatureValue, Measurement, compute_feature
from .scenario import STOCK_SCENARIOS, load_scenario, parse_scenario, scenario_to_dict
from .traffic import (
    Flow, Packet, ProbeBehavior, ProbeSpec, TrafficSpec, TrafficTrace, TrafficType,
    apply_probe, generate_traffic,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyDemand", "Action", "CensorCostError", "CensorState", "Classification",
    "ConfigError", "ConfusionReport", "CostBreakdown", "CostMatrix", "CycleReport",
    "EconomyConfig", "Feature", "FeatureCatalog", "FeatureFlag", "FeatureTransform",
    "FeatureValue", "Flow", "Measurement", "MeasurementUnavailable", "Packet", "PosteriorModel",
    "ProbeBehavior", "ProbeSpec", "STOCK_SCENARIOS", "Scenario", "Tool", "ToolScore",
    "TrafficSpec", "TrafficTrace", "TrafficType", "TrainingError", "apply_probe",
    "classify_trace", "compare_tools", "compute_feature", "confusion", "cycle_cost",
    "cycle_traffic", "decide", "decide_many", "evaluate_tool", "feature_imp_cost",
    "feature_set_cost", "feature_store_cost", "generate_traffic", "grand_total",
    "instance_cost", "load_scenario", "obfuscation_report", "operating_cost", "parse_scenario",
    "posterior", "rank_scores", "run_cycle", "run_scenario", "scenario_to_dict",
    "select_feature_set", "tool_preset", "train_posterior", "transform_flow", "transform_trace",
]
