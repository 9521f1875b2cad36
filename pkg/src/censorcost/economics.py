"""Censor cost accounting for one development cycle.

The cycle total is the sum of four parts: the classification cost of the
cycle's decisions, the operating cost of every distinct measurement the
classifier needs, the storage cost of each feature, and a one-time
implementation cost for features the censor has not built before.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import ConfigError
from .features import FEATURE_LEVELS, Feature, FeatureCatalog

__all__ = [
    "DEFAULT_LEVEL_MULTIPLIERS", "EconomyConfig", "CostBreakdown",
    "feature_store_cost", "feature_imp_cost", "operating_cost", "cycle_cost",
    "feature_set_cost",
]

DEFAULT_LEVEL_MULTIPLIERS = {
    "packet-level": 1.0,
    "flow-distributional": 2.0,
    "stateful": 4.0,
    "probe": 1.0,
}


@dataclass(frozen=True)
class EconomyConfig:
    """Surrogate prices.

    ``op_cost`` maps measurement ids to a per-cycle price (missing ids cost
    nothing).  ``operating_on`` selects whether operating cost is charged on
    the measurements of the cycle's feature set (``"current"``) or of the
    previously used set (``"prior"``).
    """

    op_cost: Mapping[str, float] = field(default_factory=dict)
    store_rate: float = 0.0
    imp_rate: float = 0.0
    level_multipliers: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_LEVEL_MULTIPLIERS))
    operating_on: str = "current"

    def __post_init__(self):
        object.__setattr__(self, "op_cost", dict(self.op_cost))
        mult = dict(DEFAULT_LEVEL_MULTIPLIERS)
        mult.update(self.level_multipliers)
        object.__setattr__(self, "level_multipliers", mult)
        for mid, c in self.op_cost.items():
            if c < 0:
                raise ConfigError(f"economy.op_cost.{mid}", "must be non-negative")
        if self.store_rate < 0:
            raise ConfigError("economy.store_rate", "must be non-negative")
        if self.imp_rate < 0:
            raise ConfigError("economy.imp_rate", "must be non-negative")
        for level, m in mult.items():
            if level not in FEATURE_LEVELS:
                raise ConfigError(f"economy.level_multipliers.{level}", "unknown feature level")
            if m < 1:
                raise ConfigError(f"economy.level_multipliers.{level}", "must be >= 1")
        if not (mult["packet-level"] <= mult["flow-distributional"] <= mult["stateful"]):
            raise ConfigError(
                "economy.level_multipliers",
                "need packet-level <= flow-distributional <= stateful")
        if self.operating_on not in ("current", "prior"):
            raise ConfigError("economy.operating_on", "must be 'current' or 'prior'")

    def op(self, measurement_id: str) -> float:
        return float(self.op_cost.get(measurement_id, 0.0))

    def to_dict(self) -> dict:
        return {
            "op_cost": dict(self.op_cost),
            "store_rate": self.store_rate,
            "imp_rate": self.imp_rate,
            "level_multipliers": dict(self.level_multipliers),
            "operating_on": self.operating_on,
        }


@dataclass(frozen=True)
class CostBreakdown:
    classification: float
    operating: float
    storage: float
    implementation: float
    total: float = None

    def __post_init__(self):
        parts = self.classification + self.operating + self.storage + self.implementation
        if self.total is None:
            object.__setattr__(self, "total", parts)
        elif abs(self.total - parts) > 1e-9:
            raise ValueError("total does not equal the sum of its parts")

    @property
    def non_classification(self) -> float:
        return self.operating + self.storage + self.implementation

    def as_dict(self) -> dict:
        return {
            "classification": self.classification,
            "operating": self.operating,
            "storage": self.storage,
            "implementation": self.implementation,
            "total": self.total,
        }


def feature_store_cost(f: Feature, econ: EconomyConfig) -> float:
    return econ.store_rate * f.store_bytes * econ.level_multipliers[f.level]


def feature_imp_cost(f: Feature, prior: Iterable[str], econ: EconomyConfig) -> float:
    if f.id in set(prior):
        return 0.0
    return econ.imp_rate * f.impl_loc


def operating_cost(measurements: Iterable[str], econ: EconomyConfig) -> float:
    return sum(econ.op(m) for m in sorted(set(measurements)))


def cycle_cost(fs_new: Iterable[str], fs_prior: Iterable[str], classification_total: float,
               econ: EconomyConfig, catalog: FeatureCatalog) -> CostBreakdown:
    new = catalog.resolve(fs_new)
    prior_ids = {f.id for f in catalog.resolve(fs_prior)}
    charged = prior_ids if econ.operating_on == "prior" else {f.id for f in new}
    operating = operating_cost(catalog.meas(charged), econ)
    storage = sum(feature_store_cost(f, econ) for f in new)
    implementation = sum(feature_imp_cost(f, prior_ids, econ) for f in new)
    return CostBreakdown(float(classification_total), operating, storage, implementation)


def feature_set_cost(fs: Iterable[str], catalog: FeatureCatalog, econ: EconomyConfig,
                     prior: Iterable[str] = ()) -> float:
    """Operating + storage + implementation of running ``fs`` itself.

    Unlike :func:`cycle_cost` this always charges the measurements of ``fs``.
    """
    feats = catalog.resolve(fs)
    prior = set(prior)
    return (operating_cost(catalog.meas(f.id for f in feats), econ)
            + sum(feature_store_cost(f, econ) for f in feats)
            + sum(feature_imp_cost(f, prior, econ) for f in feats))
