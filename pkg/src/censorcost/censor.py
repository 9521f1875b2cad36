"""The censor: posterior estimation, expected-cost decisions, feature selection.

The posterior over traffic types is a discretized naive-Bayes model: every
feature gets an equal-width histogram (or a category table) per traffic type
with Laplace smoothing, and features are combined as if conditionally
independent.  Decisions pick the action with the lower expected cost under
that posterior; the cost actually incurred is looked up with the flow's
hidden true type.
"""
from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .economics import EconomyConfig, cycle_cost
from .errors import ConfigError, TrainingError
from .features import Feature, FeatureCatalog, feature_column
from .traffic import Flow, TrafficTrace, TrafficType

__all__ = [
    "Action", "CostMatrix", "LikelihoodTable", "PosteriorModel", "ConfusionReport",
    "Classification", "train_posterior", "posterior", "decide", "decide_many",
    "instance_cost", "classify_trace", "confusion", "select_feature_set",
    "SubsetEvaluator", "MAX_EXHAUSTIVE",
]

MAX_EXHAUSTIVE = 20
TYPES = (TrafficType.ALLOWED, TrafficType.DISALLOWED)


class Action(str, enum.Enum):
    ALLOW = "allow"
    DISALLOW = "disallow"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class CostMatrix:
    """Consequence cost c(type, action).

    A missed disallowed flow and a blocked allowed flow must both cost
    something; the two correct outcomes may be zero or negative (a reward).
    """

    disallowed_allow: float
    allowed_disallow: float
    allowed_allow: float = 0.0
    disallowed_disallow: float = 0.0

    def __post_init__(self):
        if not self.disallowed_allow > 0:
            raise ConfigError("cost_matrix.disallowed.allow", "false-negative cost must be positive")
        if not self.allowed_disallow > 0:
            raise ConfigError("cost_matrix.allowed.disallow", "false-positive cost must be positive")

    def c(self, t: TrafficType, a: Action) -> float:
        return getattr(self, f"{TrafficType(t).value}_{Action(a).value}")

    def as_array(self) -> np.ndarray:
        """Rows are (allowed, disallowed), columns (allow, disallow)."""
        return np.array([[self.allowed_allow, self.allowed_disallow],
                         [self.disallowed_allow, self.disallowed_disallow]], dtype=float)

    def scaled(self, k: float) -> "CostMatrix":
        return CostMatrix(self.disallowed_allow * k, self.allowed_disallow * k,
                          self.allowed_allow * k, self.disallowed_disallow * k)

    def to_dict(self) -> dict:
        return {
            "allowed": {"allow": self.allowed_allow, "disallow": self.allowed_disallow},
            "disallowed": {"allow": self.disallowed_allow, "disallow": self.disallowed_disallow},
        }


# --------------------------------------------------------------------------
# likelihood tables


@dataclass(frozen=True, eq=False)
class LikelihoodTable:
    """Smoothed P(bin | type) for one feature.

    Numeric features use ``edges`` (values outside are clamped to the edge
    bins).  Categorical features use ``categories`` plus one trailing slot for
    values never seen in training.
    """

    feature_id: str
    probs: np.ndarray
    edges: np.ndarray | None = None
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if (self.edges is None) == (self.categories is None):
            raise ValueError("a table has either bin edges or categories")
        if self.edges is not None:
            edges = np.array(self.edges, dtype=float)
            if np.any(np.diff(edges) <= 0):
                raise ValueError("bin edges must be strictly increasing")
            object.__setattr__(self, "edges", edges)
            nb = edges.size - 1
        else:
            object.__setattr__(self, "categories", tuple(self.categories))
            nb = len(self.categories) + 1
        if probs.shape != (2, nb):
            raise ValueError(f"table shape {probs.shape} does not match {nb} bins")
        if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("each likelihood row must sum to 1")

    @property
    def n_bins(self) -> int:
        return self.probs.shape[1]

    def bin_index(self, values) -> np.ndarray:
        if self.edges is not None:
            v = np.asarray(values, dtype=float)
            idx = np.searchsorted(self.edges, v, side="right") - 1
            return np.clip(idx, 0, self.n_bins - 1)
        lookup = {c: i for i, c in enumerate(self.categories)}
        unseen = len(self.categories)
        return np.array([lookup.get(v, unseen) for v in values], dtype=np.int64)

    def log_likelihood(self, values) -> np.ndarray:
        """(n, 2) array of log P(value | allowed), log P(value | disallowed)."""
        with np.errstate(divide="ignore"):
            return np.log(self.probs[:, self.bin_index(values)]).T

    @classmethod
    def fit(cls, feature: Feature, values, disallowed: np.ndarray, bins: int,
            alpha: float) -> "LikelihoodTable":
        if feature.categorical:
            categories = tuple(sorted(set(values)))
            edges = None
            lookup = {c: i for i, c in enumerate(categories)}
            idx = np.array([lookup[v] for v in values], dtype=np.int64)
            nb = len(categories) + 1
        else:
            v = np.asarray(values, dtype=float)
            lo, hi = float(v.min()), float(v.max())
            if not hi > lo:
                lo, hi = lo - 0.5, hi + 0.5
            edges = np.linspace(lo, hi, bins + 1)
            categories = None
            idx = np.clip(np.searchsorted(edges, v, side="right") - 1, 0, bins - 1)
            nb = bins
        probs = np.empty((2, nb))
        for row, mask in enumerate((~disallowed, disallowed)):
            counts = np.bincount(idx[mask], minlength=nb).astype(float)
            probs[row] = (counts + alpha) / (mask.sum() + alpha * nb)
        return cls(feature.id, probs, edges=edges, categories=categories)

    def to_dict(self) -> dict:
        d = {"feature": self.feature_id, "probs": self.probs.tolist()}
        if self.edges is not None:
            d["edges"] = self.edges.tolist()
        else:
            d["categories"] = list(self.categories)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "LikelihoodTable":
        return cls(d["feature"], d["probs"], edges=d.get("edges"), categories=d.get("categories"))


def _normalize(logp: np.ndarray) -> np.ndarray:
    """Row-wise softmax of log-scores; -inf entries become exact zeros."""
    top = logp.max(axis=-1, keepdims=True)
    w = np.exp(logp - top)
    return w / w.sum(axis=-1, keepdims=True)


def _log_prior(priors: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(priors)


@dataclass(frozen=True, eq=False)
class PosteriorModel:
    features: tuple[Feature, ...]
    tables: tuple[LikelihoodTable, ...]
    priors: np.ndarray
    alpha: float = 1.0
    bins: int = 16

    def __post_init__(self):
        order = sorted(range(len(self.features)), key=lambda i: self.features[i].id)
        object.__setattr__(self, "features", tuple(self.features[i] for i in order))
        object.__setattr__(self, "tables", tuple(self.tables[i] for i in order))
        priors = np.array(self.priors, dtype=float)
        if priors.shape != (2,) or np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-9:
            raise ValueError("priors must be two non-negative numbers summing to 1")
        object.__setattr__(self, "priors", priors)
        if self.alpha <= 0:
            raise ValueError("smoothing alpha must be positive")
        for f, t in zip(self.features, self.tables):
            if f.id != t.feature_id:
                raise ValueError(f"table for {t.feature_id} attached to feature {f.id}")

    @property
    def feature_set(self) -> frozenset[str]:
        return frozenset(f.id for f in self.features)

    def log_scores(self, trace: TrafficTrace) -> np.ndarray:
        logp = np.broadcast_to(_log_prior(self.priors), (len(trace), 2)).copy()
        for f, t in zip(self.features, self.tables):
            logp += t.log_likelihood(feature_column(f, trace))
        return logp

    def posterior_matrix(self, trace: TrafficTrace) -> np.ndarray:
        """(n, 2) posteriors; column 0 is allowed, column 1 disallowed."""
        return _normalize(self.log_scores(trace))

    def posterior(self, flow: Flow) -> dict[TrafficType, float]:
        p = self.posterior_matrix(TrafficTrace([flow]))[0]
        return {TrafficType.ALLOWED: float(p[0]), TrafficType.DISALLOWED: float(p[1])}

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "bins": self.bins,
            "priors": {"allowed": float(self.priors[0]), "disallowed": float(self.priors[1])},
            "features": [f.to_dict() for f in self.features],
            "tables": [t.to_dict() for t in self.tables],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "PosteriorModel":
        d = json.loads(text)
        feats = tuple(
            Feature(f["id"], f["extractor"], f["measurements"], f["level"],
                    f["store_bytes"], f["impl_loc"], f.get("params", {}))
            for f in d["features"]
        )
        tables = tuple(LikelihoodTable.from_dict(t) for t in d["tables"])
        priors = [d["priors"]["allowed"], d["priors"]["disallowed"]]
        return cls(feats, tables, priors, d["alpha"], d["bins"])


def _priors(disallowed: np.ndarray) -> np.ndarray:
    pd = disallowed.mean()
    return np.array([1.0 - pd, pd])


def train_posterior(training: TrafficTrace, features: Iterable[Feature], bins: int = 16,
                    alpha: float = 1.0) -> PosteriorModel:
    """Fit per-feature smoothed histograms and label-frequency priors."""
    features = tuple(features)
    if bins < 2:
        raise ConfigError("bins", "need at least two bins")
    if alpha <= 0:
        raise ConfigError("alpha", "smoothing must be positive")
    labels = training.is_disallowed()
    if labels.size == 0 or labels.all() or not labels.any():
        raise TrainingError("training traffic must contain both allowed and disallowed flows")
    tables = tuple(
        LikelihoodTable.fit(f, feature_column(f, training), labels, bins, alpha) for f in features
    )
    return PosteriorModel(features, tables, _priors(labels), alpha, bins)


def posterior(model: PosteriorModel, flow: Flow) -> dict[TrafficType, float]:
    return model.posterior(flow)


# --------------------------------------------------------------------------
# decisions and incurred cost


def _as_pair(post) -> tuple[float, float]:
    if isinstance(post, Mapping):
        return float(post[TrafficType.ALLOWED]), float(post[TrafficType.DISALLOWED])
    pa, pd = post
    return float(pa), float(pd)


def decide(post, cm: CostMatrix) -> Action:
    """Expected-cost-minimising action; an exact tie allows the flow."""
    pa, pd = _as_pair(post)
    allow = pa * cm.allowed_allow + pd * cm.disallowed_allow
    disallow = pa * cm.allowed_disallow + pd * cm.disallowed_disallow
    return Action.DISALLOW if disallow < allow else Action.ALLOW


def decide_many(post: np.ndarray, cm: CostMatrix) -> np.ndarray:
    """Vectorised :func:`decide`; True means disallow."""
    pa, pd = post[:, 0], post[:, 1]
    allow = pa * cm.allowed_allow + pd * cm.disallowed_allow
    disallow = pa * cm.allowed_disallow + pd * cm.disallowed_disallow
    return disallow < allow


def instance_cost(true_type: TrafficType, action: Action, cm: CostMatrix) -> float:
    return cm.c(true_type, action)


@dataclass(frozen=True)
class ConfusionReport:
    """Disallowed traffic is the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def fn_rate(self) -> float:
        pos = self.tp + self.fn
        return self.fn / pos if pos else 0.0

    @property
    def fp_rate(self) -> float:
        neg = self.fp + self.tn
        return self.fp / neg if neg else 0.0

    @property
    def balanced_error(self) -> float:
        return 0.5 * (self.fn_rate + self.fp_rate)

    def cost(self, cm: CostMatrix) -> float:
        return (self.tn * cm.allowed_allow + self.fp * cm.allowed_disallow
                + self.fn * cm.disallowed_allow + self.tp * cm.disallowed_disallow)

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
                "fn_rate": self.fn_rate, "fp_rate": self.fp_rate}


def confusion(disallow: np.ndarray, is_disallowed: np.ndarray) -> ConfusionReport:
    disallow = np.asarray(disallow, dtype=bool)
    truth = np.asarray(is_disallowed, dtype=bool)
    return ConfusionReport(
        tp=int(np.sum(disallow & truth)), fp=int(np.sum(disallow & ~truth)),
        tn=int(np.sum(~disallow & ~truth)), fn=int(np.sum(~disallow & truth)),
    )


@dataclass(frozen=True)
class Classification:
    actions: tuple[Action, ...]
    report: ConfusionReport
    total: float


def classify_trace(model: PosteriorModel, cm: CostMatrix, trace: TrafficTrace) -> Classification:
    disallow = decide_many(model.posterior_matrix(trace), cm)
    report = confusion(disallow, trace.is_disallowed())
    actions = tuple(Action.DISALLOW if d else Action.ALLOW for d in disallow)
    return Classification(actions, report, report.cost(cm))


# --------------------------------------------------------------------------
# feature-set selection


class SubsetEvaluator:
    """Classifies a trace under any subset of a feature pool.

    Naive-Bayes tables are per feature, so each is fitted once on ``fit`` and
    its log-likelihood column over ``apply`` is reused for every subset.  The
    arithmetic matches :class:`PosteriorModel` term for term.
    """

    def __init__(self, features: Iterable[Feature], fit: TrafficTrace, apply: TrafficTrace,
                 cm: CostMatrix, bins: int = 16, alpha: float = 1.0):
        self.model = train_posterior(fit, features, bins, alpha)
        self.cm = cm
        self.truth = apply.is_disallowed()
        self._base = np.broadcast_to(_log_prior(self.model.priors), (len(apply), 2))
        self._ll = {
            f.id: t.log_likelihood(feature_column(f, apply))
            for f, t in zip(self.model.features, self.model.tables)
        }
        self._memo: dict[frozenset, ConfusionReport] = {}

    def report(self, ids: Iterable[str]) -> ConfusionReport:
        key = frozenset(ids)
        rep = self._memo.get(key)
        if rep is None:
            logp = self._base.copy()
            for fid in sorted(key):
                logp += self._ll[fid]
            rep = confusion(decide_many(_normalize(logp), self.cm), self.truth)
            self._memo[key] = rep
        return rep

    def classification_cost(self, ids: Iterable[str]) -> float:
        return self.report(ids).cost(self.cm)


def _subsets(ids: Sequence[str]):
    for k in range(len(ids) + 1):
        yield from itertools.combinations(ids, k)


def select_feature_set(catalog: FeatureCatalog, prior_features: Iterable[str],
                       training: TrafficTrace, cm: CostMatrix, econ: EconomyConfig,
                       strategy: str = "exhaustive", bins: int = 16,
                       alpha: float = 1.0) -> frozenset[str]:
    """Feature set minimising estimated cycle cost on ``training``.

    The estimate is in-sample classification cost plus operating, storage and
    implementation cost relative to ``prior_features``.  Ties go to the
    smaller set, then the lexicographically first sorted id tuple.
    """
    if len(catalog) == 0:
        raise ConfigError("catalog", "catalog is empty")
    prior = frozenset(prior_features)
    ids = catalog.ids
    evaluator = SubsetEvaluator(catalog.features, training, training, cm, bins, alpha)

    def cost(subset) -> float:
        return cycle_cost(subset, prior, evaluator.classification_cost(subset), econ, catalog).total

    if strategy == "exhaustive":
        if len(ids) > MAX_EXHAUSTIVE:
            raise ConfigError("strategy", f"exhaustive search needs <= {MAX_EXHAUSTIVE} features, "
                                          f"catalog has {len(ids)}")
        best, best_cost = (), cost(())
        for subset in _subsets(ids):
            c = cost(subset)
            if c < best_cost - 1e-9:
                best, best_cost = subset, c
        return frozenset(best)

    if strategy == "greedy":
        current: tuple[str, ...] = ()
        current_cost = cost(current)
        while True:
            step, step_cost = None, current_cost
            for fid in ids:
                if fid in current:
                    continue
                c = cost(tuple(sorted(current + (fid,))))
                if c < step_cost - 1e-9:
                    step, step_cost = fid, c
            if step is None:
                return frozenset(current)
            current, current_cost = tuple(sorted(current + (step,))), step_cost

    raise ConfigError("strategy", f"unknown strategy {strategy!r}")
