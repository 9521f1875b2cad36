import math

import numpy as np
import pytest

from censorcost.armsrace import AccuracyDemand
from censorcost.errors import ConfigError
from censorcost.evader import Tool, tool_preset
from censorcost.evaluation import (
    ToolScore, compare_tools, enumerate_by_cost, evaluate_split, evaluate_tool,
    evaluation_traffic, obfuscation_report, rank_scores,
)
from censorcost.features import Feature
from censorcost.scenario import load_scenario

from conftest import brute_force_score, hand_cost, world_scenario

STRICT = AccuracyDemand(0.05, 0.05)
VACUOUS = AccuracyDemand(1.0, 1.0)


@pytest.fixture(scope="module")
def reeval():
    return load_scenario("tool-reeval", ["traffic.n_flows=1000"])


@pytest.fixture(scope="module")
def probe_free(reeval):
    ids = [f for f in reeval.catalog.ids if f != "cover-anomaly"]
    return reeval.with_options(catalog=reeval.catalog.restrict(ids))


def test_plain_tor_scores_the_handshake(reeval):
    sc = evaluate_tool(tool_preset("plain-tor-like"), reeval, STRICT, flags=False)
    assert sc.feasible and sc.feature_set == ("handshake",)
    assert sc.score == pytest.approx(hand_cost(("handshake",), reeval.catalog, reeval.econ))
    train, held = evaluation_traffic(reeval, tool_preset("plain-tor-like"))
    assert brute_force_score(train, held, reeval, STRICT)[0] == ("handshake",)


def test_scramblesuit_costlier_than_plain_tor(probe_free):
    plain = evaluate_tool(tool_preset("plain-tor-like"), probe_free, STRICT, flags=False)
    scramble = evaluate_tool(tool_preset("scramblesuit-like"), probe_free, STRICT, flags=False)
    assert (not scramble.feasible) or scramble.score > plain.score


def test_vacuous_demand_scores_zero(reeval):
    for name in ("plain-tor-like", "stegotorus-like"):
        sc = evaluate_tool(tool_preset(name), reeval, VACUOUS, flags=False)
        assert sc.feature_set == () and sc.score == 0.0


def test_infeasible_tool_is_marked(reeval):
    cat = reeval.catalog.restrict(["handshake"])
    sc = evaluate_tool(tool_preset("stegotorus-like"), reeval.with_options(catalog=cat), STRICT, flags=False)
    assert not sc.feasible and math.isinf(sc.score) and sc.feature_set is None
    assert sc.as_dict()["score"] is None


def flagged(s, name):
    return {f.feature_id for f in obfuscation_report(tool_preset(name), s) if f.obfuscated}


def test_scramblesuit_obfuscation_flags(reeval):
    assert flagged(reeval, "scramblesuit-like") == {"handshake", "lengths", "timings"}


def test_skypemorph_obfuscation_flags(reeval):
    assert flagged(reeval, "skypemorph-like") == {"handshake", "lengths", "timings"}


def test_identity_obfuscates_nothing(reeval):
    assert not any(f.obfuscated for f in obfuscation_report(Tool.identity(), reeval))


def test_flags_sorted_by_cost(reeval):
    flags = obfuscation_report(tool_preset("stegotorus-like"), reeval)
    costs = [f.cost for f in flags]
    assert costs == sorted(costs)
    assert len(flags) == len(reeval.catalog)


def test_scramblesuit_beats_plain_tor_without_probes(probe_free):
    ranked = compare_tools([tool_preset("plain-tor-like"), tool_preset("scramblesuit-like")], probe_free, STRICT)
    assert [r.tool_id for r in ranked] == ["scramblesuit-like", "plain-tor-like"]


def test_polymorphism_beats_steganography_with_cover_probe():
    s = load_scenario("blacklist-poly-vs-steg")
    ranked = compare_tools([s.tools["steganographic"], s.tools["polymorphic"]], s)
    assert ranked[0].tool_id == "polymorphic" and ranked[0].score > ranked[1].score


def test_tool_compared_with_itself(reeval):
    ranked = compare_tools([tool_preset("skypemorph-like", "b"), tool_preset("skypemorph-like", "a")],
                           reeval, STRICT)
    assert [r.tool_id for r in ranked] == ["a", "b"]
    assert ranked[0].score == ranked[1].score


def test_compare_needs_two_tools(reeval):
    with pytest.raises(ConfigError):
        compare_tools([tool_preset("plain-tor-like")], reeval)


def _score(tool_id, score, catalog="c", demand=STRICT):
    return ToolScore(tool_id, math.isfinite(score), score, (), None, None, catalog, demand)


def test_ranking_rules():
    ranked = rank_scores([_score("b", 3.0), _score("a", 3.0), _score("z", math.inf), _score("c", 9.0)])
    assert [r.tool_id for r in ranked] == ["z", "c", "a", "b"]


def test_ranking_refuses_mixed_catalogs_or_demands():
    with pytest.raises(ValueError):
        rank_scores([_score("a", 1.0, catalog="x"), _score("b", 2.0, catalog="y")])
    with pytest.raises(ValueError):
        rank_scores([_score("a", 1.0), _score("b", 2.0, demand=VACUOUS)])


def test_enumeration_is_cost_ordered(reeval):
    order = enumerate_by_cost(reeval.catalog, reeval.econ)
    keys = [(round(hand_cost(fs, reeval.catalog, reeval.econ), 9), len(fs), fs) for fs in order]
    assert keys == sorted(keys) and len(order) == 2 ** len(reeval.catalog)


def test_oversized_catalog_rejected(reeval):
    cat = reeval.catalog
    for i in range(21 - len(cat)):
        cat = cat.extended(Feature(f"x{i:02d}", "first-packet-length", ("pkt-length",), "packet-level"))
    train, held = evaluation_traffic(reeval, Tool.identity())
    with pytest.raises(ConfigError):
        evaluate_split("t", train, held, reeval.with_options(catalog=cat))


@pytest.mark.parametrize("seed", range(5))
def test_matches_brute_force(seed):
    s = world_scenario(seed)
    tool = s.tool_schedule[0]
    sc = evaluate_tool(tool, s, flags=False)
    oracle = brute_force_score(*evaluation_traffic(s, tool), s, s.demand)
    if oracle is None:
        assert not sc.feasible
    else:
        assert sc.feature_set == oracle[0]
        assert sc.score == pytest.approx(oracle[1], abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_catalog_and_demand_monotonicity(seed):
    s = world_scenario(seed)
    tool = s.tool_schedule[0]
    rng = np.random.default_rng(seed)
    drop = str(rng.choice(s.catalog.ids))
    smaller = s.with_options(catalog=s.catalog.restrict([f for f in s.catalog.ids if f != drop]))
    assert evaluate_tool(tool, s, flags=False).score <= evaluate_tool(tool, smaller, flags=False).score
    looser = AccuracyDemand(min(1.0, s.demand.max_fn_rate + 0.1), min(1.0, s.demand.max_fp_rate + 0.1))
    assert looser.looser(s.demand)
    assert evaluate_tool(tool, s, looser, flags=False).score <= evaluate_tool(tool, s, flags=False).score


def test_demand_validation():
    with pytest.raises(ConfigError):
        AccuracyDemand(1.5, 0.1)
