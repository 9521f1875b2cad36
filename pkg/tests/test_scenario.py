import copy
import json

import pytest
import yaml

from censorcost.armsrace import run_scenario
from censorcost.errors import ConfigError
from censorcost.scenario import (
    STOCK_SCENARIOS, apply_overrides, load_scenario, parse_scenario, read_config,
    scenario_to_dict, stock_path,
)


@pytest.fixture(scope="module")
def raw():
    return read_config("blacklist-poly-vs-steg")


def error_field(raw_config):
    with pytest.raises(ConfigError) as exc:
        parse_scenario(raw_config)
    return exc.value.field


@pytest.mark.parametrize("name", STOCK_SCENARIOS)
def test_stock_scenarios_parse(name):
    s = load_scenario(name)
    assert s.name == name and stock_path(name).exists()
    assert len(s.catalog) <= 20


@pytest.mark.parametrize("name", STOCK_SCENARIOS)
def test_resolved_config_round_trips(name):
    s = load_scenario(name)
    d = scenario_to_dict(s)
    again = parse_scenario(json.loads(json.dumps(d)))
    assert scenario_to_dict(again) == d


def test_round_trip_gives_same_run():
    s = load_scenario("figure1-polymorphism", ["traffic.n_flows=400"])
    again = parse_scenario(json.loads(json.dumps(scenario_to_dict(s))))
    assert run_scenario(s) == run_scenario(again)


def test_missing_false_negative_cost(raw):
    bad = copy.deepcopy(raw)
    del bad["cost_matrix"]["disallowed"]["allow"]
    assert error_field(bad) == "cost_matrix.disallowed.allow"


@pytest.mark.parametrize("path,value,field", [
    (("traffic", "disallowed_fraction"), 1.5, "traffic.disallowed_fraction"),
    (("traffic", "n_flows"), "many", "traffic.n_flows"),
    (("cost_matrix", "allowed", "disallow"), 0, "cost_matrix.allowed.disallow"),
    (("economy", "store_rate"), -1, "economy.store_rate"),
    (("run", "strategy"), "random", "run.strategy"),
    (("run", "bins"), 1, "run.bins"),
    (("run", "frozen_classifier"), "yes", "run.frozen_classifier"),
    (("demand", "max_fn_rate"), 2, "demand.max_fn_rate"),
    (("seed",), -4, "seed"),
])
def test_bad_values_name_their_field(raw, path, value, field):
    bad = copy.deepcopy(raw)
    node = bad
    for key in path[:-1]:
        node = node[key]
    node[path[-1]] = value
    assert error_field(bad) == field


def test_unknown_keys_rejected(raw):
    bad = copy.deepcopy(raw)
    bad["traffic"]["allowed"]["colour"] = "blue"
    assert error_field(bad) == "traffic.allowed.colour"
    bad = copy.deepcopy(raw)
    bad["surprise"] = 1
    assert error_field(bad) == "surprise"


def test_nested_list_errors_carry_index(raw):
    bad = copy.deepcopy(raw)
    bad["catalog"]["features"][1]["level"] = "cosmic"
    assert error_field(bad) == "catalog.features[1].level"
    bad = copy.deepcopy(raw)
    bad["traffic"]["allowed"]["lengths"][2]["std"] = -3
    assert error_field(bad).startswith("traffic.allowed.lengths[2]")


def test_schedule_must_reference_declared_tools(raw):
    bad = copy.deepcopy(raw)
    bad["schedule"] = ["plain-tor", "ghost"]
    assert error_field(bad) == "schedule[1]"
    bad["schedule"] = []
    assert error_field(bad) == "schedule"


def test_duplicate_tool_ids(raw):
    bad = copy.deepcopy(raw)
    bad["tools"].append({"id": "plain-tor", "preset": "plain-tor-like"})
    assert error_field(bad) == "tools[3].id"


def test_unknown_preset(raw):
    bad = copy.deepcopy(raw)
    bad["tools"][0]["preset"] = "meek-like"
    assert error_field(bad) == "tools[0].preset"


def test_inline_tool(raw):
    cfg = copy.deepcopy(raw)
    cfg["tools"].append({"id": "custom", "transforms": [
        {"target": "lengths", "mode": "polymorphic", "variants": [{"mean": 300, "std": 10}]},
        {"target": "timings", "mode": "polymorphic", "variants": [{"rate": 4.0}]},
        {"target": "marker", "mode": "set-marker", "value": "none"},
    ], "probe_policy": {"cover-anomaly": "respond-as-cover"}, "default_probe_behavior": "silent"})
    tool = parse_scenario(cfg).tools["custom"]
    assert tool.transforms[0].variants[0].mean == 300
    assert tool.behavior("tor-handshake").value == "silent"


def test_overrides(raw):
    out = apply_overrides(raw, ["seed=9", "traffic.n_flows=50", "tools.0.id=renamed",
                                "run.frozen_classifier=true", "name=x"])
    assert out["seed"] == 9 and out["traffic"]["n_flows"] == 50
    assert out["tools"][0]["id"] == "renamed" and out["run"]["frozen_classifier"] is True
    assert raw["seed"] != 9  # input untouched


def test_override_errors(raw):
    with pytest.raises(ConfigError):
        apply_overrides(raw, ["no-equals-sign"])
    with pytest.raises(ConfigError):
        apply_overrides(raw, ["tools.9.id=x"])
    with pytest.raises(ConfigError):
        apply_overrides(raw, ["seed.deeper=1"])


def test_yaml_and_json_files(tmp_path, raw):
    y = tmp_path / "s.yaml"
    y.write_text(yaml.safe_dump(raw))
    j = tmp_path / "s.json"
    j.write_text(json.dumps(raw))
    assert scenario_to_dict(load_scenario(y)) == scenario_to_dict(load_scenario(j))


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        read_config(tmp_path / "absent.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [1, 2\n")
    with pytest.raises(ConfigError):
        read_config(bad)
    lst = tmp_path / "list.yaml"
    lst.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        read_config(lst)
