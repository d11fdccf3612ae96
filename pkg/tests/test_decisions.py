import json

import pytest

from qorch.config import RESOURCES
from qorch.decisions import (
    DecisionError,
    DecisionRegistry,
    DecisionTable,
    NoCapableDevice,
    load_registry,
    select_device,
)
from qorch.domain import DeviceDescriptor


@pytest.fixture
def registry():
    reg = DecisionRegistry()
    reg.load_dir(RESOURCES / "tables")
    return reg


@pytest.fixture
def device_table(registry):
    return registry.get("device-selection")


def strategy(registry, kind, num_variables, hint="auto"):
    facts = {"strategy_hint": hint, "kind": kind, "num_variables": num_variables}
    return registry.evaluate("strategy-selection", facts)


def test_threshold_below(registry):
    assert strategy(registry, "schedule", 10)["strategy"] == "classical-brute-force"


def test_threshold_boundary(registry):
    assert strategy(registry, "schedule", 16) == {
        "strategy": "qaoa-pipeline",
        "strategy_definition": "scheduling-qaoa-pipeline",
    }
    assert strategy(registry, "knapsack", 16)["strategy_definition"] == "knapsack-qaoa-pipeline"


@pytest.mark.parametrize("hint, expected", [("qaoa", "qaoa-pipeline"), ("classical", "classical-brute-force")])
def test_hint_overrides_size(registry, hint, expected):
    assert strategy(registry, "knapsack", 6, hint)["strategy"] == expected
    assert strategy(registry, "knapsack", 20, hint)["strategy"] == expected


def test_ladder_picks_local_simulator(device_table):
    devices = load_registry(RESOURCES / "devices.json")
    assert select_device(devices, 10, 1000, device_table) == "local-sv-24"


def test_single_capable_device(device_table):
    assert select_device([DeviceDescriptor("sim", max_qubits=24)], 10, 1000, device_table) == "sim"


def test_no_capable_device(device_table):
    with pytest.raises(NoCapableDevice, match="no capable device"):
        select_device([DeviceDescriptor("sim", max_qubits=24)], 30, 1000, device_table)


def test_unavailable_skipped(device_table):
    devices = [DeviceDescriptor("down", available=False), DeviceDescriptor("up")]
    assert select_device(devices, 4, 100, device_table) == "up"


def test_first_hit_order_decides_between_capable_devices(device_table):
    devices = [DeviceDescriptor("pricey", cost_per_shot=1.0), DeviceDescriptor("cheap", cost_per_shot=0.1)]
    assert select_device(devices, 4, 100, device_table) == "pricey"
    # a table that only accepts cheap devices changes the outcome
    cheap_only = DecisionTable.from_dict({
        "id": "device-selection",
        "inputs": ["cost_per_shot"],
        "rules": [{"when": [{"op": "<", "value": 0.5}], "then": {"accept": True}}],
        "default": {"accept": False},
    })
    assert select_device(devices, 4, 100, cheap_only) == "cheap"


def test_table_cannot_override_capacity_floor():
    accept_all = DecisionTable.from_dict({"id": "t", "inputs": [], "rules": [], "default": {"accept": True}})
    with pytest.raises(NoCapableDevice):
        select_device([DeviceDescriptor("small", max_qubits=4)], 5, 10, accept_all)


def test_first_hit_policy():
    table = DecisionTable.from_dict({
        "id": "t",
        "inputs": ["x"],
        "rules": [
            {"when": [{"op": ">", "value": 5}], "then": {"band": "high"}},
            {"when": [{"op": ">", "value": 1}], "then": {"band": "mid"}},
            {"when": ["-"], "then": {"band": "low"}},
        ],
    })
    assert [table.evaluate({"x": x})["band"] for x in (9, 3, 0)] == ["high", "mid", "low"]


def test_fact_comparison_and_type_mismatch():
    table = DecisionTable.from_dict({
        "id": "t",
        "inputs": ["a", "b"],
        "rules": [{"when": [{"op": ">=", "fact": "b"}, "-"], "then": {"ok": True}}],
        "default": {"ok": False},
    })
    assert table.evaluate({"a": 3, "b": 2}) == {"ok": True}
    assert table.evaluate({"a": "x", "b": 2}) == {"ok": False}


def test_errors():
    table = DecisionTable.from_dict({"id": "t", "inputs": ["x"], "rules": [
        {"when": [{"op": "==", "value": 1}], "then": {}}]})
    with pytest.raises(DecisionError, match="missing fact"):
        table.evaluate({})
    with pytest.raises(DecisionError, match="no rule matched"):
        table.evaluate({"x": 2})
    with pytest.raises(ValueError, match="unknown operator"):
        DecisionTable.from_dict({"id": "t", "inputs": ["x"], "rules": [{"when": [{"op": "~", "value": 1}], "then": {}}]})
    with pytest.raises(ValueError, match="hit policy"):
        DecisionTable.from_dict({"id": "t", "inputs": [], "rules": [], "default": {}, "hit_policy": "ANY"})
    with pytest.raises(DecisionError):
        DecisionRegistry().get("nope")


def test_table_round_trip(registry):
    for table_id in registry.ids():
        table = registry.get(table_id)
        assert DecisionTable.from_dict(json.loads(json.dumps(table.to_dict()))) == table


def test_deterministic(registry):
    facts = {"strategy_hint": "auto", "kind": "knapsack", "num_variables": 9}
    assert registry.evaluate("strategy-selection", facts) == registry.evaluate("strategy-selection", facts)
