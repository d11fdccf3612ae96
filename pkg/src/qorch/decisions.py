"""FIRST-hit decision tables for device and strategy selection.

Table JSON::

    {
      "id": "strategy-selection",
      "hit_policy": "FIRST",
      "inputs": ["kind", "num_variables"],
      "rules": [
        {"when": [{"op": "==", "value": "schedule"}, {"op": "<", "value": 16}],
         "then": {"strategy": "classical-brute-force"}},
        {"when": ["-", "-"], "then": {"strategy": "qaoa-pipeline"}}
      ],
      "default": null
    }

A condition is ``"-"`` (wildcard), ``{"op": OP, "value": V}`` or
``{"op": OP, "fact": NAME}`` to compare against another fact.
"""

from __future__ import annotations

import json
import operator
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .domain import DeviceDescriptor

WILDCARD = "-"

_OPS = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "in": lambda a, b: a in b,
}


class DecisionError(LookupError):
    pass


class NoCapableDevice(DecisionError):
    pass


@dataclass(frozen=True)
class Condition:
    op: str
    value: Any = None
    fact: str | None = None

    def holds(self, actual: Any, facts: Mapping[str, Any]) -> bool:
        expected = facts[self.fact] if self.fact is not None else self.value
        try:
            return bool(_OPS[self.op](actual, expected))
        except TypeError:
            return False

    def to_dict(self) -> dict[str, Any]:
        if self.fact is not None:
            return {"op": self.op, "fact": self.fact}
        return {"op": self.op, "value": self.value}


@dataclass(frozen=True)
class Rule:
    conditions: tuple[Condition | None, ...]
    output: Mapping[str, Any]


@dataclass(frozen=True)
class DecisionTable:
    id: str
    inputs: tuple[str, ...]
    rules: tuple[Rule, ...]
    default_output: Mapping[str, Any] | None = None
    hit_policy: str = "FIRST"

    def __post_init__(self):
        if self.hit_policy != "FIRST":
            raise ValueError(f"unsupported hit policy {self.hit_policy!r}")
        if not self.rules and self.default_output is None:
            raise ValueError(f"table {self.id!r} needs a rule or a default")
        for k, rule in enumerate(self.rules):
            if len(rule.conditions) != len(self.inputs):
                raise ValueError(
                    f"table {self.id!r} rule {k}: expected {len(self.inputs)} conditions"
                )
            for cond in rule.conditions:
                if cond is None:
                    continue
                if cond.op not in _OPS:
                    raise ValueError(f"table {self.id!r} rule {k}: unknown operator {cond.op!r}")
                if cond.fact is not None and cond.fact not in self.inputs:
                    raise ValueError(f"table {self.id!r} rule {k}: unknown fact {cond.fact!r}")

    def evaluate(self, facts: Mapping[str, Any]) -> dict[str, Any]:
        missing = [name for name in self.inputs if name not in facts]
        if missing:
            raise DecisionError(f"table {self.id!r}: missing fact {missing[0]!r}")
        for rule in self.rules:
            if all(
                cond is None or cond.holds(facts[name], facts)
                for name, cond in zip(self.inputs, rule.conditions)
            ):
                return dict(rule.output)
        if self.default_output is not None:
            return dict(self.default_output)
        raise DecisionError(f"table {self.id!r}: no rule matched")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DecisionTable":
        def cond(raw: Any) -> Condition | None:
            if raw is None or raw == WILDCARD:
                return None
            return Condition(raw["op"], raw.get("value"), raw.get("fact"))

        inputs = tuple(i if isinstance(i, str) else i["name"] for i in data["inputs"])
        rules = tuple(
            Rule(tuple(cond(c) for c in r["when"]), dict(r["then"])) for r in data["rules"]
        )
        return cls(
            id=data["id"],
            inputs=inputs,
            rules=rules,
            default_output=data.get("default"),
            hit_policy=data.get("hit_policy", "FIRST"),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "hit_policy": self.hit_policy,
            "inputs": list(self.inputs),
            "rules": [
                {
                    "when": [WILDCARD if c is None else c.to_dict() for c in r.conditions],
                    "then": dict(r.output),
                }
                for r in self.rules
            ],
            "default": self.default_output,
        }


class DecisionRegistry:
    """Named tables, swappable at runtime."""

    def __init__(self, tables: Iterable[DecisionTable] = ()):
        self._lock = threading.Lock()
        self._tables: dict[str, DecisionTable] = {t.id: t for t in tables}

    def put(self, table: DecisionTable) -> None:
        with self._lock:
            self._tables[table.id] = table

    def get(self, table_id: str) -> DecisionTable:
        with self._lock:
            try:
                return self._tables[table_id]
            except KeyError:
                raise DecisionError(f"unknown decision table {table_id!r}") from None

    def evaluate(self, table_id: str, facts: Mapping[str, Any]) -> dict[str, Any]:
        return self.get(table_id).evaluate(facts)

    def load_dir(self, path: str | Path) -> None:
        for file in sorted(Path(path).glob("*.json")):
            self.put(DecisionTable.from_dict(json.loads(file.read_text())))

    def ids(self) -> list[str]:
        with self._lock:
            return sorted(self._tables)


def select_device(
    registry: Sequence[DeviceDescriptor],
    required_qubits: int,
    shots: int,
    table: DecisionTable,
) -> str:
    """Id of the first registry entry the device table accepts."""
    if not registry:
        raise NoCapableDevice("empty device registry")
    for device in registry:
        facts = {
            "device_id": device.id,
            "max_qubits": device.max_qubits,
            "available": device.available,
            "cost_per_shot": device.cost_per_shot,
            "required_qubits": required_qubits,
            "shots": shots,
        }
        verdict = table.evaluate(facts)
        # hard floor regardless of how the table is written
        if (
            verdict.get("accept")
            and device.available
            and device.max_qubits >= required_qubits
        ):
            return device.id
    raise NoCapableDevice(f"no capable device for required_qubits={required_qubits}")


def load_registry(path: str | Path) -> list[DeviceDescriptor]:
    data = json.loads(Path(path).read_text())
    return [DeviceDescriptor.from_dict(d) for d in data["devices"]]
