"""Static configuration shared by every handler, and the failure signal."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

from ..decisions import DecisionTable
from ..domain import DEFAULT_MAX_QUBITS, DeviceDescriptor
from ..qaoa import QaoaConfig

DEFAULT_SHOTS = 1000

Handler = Callable[[dict[str, Any]], dict[str, Any]]


class JobFailure(Exception):
    """Fail the current job. ``retry=False`` skips the remaining retries."""

    def __init__(self, message: str, retry: bool = False):
        super().__init__(message)
        self.retry = retry


@dataclass
class ReferenceStore:
    """Read-only domain data looked up by the aggregation tasks."""

    agents: dict[str, str] = field(default_factory=dict)
    containers: dict[str, dict[str, Any]] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> "ReferenceStore":
        data = json.loads(Path(path).read_text())
        return cls(agents=data.get("agents", {}), containers=data.get("containers", {}))


@dataclass
class WorkerContext:
    devices: list[DeviceDescriptor]
    device_table: DecisionTable
    references: ReferenceStore = field(default_factory=ReferenceStore)
    qaoa: dict[str, Any] = field(default_factory=dict)
    max_qubits: int = DEFAULT_MAX_QUBITS
    default_shots: int = DEFAULT_SHOTS
    decode_mode: str = "best_sampled"
    classical_cap: int = 20

    def qaoa_config(self, payload: Mapping[str, Any]) -> QaoaConfig:
        merged = dict(self.qaoa)
        merged.update(payload.get("qaoa") or {})
        try:
            return QaoaConfig.from_dict(merged)
        except (TypeError, ValueError) as exc:
            raise JobFailure(f"bad qaoa config: {exc}") from None


def require(payload: Mapping[str, Any], *names: str) -> None:
    missing = [n for n in names if n not in payload]
    if missing:
        raise JobFailure(f"missing variable {missing[0]!r}")
