"""Runtime configuration (JSON file) and the shipped defaults."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

RESOURCES = Path(str(resources.files("qorch") / "resources"))


@dataclass
class Config:
    host: str = "127.0.0.1"
    port: int = 8750
    event_log: str | None = None
    devices: str = str(RESOURCES / "devices.json")
    tables: str = str(RESOURCES / "tables")
    definitions: str = str(RESOURCES / "definitions")
    references: str = str(RESOURCES / "references.json")
    qaoa: dict[str, Any] = field(default_factory=dict)
    max_qubits: int = 24
    default_shots: int = 1000
    decode_mode: str = "best_sampled"
    classical_cap: int = 20
    embed_workers: bool = False
    worker_lock_ms: int = 30_000
    worker_poll_ms: int = 1_000
    broker_url: str | None = None

    @classmethod
    def load(cls, path: str | Path | None = None, **overrides: Any) -> "Config":
        data: dict[str, Any] = {}
        if path is not None:
            data = json.loads(Path(path).read_text())
            base = Path(path).resolve().parent
            for key in ("event_log", "devices", "tables", "definitions", "references"):
                if data.get(key) and not Path(data[key]).is_absolute():
                    data[key] = str(base / data[key])
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    @property
    def base_url(self) -> str:
        return self.broker_url or f"http://{self.host}:{self.port}"
