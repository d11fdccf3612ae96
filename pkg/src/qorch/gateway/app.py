"""In-process assembly of engine, broker, decision tables and worker handlers,
plus the gateway operations (submit, status, result) the HTTP layer exposes."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Iterable, Mapping

from ..broker import JobBroker
from ..config import Config
from ..decisions import DecisionRegistry, load_registry
from ..engine import (
    COMPLETED,
    RUNNING,
    ProcessDefinition,
    ProcessEngine,
    UnknownDefinition,
    UnknownInstance,
)
from ..workers.context import ReferenceStore, WorkerContext
from ..workers.handlers import build_handlers
from ..workers.harness import LocalTransport, Worker

log = logging.getLogger(__name__)

ENTRY_DEFINITION = "strategy-decision"
PROBLEM_KINDS = ("schedule", "knapsack")


class GatewayError(Exception):
    def __init__(self, status: int, message: str, **extra: Any):
        super().__init__(message)
        self.status = status
        self.message = message
        self.extra = extra


class Platform:
    def __init__(self, config: Config | None = None, clock=None):
        self.config = config or Config()
        self.broker = JobBroker(clock)
        self.decisions = DecisionRegistry()
        self.decisions.load_dir(self.config.tables)
        self.devices = load_registry(self.config.devices)
        self.engine = ProcessEngine(self.broker, self.decisions, self.config.event_log)
        self.context = WorkerContext(
            devices=self.devices,
            device_table=self.decisions.get("device-selection"),
            references=ReferenceStore.load(self.config.references),
            qaoa=dict(self.config.qaoa),
            max_qubits=self.config.max_qubits,
            default_shots=self.config.default_shots,
            decode_mode=self.config.decode_mode,
            classical_cap=self.config.classical_cap,
        )
        self.handlers = build_handlers(self.context)
        self.deploy_directory(self.config.definitions)

    # -- deployment -------------------------------------------------------

    def deploy_directory(self, path: str | Path) -> dict[str, int]:
        """Deploy every definition file whose content differs from the latest version."""
        versions = {}
        for file in sorted(Path(path).glob("*.json")):
            definition = ProcessDefinition.from_dict(json.loads(file.read_text()))
            try:
                current = self.engine.definition(definition.id)
            except UnknownDefinition:
                current = None
            if current is not None and current.tasks == definition.tasks:
                versions[definition.id] = current.version
                continue
            versions[definition.id] = self.engine.deploy(definition)
        return versions

    # -- local workers ----------------------------------------------------

    def local_workers(self, job_types: Iterable[str] | None = None, **kwargs: Any) -> list[Worker]:
        transport = LocalTransport(self.broker)
        types = list(job_types) if job_types is not None else sorted(self.handlers)
        return [Worker(transport, t, self.handlers[t], **kwargs) for t in types]

    def run_until_settled(self, instance_id: str, workers: list[Worker] | None = None, max_rounds: int = 10_000) -> dict:
        """Drive local workers synchronously until the instance leaves 'running'."""
        workers = workers if workers is not None else self.local_workers()
        for _ in range(max_rounds):
            if self.engine.instance(instance_id).status != RUNNING:
                break
            if sum(w.poll_once() for w in workers) == 0:
                break
        return self.status(instance_id)

    # -- gateway operations -----------------------------------------------

    def submit(self, request: Any) -> str:
        if not isinstance(request, Mapping):
            raise GatewayError(400, "request body must be a JSON object")
        kind = request.get("kind")
        if kind not in PROBLEM_KINDS:
            raise GatewayError(400, f"unknown kind {kind!r}")
        if not isinstance(request.get("payload"), Mapping):
            raise GatewayError(400, "request needs a 'payload' object")
        return self.engine.create_instance(ENTRY_DEFINITION, dict(request))

    def _instance(self, instance_id: str):
        try:
            return self.engine.instance(instance_id)
        except UnknownInstance:
            raise GatewayError(404, f"unknown instance {instance_id!r}") from None

    def status(self, instance_id: str) -> dict[str, Any]:
        inst = self._instance(instance_id)
        history = [
            {
                "task_id": h.task_id,
                "kind": h.kind,
                "job_id": h.job_id,
                "started": h.started,
                "finished": h.finished,
                "outcome": h.outcome,
                **({"detail": h.detail} if h.detail else {}),
            }
            for h in inst.history
        ]
        snapshot: dict[str, Any] = {
            "id": inst.id,
            "definition_id": inst.definition_id,
            "version": inst.version,
            "phase": inst.status,
            "current_task": self.engine.current_task(inst) if inst.status == RUNNING else None,
            "history": history,
            "incident": inst.incident,
            "parent": list(inst.parent) if inst.parent else None,
        }
        if "strategy" in inst.variables:
            snapshot["strategy"] = inst.variables["strategy"]
        if inst.waiting_child:
            child = self.engine.instance(inst.waiting_child)
            snapshot["child"] = {
                "id": child.id,
                "definition_id": child.definition_id,
                "phase": child.status,
                "current_task": self.engine.current_task(child) if child.status == RUNNING else None,
            }
        return snapshot

    def result(self, instance_id: str) -> dict[str, Any]:
        inst = self._instance(instance_id)
        if inst.status == RUNNING:
            raise GatewayError(409, "still running", phase=inst.status)
        if inst.status != COMPLETED:
            raise GatewayError(409, f"instance failed: {inst.incident}", phase=inst.status)
        if "solution" not in inst.variables:
            raise GatewayError(409, "instance completed without a solution", phase=inst.status)
        return inst.variables["solution"]

    def device_list(self) -> list[dict[str, Any]]:
        return [d.to_dict() for d in self.devices]
