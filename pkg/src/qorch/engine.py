"""Process engine: runs linear process definitions over the job broker.

Task kinds:

* ``service``       -- published as a job of ``job_type``; a worker completes it.
* ``business-rule`` -- evaluated inline against a decision table; the output
  map is merged into the instance variables.
* ``call-activity`` -- starts a child instance of ``target`` (a definition id,
  or ``${var}`` to read it from a variable) and waits for it. Only the
  variables listed in ``outputs`` flow back to the parent.

Any task may carry ``"optional": true`` with a ``"flag"`` variable name; it is
skipped when that variable is ``false``.

State changes are appended to a JSON-lines log and replayed on startup.
"""

from __future__ import annotations

import copy
import json
import logging
import re
import threading
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from .broker import DEFAULT_RETRIES, Job, JobBroker, UnknownJob
from .decisions import DecisionError, DecisionRegistry

log = logging.getLogger(__name__)

RUNNING = "running"
COMPLETED = "completed"
INCIDENT = "failed-incident"

TASK_KINDS = ("service", "business-rule", "call-activity")
_VAR_REF = re.compile(r"^\$\{([A-Za-z_][A-Za-z0-9_]*)\}$")


class EngineError(Exception):
    pass


class DefinitionError(EngineError):
    pass


class UnknownDefinition(EngineError):
    pass


class UnknownInstance(EngineError):
    pass


class JobRejected(EngineError):
    """Completion or failure for a job the engine is not waiting on."""


@dataclass(frozen=True)
class TaskDef:
    id: str
    kind: str
    job_type: str | None = None
    decision_id: str | None = None
    target: str | None = None
    outputs: tuple[str, ...] = ()
    optional: bool = False
    flag: str | None = None
    retries: int = DEFAULT_RETRIES

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"id": self.id, "kind": self.kind}
        if self.kind == "service":
            out["job_type"] = self.job_type
            out["retries"] = self.retries
        elif self.kind == "business-rule":
            out["decision_id"] = self.decision_id
        else:
            out["target"] = self.target
            out["outputs"] = list(self.outputs)
        if self.optional:
            out["optional"] = True
            out["flag"] = self.flag
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TaskDef":
        return cls(
            id=data["id"],
            kind=data["kind"],
            job_type=data.get("job_type"),
            decision_id=data.get("decision_id"),
            target=data.get("target"),
            outputs=tuple(data.get("outputs", ())),
            optional=data.get("optional", False),
            flag=data.get("flag"),
            retries=data.get("retries", DEFAULT_RETRIES),
        )


@dataclass(frozen=True)
class ProcessDefinition:
    id: str
    tasks: tuple[TaskDef, ...]
    version: int = 0
    name: str = ""

    def problems(self) -> list[str]:
        errors = []
        if not self.tasks:
            errors.append("definition has no tasks")
        seen = set()
        for t in self.tasks:
            if t.id in seen:
                errors.append(f"duplicate task id {t.id!r}")
            seen.add(t.id)
            if t.kind not in TASK_KINDS:
                errors.append(f"task {t.id!r}: unknown kind {t.kind!r}")
                continue
            given = {
                "service": t.job_type,
                "business-rule": t.decision_id,
                "call-activity": t.target,
            }
            if not given[t.kind]:
                errors.append(f"task {t.id!r}: {t.kind} task lacks its target field")
            extra = [k for k, v in given.items() if v and k != t.kind]
            if extra:
                errors.append(f"task {t.id!r}: fields for {extra} set on a {t.kind} task")
            if t.optional and not t.flag:
                errors.append(f"task {t.id!r}: optional task needs a flag variable")
        return errors

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "name": self.name,
            "version": self.version,
            "tasks": [t.to_dict() for t in self.tasks],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ProcessDefinition":
        return cls(
            id=data["id"],
            name=data.get("name", ""),
            version=data.get("version", 0),
            tasks=tuple(TaskDef.from_dict(t) for t in data["tasks"]),
        )


@dataclass
class HistoryEntry:
    task_id: str
    kind: str
    started: float
    job_id: str | None = None
    finished: float | None = None
    outcome: str = "active"
    detail: dict[str, Any] = field(default_factory=dict)


@dataclass
class ProcessInstance:
    id: str
    definition_id: str
    version: int
    status: str = RUNNING
    cursor: int = 0
    variables: dict[str, Any] = field(default_factory=dict)
    history: list[HistoryEntry] = field(default_factory=list)
    parent: tuple[str, str] | None = None
    waiting_job: str | None = None
    waiting_child: str | None = None
    incident: str | None = None

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["parent"] = list(self.parent) if self.parent else None
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ProcessInstance":
        data = dict(data)
        data["history"] = [HistoryEntry(**h) for h in data.get("history", [])]
        data["parent"] = tuple(data["parent"]) if data.get("parent") else None
        return cls(**data)


class EventLog:
    """Append-only JSON-lines file of state records; last record per key wins."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def append(self, record: dict[str, Any]) -> None:
        line = json.dumps(record, sort_keys=True)
        with self._lock, self.path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    def read(self) -> Iterable[dict[str, Any]]:
        if not self.path.exists():
            return []
        records = []
        with self.path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError:
                    # torn final write after a crash
                    log.warning("skipping unreadable event log line %d", lineno)
        return records


class ProcessEngine:
    def __init__(
        self,
        broker: JobBroker,
        decisions: DecisionRegistry | None = None,
        event_log: EventLog | str | Path | None = None,
    ):
        self.broker = broker
        self.clock = broker.clock
        self.decisions = decisions or DecisionRegistry()
        if event_log is not None and not isinstance(event_log, EventLog):
            event_log = EventLog(event_log)
        self.event_log = event_log
        self._lock = threading.RLock()
        self._definitions: dict[str, dict[int, ProcessDefinition]] = {}
        self._instances: dict[str, ProcessInstance] = {}
        self._job_owner: dict[str, str] = {}
        broker.listener = self
        if self.event_log is not None:
            self._replay()

    # -- definitions ------------------------------------------------------

    def deploy(self, definition: ProcessDefinition | Mapping[str, Any]) -> int:
        if not isinstance(definition, ProcessDefinition):
            definition = ProcessDefinition.from_dict(definition)
        errors = definition.problems()
        if errors:
            raise DefinitionError("; ".join(errors))
        with self._lock:
            versions = self._definitions.setdefault(definition.id, {})
            version = max(versions, default=0) + 1
            stored = ProcessDefinition(definition.id, definition.tasks, version, definition.name)
            versions[version] = stored
            self._record("definition", stored.to_dict())
        log.info("deployed %s version %d", definition.id, version)
        return version

    def definition(self, definition_id: str, version: int | None = None) -> ProcessDefinition:
        with self._lock:
            versions = self._definitions.get(definition_id)
            if not versions:
                raise UnknownDefinition(f"unknown definition {definition_id!r}")
            if version is None:
                version = max(versions)
            try:
                return versions[version]
            except KeyError:
                raise UnknownDefinition(f"unknown version {definition_id}@{version}") from None

    def definitions(self) -> list[ProcessDefinition]:
        with self._lock:
            return [v[max(v)] for v in self._definitions.values()]

    # -- instances --------------------------------------------------------

    def create_instance(
        self,
        definition_id: str,
        variables: Mapping[str, Any] | None = None,
    ) -> str:
        with self._lock:
            return self._start(uuid.uuid4().hex, definition_id, variables or {})

    def _start(
        self,
        instance_id: str,
        definition_id: str,
        variables: Mapping[str, Any],
        parent: tuple[str, str] | None = None,
    ) -> str:
        definition = self.definition(definition_id)
        inst = ProcessInstance(
            id=instance_id,
            definition_id=definition.id,
            version=definition.version,
            variables=copy.deepcopy(dict(variables)),
            parent=parent,
        )
        self._instances[inst.id] = inst
        log.info("created instance %s of %s@%d", inst.id, definition.id, definition.version)
        self._advance(inst)
        return inst.id

    def instance(self, instance_id: str) -> ProcessInstance:
        with self._lock:
            try:
                return copy.deepcopy(self._instances[instance_id])
            except KeyError:
                raise UnknownInstance(f"unknown instance {instance_id!r}") from None

    def instances(self) -> list[ProcessInstance]:
        with self._lock:
            return [copy.deepcopy(i) for i in self._instances.values()]

    def current_task(self, inst: ProcessInstance) -> str | None:
        tasks = self.definition(inst.definition_id, inst.version).tasks
        return tasks[inst.cursor].id if inst.cursor < len(tasks) else None

    # -- job callbacks ----------------------------------------------------

    def handle_job_completion(self, job_id: str, variables: Mapping[str, Any]) -> ProcessInstance:
        with self._lock:
            inst = self._waiting_instance(job_id)
            entry = inst.history[-1]
            entry.finished = self.clock.now()
            entry.outcome = "completed"
            inst.variables.update(copy.deepcopy(dict(variables)))
            inst.waiting_job = None
            inst.cursor += 1
            self._record_job(job_id)
            self._advance(inst)
            return copy.deepcopy(inst)

    def handle_job_failure(self, job_id: str, message: str) -> ProcessInstance:
        with self._lock:
            inst = self._waiting_instance(job_id)
            terminal = self.broker.retry_or_fail(job_id, message)
            self._record_job(job_id)
            if terminal:
                entry = inst.history[-1]
                entry.finished = self.clock.now()
                entry.outcome = "failed"
                entry.detail["error"] = message
                inst.waiting_job = None
                self._raise_incident(inst, f"task {entry.task_id!r} failed: {message}")
            else:
                log.info("job %s failed (%s); retrying", job_id, message)
                self._save(inst)
            return copy.deepcopy(inst)

    # -- internals --------------------------------------------------------

    def _waiting_instance(self, job_id: str) -> ProcessInstance:
        owner = self._job_owner.get(job_id)
        if owner is None:
            raise JobRejected(f"unknown job {job_id!r}")
        inst = self._instances[owner]
        if inst.status != RUNNING or inst.waiting_job != job_id:
            raise JobRejected(f"job {job_id!r} is not awaiting a result")
        return inst

    def _advance(self, inst: ProcessInstance) -> None:
        definition = self.definition(inst.definition_id, inst.version)
        tasks = definition.tasks
        while inst.status == RUNNING:
            if inst.cursor >= len(tasks):
                self._complete(inst)
                return
            task = tasks[inst.cursor]
            if task.optional and inst.variables.get(task.flag, True) is False:
                inst.cursor += 1
                continue
            now = self.clock.now()
            if task.kind == "service":
                job = Job(
                    id=uuid.uuid4().hex,
                    job_type=task.job_type,
                    instance_id=inst.id,
                    task_id=task.id,
                    payload=copy.deepcopy(inst.variables),
                    retries=task.retries,
                )
                inst.history.append(HistoryEntry(task.id, task.kind, now, job_id=job.id))
                inst.waiting_job = job.id
                self._job_owner[job.id] = inst.id
                self.broker.publish(job)
                self._record("job", job.to_dict())
                self._save(inst)
                return
            if task.kind == "business-rule":
                entry = HistoryEntry(task.id, task.kind, now)
                inst.history.append(entry)
                try:
                    table = self.decisions.get(task.decision_id)
                    facts = {k: inst.variables.get(k) for k in table.inputs if k in inst.variables}
                    output = table.evaluate(facts)
                except DecisionError as exc:
                    entry.finished, entry.outcome = now, "failed"
                    entry.detail["error"] = str(exc)
                    self._raise_incident(inst, f"task {task.id!r} failed: {exc}")
                    return
                entry.finished, entry.outcome = now, "completed"
                entry.detail["output"] = output
                inst.variables.update(output)
                inst.cursor += 1
                continue
            # call-activity
            entry = HistoryEntry(task.id, task.kind, now)
            inst.history.append(entry)
            target = self._resolve_target(task.target, inst.variables)
            entry.detail["target"] = target
            try:
                self.definition(target)
            except UnknownDefinition as exc:
                entry.finished, entry.outcome = now, "failed"
                self._raise_incident(inst, f"task {task.id!r} failed: {exc}")
                return
            child_id = uuid.uuid4().hex
            inst.waiting_child = child_id
            entry.detail["child_instance"] = child_id
            self._save(inst)
            # a child that finishes synchronously resumes this instance itself
            self._start(child_id, target, inst.variables, parent=(inst.id, task.id))
            return

    def _resolve_target(self, target: str, variables: Mapping[str, Any]) -> str:
        m = _VAR_REF.match(target)
        if m is None:
            return target
        value = variables.get(m.group(1))
        return value if isinstance(value, str) else ""

    def _complete(self, inst: ProcessInstance) -> None:
        inst.status = COMPLETED
        self._save(inst)
        log.info("instance %s completed", inst.id)
        if inst.parent is None:
            return
        parent_id, _ = inst.parent
        parent = self._instances[parent_id]
        if parent.status != RUNNING or parent.waiting_child != inst.id:
            return
        task = self.definition(parent.definition_id, parent.version).tasks[parent.cursor]
        entry = parent.history[-1]
        entry.finished = self.clock.now()
        entry.outcome = "completed"
        entry.detail["child_instance"] = inst.id
        for name in task.outputs:
            if name in inst.variables:
                parent.variables[name] = copy.deepcopy(inst.variables[name])
        parent.waiting_child = None
        parent.cursor += 1
        self._advance(parent)

    def _raise_incident(self, inst: ProcessInstance, message: str) -> None:
        inst.status = INCIDENT
        inst.incident = message
        self._save(inst)
        log.warning("instance %s incident: %s", inst.id, message)
        if inst.parent is not None:
            parent = self._instances[inst.parent[0]]
            if parent.status == RUNNING and parent.waiting_child == inst.id:
                entry = parent.history[-1]
                entry.finished = self.clock.now()
                entry.outcome = "failed"
                entry.detail["child_instance"] = inst.id
                parent.waiting_child = None
                self._raise_incident(parent, f"sub-process {inst.id} failed: {message}")

    # -- persistence ------------------------------------------------------

    def _save(self, inst: ProcessInstance) -> None:
        self._record("instance", inst.to_dict())

    def _record_job(self, job_id: str) -> None:
        if self.event_log is None:
            return
        try:
            self._record("job", self.broker.get(job_id).to_dict())
        except UnknownJob:
            pass

    def _record(self, kind: str, body: dict[str, Any]) -> None:
        if self.event_log is not None:
            self.event_log.append({"type": kind, "at": self.clock.now(), kind: body})

    def _replay(self) -> None:
        definitions: dict[tuple[str, int], ProcessDefinition] = {}
        instances: dict[str, ProcessInstance] = {}
        jobs: dict[str, Job] = {}
        for rec in self.event_log.read():
            kind = rec.get("type")
            if kind == "definition":
                d = ProcessDefinition.from_dict(rec["definition"])
                definitions[(d.id, d.version)] = d
            elif kind == "instance":
                i = ProcessInstance.from_dict(rec["instance"])
                instances[i.id] = i
            elif kind == "job":
                j = Job.from_dict(rec["job"])
                jobs[j.id] = j
        for (def_id, version), d in definitions.items():
            self._definitions.setdefault(def_id, {})[version] = d
        self._instances.update(instances)
        for job in jobs.values():
            self._job_owner[job.id] = job.instance_id
            owner = instances.get(job.instance_id)
            if owner is not None and owner.status == RUNNING and owner.waiting_job == job.id:
                self.broker.restore(job)
        if definitions or instances:
            log.info(
                "replayed %d definitions, %d instances, %d jobs",
                len(definitions),
                len(instances),
                len(jobs),
            )
