"""Type-routed, pull-based job broker.

Workers register for a job type, activate jobs (which locks them for a while)
and report back with complete/fail. A lock that runs out before the worker
reports counts as a failure with message ``"lock expired"``; the owner of the
broker (the process engine) decides whether that means a retry or an incident.
"""

from __future__ import annotations

import copy
import logging
import threading
import time
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Any, Protocol

log = logging.getLogger(__name__)

DEFAULT_LOCK_MS = 30_000
DEFAULT_RETRIES = 3
MAX_POLL_MS = 10_000

QUEUED = "queued"
LOCKED = "locked"
FAILING = "failing"
COMPLETED = "completed"
FAILED_TERMINAL = "failed-terminal"


class BrokerError(Exception):
    pass


class UnknownJob(BrokerError):
    pass


class DuplicateJob(BrokerError):
    pass


class NotRegistered(BrokerError):
    pass


class LockLost(BrokerError):
    """The caller no longer owns the job; its result must be discarded."""


class SystemClock:
    def now(self) -> float:
        return time.time()


class ManualClock:
    """Clock that only moves when told to."""

    def __init__(self, start: float = 1_700_000_000.0):
        self._now = start
        self._lock = threading.Lock()

    def now(self) -> float:
        with self._lock:
            return self._now

    def advance(self, seconds: float) -> None:
        with self._lock:
            self._now += seconds


@dataclass
class Job:
    id: str
    job_type: str
    instance_id: str = ""
    task_id: str = ""
    payload: dict[str, Any] = field(default_factory=dict)
    retries: int = DEFAULT_RETRIES
    status: str = QUEUED
    lock_owner: str | None = None
    lock_deadline: float | None = None
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Job":
        return cls(**data)


@dataclass(frozen=True)
class WorkerRegistration:
    worker_id: str
    job_type: str
    max_concurrent: int = 1


class BrokerListener(Protocol):
    def handle_job_completion(self, job_id: str, variables: dict[str, Any]) -> Any: ...

    def handle_job_failure(self, job_id: str, message: str) -> Any: ...


class JobBroker:
    def __init__(self, clock=None, listener: BrokerListener | None = None):
        self.clock = clock or SystemClock()
        self.listener = listener
        self._lock = threading.Lock()
        self._ready = threading.Condition(self._lock)
        self._jobs: dict[str, Job] = {}
        self._queues: dict[str, deque[str]] = {}
        self._registrations: dict[tuple[str, str], WorkerRegistration] = {}

    # -- registration -----------------------------------------------------

    def register(self, worker_id: str, job_type: str, max_concurrent: int = 1) -> WorkerRegistration:
        if max_concurrent < 1:
            raise ValueError("max_concurrent must be >= 1")
        reg = WorkerRegistration(worker_id, job_type, max_concurrent)
        with self._lock:
            self._registrations[(worker_id, job_type)] = reg
        return reg

    def registrations(self) -> list[WorkerRegistration]:
        with self._lock:
            return list(self._registrations.values())

    # -- queue ------------------------------------------------------------

    def publish(self, job: Job) -> Job:
        with self._lock:
            if job.id in self._jobs:
                raise DuplicateJob(f"job {job.id!r} already published")
            job.status = QUEUED
            job.lock_owner = job.lock_deadline = None
            self._jobs[job.id] = job
            self._queues.setdefault(job.job_type, deque()).append(job.id)
            self._ready.notify_all()
        return job

    def restore(self, job: Job) -> None:
        """Reinsert a job recovered from the event log."""
        with self._lock:
            if job.status in (QUEUED, LOCKED, FAILING):
                job.status = QUEUED
                job.lock_owner = job.lock_deadline = None
                self._queues.setdefault(job.job_type, deque()).append(job.id)
            self._jobs[job.id] = job

    def get(self, job_id: str) -> Job:
        with self._lock:
            try:
                return copy.deepcopy(self._jobs[job_id])
            except KeyError:
                raise UnknownJob(f"unknown job {job_id!r}") from None

    def jobs(self) -> list[Job]:
        with self._lock:
            return [copy.deepcopy(j) for j in self._jobs.values()]

    # -- worker API -------------------------------------------------------

    def activate(
        self,
        worker_id: str,
        job_type: str,
        max_jobs: int = 1,
        lock_ms: int = DEFAULT_LOCK_MS,
        timeout_ms: int = 0,
    ) -> list[Job]:
        """Lock up to ``max_jobs`` queued jobs of ``job_type`` for this worker.

        Waits at most ``timeout_ms`` (capped at 10 s) of wall time for work.
        """
        self._expire_locks()
        deadline = time.monotonic() + min(max(timeout_ms, 0), MAX_POLL_MS) / 1000
        with self._lock:
            reg = self._registrations.get((worker_id, job_type))
            if reg is None:
                raise NotRegistered(f"worker {worker_id!r} is not registered for {job_type!r}")
            while True:
                in_flight = sum(
                    1
                    for j in self._jobs.values()
                    if j.status == LOCKED and j.lock_owner == worker_id and j.job_type == job_type
                )
                room = min(max_jobs, reg.max_concurrent - in_flight)
                queue = self._queues.get(job_type)
                if room > 0 and queue:
                    break
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return []
                self._ready.wait(remaining)
            now = self.clock.now()
            taken = []
            while queue and len(taken) < room:
                job = self._jobs[queue.popleft()]
                if job.status != QUEUED:
                    continue
                job.status = LOCKED
                job.lock_owner = worker_id
                job.lock_deadline = now + lock_ms / 1000
                taken.append(copy.deepcopy(job))
            return taken

    def complete(self, worker_id: str, job_id: str, variables: dict[str, Any] | None = None) -> None:
        self._expire_locks()
        with self._lock:
            job = self._owned(worker_id, job_id)
            job.status = COMPLETED
            job.lock_owner = job.lock_deadline = None
        if self.listener is not None:
            self.listener.handle_job_completion(job_id, dict(variables or {}))

    def fail(
        self, worker_id: str, job_id: str, message: str, retries: int | None = None
    ) -> None:
        """Report failure; ``retries`` overrides the remaining retry count."""
        self._expire_locks()
        with self._lock:
            job = self._owned(worker_id, job_id)
            if retries is not None:
                job.retries = max(0, int(retries))
            job.status = FAILING
            job.error = message
            job.lock_owner = job.lock_deadline = None
        self._dispatch_failure(job_id, message)

    # -- owner API --------------------------------------------------------

    def retry_or_fail(self, job_id: str, message: str) -> bool:
        """Requeue with one retry fewer, or mark terminal. True when terminal."""
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise UnknownJob(f"unknown job {job_id!r}")
            job.error = message
            job.lock_owner = job.lock_deadline = None
            if job.retries > 0:
                job.retries -= 1
                job.status = QUEUED
                self._queues.setdefault(job.job_type, deque()).append(job.id)
                self._ready.notify_all()
                return False
            job.status = FAILED_TERMINAL
            return True

    def expire_locks(self) -> int:
        return self._expire_locks()

    # -- internals --------------------------------------------------------

    def _owned(self, worker_id: str, job_id: str) -> Job:
        job = self._jobs.get(job_id)
        if job is None:
            raise UnknownJob(f"unknown job {job_id!r}")
        if job.status != LOCKED or job.lock_owner != worker_id:
            raise LockLost(f"job {job_id!r} is not locked by {worker_id!r}")
        if job.lock_deadline is not None and self.clock.now() >= job.lock_deadline:
            raise LockLost(f"lock on job {job_id!r} expired")
        return job

    def _expire_locks(self) -> int:
        now = self.clock.now()
        with self._lock:
            expired = [
                j.id
                for j in self._jobs.values()
                if j.status == LOCKED and j.lock_deadline is not None and now >= j.lock_deadline
            ]
            for job_id in expired:
                job = self._jobs[job_id]
                log.info("lock on job %s held by %s expired", job_id, job.lock_owner)
                job.status = FAILING
                job.lock_owner = job.lock_deadline = None
        for job_id in expired:
            self._dispatch_failure(job_id, "lock expired")
        return len(expired)

    def _dispatch_failure(self, job_id: str, message: str) -> None:
        if self.listener is not None:
            self.listener.handle_job_failure(job_id, message)
        else:
            self.retry_or_fail(job_id, message)
