"""Worker harness: registration, polling loop, result reporting, shutdown."""

from __future__ import annotations

import logging
import threading
import traceback
import uuid
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Protocol

from ..broker import BrokerError, JobBroker, LockLost
from ..client import ApiClient, ApiError
from .context import JobFailure

log = logging.getLogger(__name__)


class Transport(Protocol):
    def register(self, worker_id: str, job_type: str, max_concurrent: int) -> None: ...

    def activate(self, worker_id: str, job_type: str, max_jobs: int, lock_ms: int, timeout_ms: int) -> list[dict]: ...

    def complete(self, worker_id: str, job_id: str, variables: dict) -> None: ...

    def fail(self, worker_id: str, job_id: str, message: str, retries: int | None = None) -> None: ...


class LocalTransport:
    """Talks to an in-process broker; used for tests and single-process demos."""

    def __init__(self, broker: JobBroker):
        self.broker = broker

    def register(self, worker_id, job_type, max_concurrent):
        self.broker.register(worker_id, job_type, max_concurrent)

    def activate(self, worker_id, job_type, max_jobs, lock_ms, timeout_ms):
        jobs = self.broker.activate(worker_id, job_type, max_jobs, lock_ms, timeout_ms)
        return [j.to_dict() for j in jobs]

    def complete(self, worker_id, job_id, variables):
        try:
            self.broker.complete(worker_id, job_id, variables)
        except LockLost as exc:
            raise LockLostError(str(exc)) from None

    def fail(self, worker_id, job_id, message, retries=None):
        try:
            self.broker.fail(worker_id, job_id, message, retries)
        except LockLost as exc:
            raise LockLostError(str(exc)) from None


class HttpTransport:
    """Talks to a remote broker through the HTTP wire API."""

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.client = ApiClient(base_url, timeout)

    def register(self, worker_id, job_type, max_concurrent):
        self.client.register(worker_id, job_type, max_concurrent)

    def activate(self, worker_id, job_type, max_jobs, lock_ms, timeout_ms):
        return self.client.activate(worker_id, job_type, max_jobs, lock_ms, timeout_ms)

    def complete(self, worker_id, job_id, variables):
        try:
            self.client.complete(worker_id, job_id, variables)
        except ApiError as exc:
            if exc.status == 409:
                raise LockLostError(exc.message) from None
            raise

    def fail(self, worker_id, job_id, message, retries=None):
        try:
            self.client.fail(worker_id, job_id, message, retries)
        except ApiError as exc:
            if exc.status == 409:
                raise LockLostError(exc.message) from None
            raise


class LockLostError(Exception):
    pass


class Worker:
    """Serves one job type with a stateless handler."""

    def __init__(
        self,
        transport: Transport,
        job_type: str,
        handler: Callable[[dict[str, Any]], dict[str, Any]],
        worker_id: str | None = None,
        max_concurrent: int = 1,
        lock_ms: int = 30_000,
        poll_ms: int = 1_000,
    ):
        self.transport = transport
        self.job_type = job_type
        self.handler = handler
        self.worker_id = worker_id or f"{job_type}-{uuid.uuid4().hex[:8]}"
        self.max_concurrent = max_concurrent
        self.lock_ms = lock_ms
        self.poll_ms = poll_ms
        self.registered = False
        self.processed = 0

    def register(self) -> None:
        self.transport.register(self.worker_id, self.job_type, self.max_concurrent)
        self.registered = True

    def execute(self, job: dict[str, Any]) -> str:
        """Run the handler for one activated job and report the outcome."""
        job_id = job["id"]
        try:
            variables = self.handler(job["payload"])
        except JobFailure as exc:
            return self._report_failure(job_id, str(exc), None if exc.retry else 0)
        except Exception as exc:  # noqa: BLE001 - any handler crash becomes a job failure
            log.error("handler for %s crashed:\n%s", self.job_type, traceback.format_exc())
            return self._report_failure(job_id, f"{type(exc).__name__}: {exc}", None)
        try:
            self.transport.complete(self.worker_id, job_id, variables)
        except LockLostError as exc:
            log.warning("discarding result of job %s: %s", job_id, exc)
            return "lock-lost"
        self.processed += 1
        return "completed"

    def _report_failure(self, job_id: str, message: str, retries: int | None) -> str:
        try:
            self.transport.fail(self.worker_id, job_id, message, retries)
        except LockLostError as exc:
            log.warning("could not fail job %s: %s", job_id, exc)
            return "lock-lost"
        return "failed"

    def poll_once(self, timeout_ms: int = 0) -> int:
        """Activate and process one batch; returns the number of jobs seen."""
        if not self.registered:
            self.register()
        jobs = self.transport.activate(
            self.worker_id, self.job_type, self.max_concurrent, self.lock_ms, timeout_ms
        )
        if len(jobs) <= 1:
            for job in jobs:
                self.execute(job)
        else:
            with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
                list(pool.map(self.execute, jobs))
        return len(jobs)

    def run(self, stop: threading.Event) -> None:
        while not stop.is_set():
            try:
                self.poll_once(self.poll_ms)
            except (ApiError, BrokerError) as exc:
                log.warning("worker %s: %s", self.worker_id, exc)
                stop.wait(1.0)
                self.registered = False


class WorkerPool:
    """Runs several workers on background threads until stopped."""

    def __init__(self, workers: list[Worker]):
        self.workers = workers
        self.stop_event = threading.Event()
        self._threads: list[threading.Thread] = []

    def start(self) -> "WorkerPool":
        for w in self.workers:
            w.register()
            t = threading.Thread(target=w.run, args=(self.stop_event,), name=w.worker_id, daemon=True)
            t.start()
            self._threads.append(t)
        return self

    def stop(self, timeout: float = 15.0) -> None:
        self.stop_event.set()
        for t in self._threads:
            t.join(timeout)
        self._threads.clear()
