"""Minimal JSON-over-HTTP client for the gateway and broker endpoints."""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from typing import Any


class ApiError(Exception):
    def __init__(self, status: int, message: str, body: Any = None):
        super().__init__(f"HTTP {status}: {message}")
        self.status = status
        self.message = message
        self.body = body


class ApiClient:
    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def request(self, method: str, path: str, body: Any = None, timeout: float | None = None) -> Any:
        data = None if body is None else json.dumps(body).encode()
        req = urllib.request.Request(
            self.base_url + path,
            data=data,
            method=method,
            headers={"Content-Type": "application/json"},
        )
        try:
            with urllib.request.urlopen(req, timeout=timeout or self.timeout) as resp:
                raw = resp.read()
        except urllib.error.HTTPError as exc:
            raw = exc.read()
            try:
                payload = json.loads(raw)
            except ValueError:
                payload = {"error": raw.decode(errors="replace")}
            raise ApiError(exc.code, payload.get("error", exc.reason), payload) from None
        except urllib.error.URLError as exc:
            raise ApiError(0, f"cannot reach {self.base_url}: {exc.reason}") from None
        return json.loads(raw) if raw else None

    # gateway
    def submit(self, request: dict) -> str:
        return self.request("POST", "/problems", request)["instance_id"]

    def status(self, instance_id: str) -> dict:
        return self.request("GET", f"/instances/{instance_id}")

    def result(self, instance_id: str) -> dict:
        return self.request("GET", f"/instances/{instance_id}/result")

    def deploy(self, definition: dict) -> dict:
        return self.request("POST", "/definitions", definition)

    def devices(self) -> list[dict]:
        return self.request("GET", "/devices")["devices"]

    # broker
    def register(self, worker_id: str, job_type: str, max_concurrent: int = 1) -> None:
        self.request(
            "POST",
            "/workers",
            {"worker_id": worker_id, "job_type": job_type, "max_concurrent": max_concurrent},
        )

    def activate(self, worker_id: str, job_type: str, max_jobs: int, lock_ms: int, timeout_ms: int = 0) -> list[dict]:
        body = {
            "worker_id": worker_id,
            "job_type": job_type,
            "max_jobs": max_jobs,
            "lock_ms": lock_ms,
            "timeout_ms": timeout_ms,
        }
        return self.request(
            "POST", "/jobs/activate", body, timeout=self.timeout + timeout_ms / 1000
        )["jobs"]

    def complete(self, worker_id: str, job_id: str, variables: dict) -> None:
        self.request("POST", f"/jobs/{job_id}/complete", {"worker_id": worker_id, "variables": variables})

    def fail(self, worker_id: str, job_id: str, message: str, retries: int | None = None) -> None:
        body: dict[str, Any] = {"worker_id": worker_id, "message": message}
        if retries is not None:
            body["retries"] = retries
        self.request("POST", f"/jobs/{job_id}/fail", body)
