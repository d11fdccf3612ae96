"""HTTP+JSON front door: gateway endpoints and the broker wire protocol.

Gateway
    POST /problems                  -> 202 {"instance_id"}
    GET  /instances/{id}            -> 200 status snapshot
    GET  /instances/{id}/result     -> 200 solution | 409 | 404
    POST /definitions               -> 201 {"id", "version"}
    GET  /definitions               -> 200 {"definitions": [...]}
    GET  /devices                   -> 200 {"devices": [...]}
    GET  /health                    -> 200 {"ok": true}

Broker (the only channel workers use)
    POST /workers                   {"worker_id", "job_type", "max_concurrent"}
    POST /jobs/activate             {"worker_id", "job_type", "max_jobs", "lock_ms", "timeout_ms"}
    POST /jobs/{id}/complete        {"worker_id", "variables"}
    POST /jobs/{id}/fail            {"worker_id", "message", "retries"?}

Errors come back as {"error": message} with a 4xx status.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

from ..broker import DEFAULT_LOCK_MS, LockLost, NotRegistered, UnknownJob
from ..engine import DefinitionError, JobRejected
from .app import GatewayError, Platform

log = logging.getLogger(__name__)

_JOB_ACTION = re.compile(r"^/jobs/([^/]+)/(complete|fail)$")
_INSTANCE = re.compile(r"^/instances/([^/]+)(/result)?$")


class _Handler(BaseHTTPRequestHandler):
    platform: Platform
    server_version = "qorch/0.1"

    def log_message(self, fmt: str, *args: Any) -> None:
        log.debug("%s %s", self.address_string(), fmt % args)

    def _send(self, status: int, body: Any) -> None:
        raw = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def _body(self) -> Any:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise GatewayError(400, f"malformed JSON: {exc}") from None

    def _dispatch(self, method: str) -> None:
        try:
            status, body = self._route(method, self.path.split("?", 1)[0])
        except GatewayError as exc:
            status, body = exc.status, {"error": exc.message, **exc.extra}
        except (LockLost, JobRejected) as exc:
            status, body = 409, {"error": str(exc)}
        except UnknownJob as exc:
            status, body = 404, {"error": str(exc)}
        except NotRegistered as exc:
            status, body = 403, {"error": str(exc)}
        except (DefinitionError, KeyError, TypeError, ValueError) as exc:
            status, body = 400, {"error": f"bad request: {exc}"}
        except Exception as exc:  # noqa: BLE001
            log.exception("unhandled error on %s %s", method, self.path)
            status, body = 500, {"error": str(exc)}
        self._send(status, body)

    def do_GET(self) -> None:
        self._dispatch("GET")

    def do_POST(self) -> None:
        self._dispatch("POST")

    def _route(self, method: str, path: str) -> tuple[int, Any]:
        p = self.platform
        if method == "GET" and path == "/health":
            return 200, {"ok": True}
        if method == "POST" and path == "/problems":
            return 202, {"instance_id": p.submit(self._body())}
        m = _INSTANCE.match(path)
        if method == "GET" and m:
            if m.group(2):
                return 200, p.result(m.group(1))
            return 200, p.status(m.group(1))
        if path == "/definitions":
            if method == "POST":
                body = self._body()
                version = p.engine.deploy(body)
                return 201, {"id": body["id"], "version": version}
            return 200, {"definitions": [d.to_dict() for d in p.engine.definitions()]}
        if method == "GET" and path == "/devices":
            return 200, {"devices": p.device_list()}

        broker = p.broker
        if method == "POST" and path == "/workers":
            body = self._body()
            reg = broker.register(
                body["worker_id"], body["job_type"], int(body.get("max_concurrent", 1))
            )
            return 201, {"worker_id": reg.worker_id, "job_type": reg.job_type}
        if method == "POST" and path == "/jobs/activate":
            body = self._body()
            jobs = broker.activate(
                body["worker_id"],
                body["job_type"],
                int(body.get("max_jobs", 1)),
                int(body.get("lock_ms", DEFAULT_LOCK_MS)),
                int(body.get("timeout_ms", 0)),
            )
            return 200, {"jobs": [j.to_dict() for j in jobs]}
        m = _JOB_ACTION.match(path)
        if method == "POST" and m:
            body = self._body()
            if m.group(2) == "complete":
                broker.complete(body["worker_id"], m.group(1), body.get("variables") or {})
            else:
                broker.fail(body["worker_id"], m.group(1), body.get("message", ""), body.get("retries"))
            return 200, {"ok": True}
        raise GatewayError(404, f"no route for {method} {path}")


class ApiServer:
    """Threaded HTTP server bound to one platform."""

    def __init__(self, platform: Platform, host: str = "127.0.0.1", port: int = 0):
        handler = type("Handler", (_Handler,), {"platform": platform})
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self.httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "ApiServer":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(5)
