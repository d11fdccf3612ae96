"""Command line entry point: ``qorch serve|worker|submit|status|result|deploy|devices``."""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
from pathlib import Path
from typing import Any

from .client import ApiClient, ApiError
from .config import Config

log = logging.getLogger("qorch")

EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_PENDING = 3


def _print(obj: Any) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _read_json(path: str) -> Any:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    return json.loads(text)


def _config(args: argparse.Namespace) -> Config:
    return Config.load(
        getattr(args, "config", None),
        host=getattr(args, "host", None),
        port=getattr(args, "port", None),
        broker_url=getattr(args, "url", None),
    )


def _wait_for_signal() -> threading.Event:
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    return stop


def cmd_serve(args: argparse.Namespace) -> int:
    from .gateway import ApiServer, Platform
    from .workers.harness import WorkerPool

    cfg = _config(args)
    if args.embed_workers:
        cfg.embed_workers = True
    platform = Platform(cfg)
    server = ApiServer(platform, cfg.host, cfg.port).start()
    pool = None
    if cfg.embed_workers:
        pool = WorkerPool(
            platform.local_workers(lock_ms=cfg.worker_lock_ms, poll_ms=cfg.worker_poll_ms)
        ).start()
    print(f"listening on {server.url}", flush=True)
    stop = _wait_for_signal()
    stop.wait()
    if pool is not None:
        pool.stop()
    server.stop()
    return 0


def cmd_worker(args: argparse.Namespace) -> int:
    from .workers.context import ReferenceStore, WorkerContext
    from .decisions import DecisionRegistry, load_registry
    from .workers.handlers import build_handlers
    from .workers.harness import HttpTransport, Worker, WorkerPool

    cfg = _config(args)
    tables = DecisionRegistry()
    tables.load_dir(cfg.tables)
    ctx = WorkerContext(
        devices=load_registry(cfg.devices),
        device_table=tables.get("device-selection"),
        references=ReferenceStore.load(cfg.references),
        qaoa=dict(cfg.qaoa),
        max_qubits=cfg.max_qubits,
        default_shots=cfg.default_shots,
        decode_mode=cfg.decode_mode,
        classical_cap=cfg.classical_cap,
    )
    handlers = build_handlers(ctx)
    types = sorted(handlers) if args.all or not args.types else args.types
    unknown = [t for t in types if t not in handlers]
    if unknown:
        print(f"unknown job types: {', '.join(unknown)}", file=sys.stderr)
        return EXIT_USAGE
    transport = HttpTransport(cfg.base_url)
    workers = [
        Worker(transport, t, handlers[t], max_concurrent=args.concurrency,
               lock_ms=cfg.worker_lock_ms, poll_ms=cfg.worker_poll_ms)
        for t in types
    ]
    pool = WorkerPool(workers).start()
    print(f"serving {len(workers)} job types against {cfg.base_url}", flush=True)
    _wait_for_signal().wait()
    pool.stop()
    return 0


def cmd_submit(args: argparse.Namespace) -> int:
    client = ApiClient(_config(args).base_url)
    _print({"instance_id": client.submit(_read_json(args.file))})
    return 0


def cmd_status(args: argparse.Namespace) -> int:
    _print(ApiClient(_config(args).base_url).status(args.instance_id))
    return 0


def cmd_result(args: argparse.Namespace) -> int:
    try:
        _print(ApiClient(_config(args).base_url).result(args.instance_id))
    except ApiError as exc:
        if exc.status == 409 and exc.message == "still running":
            print("still running", file=sys.stderr)
            return EXIT_PENDING
        raise
    return 0


def cmd_deploy(args: argparse.Namespace) -> int:
    _print(ApiClient(_config(args).base_url).deploy(_read_json(args.definition)))
    return 0


def cmd_devices(args: argparse.Namespace) -> int:
    _print(ApiClient(_config(args).base_url).devices())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qorch", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def client_opts(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--url", help="gateway base URL (default from config)")

    p = sub.add_parser("serve", help="run gateway, engine and broker")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--embed-workers", action="store_true", help="also run every worker in-process")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("worker", help="run workers against a remote broker")
    client_opts(p)
    p.add_argument("--types", nargs="+", metavar="JOB_TYPE", help="job types to serve")
    p.add_argument("--all", action="store_true", help="serve every known job type")
    p.add_argument("--concurrency", type=int, default=1)
    p.set_defaults(func=cmd_worker)

    p = sub.add_parser("submit", help="submit a problem request")
    client_opts(p)
    p.add_argument("--file", required=True, help="request JSON ('-' for stdin)")
    p.set_defaults(func=cmd_submit)

    p = sub.add_parser("status", help="show instance status")
    client_opts(p)
    p.add_argument("instance_id")
    p.set_defaults(func=cmd_status)

    p = sub.add_parser("result", help="fetch an instance result (exit 3 while running)")
    client_opts(p)
    p.add_argument("instance_id")
    p.set_defaults(func=cmd_result)

    p = sub.add_parser("deploy", help="deploy a process definition")
    client_opts(p)
    p.add_argument("--definition", required=True, help="definition JSON file")
    p.set_defaults(func=cmd_deploy)

    p = sub.add_parser("devices", help="device registry")
    client_opts(p)
    p.add_argument("action", choices=["list"])
    p.set_defaults(func=cmd_devices)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ApiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
