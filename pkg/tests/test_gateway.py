import json
import threading
import time

import pytest

from qorch.broker import ManualClock
from qorch.cli import main
from qorch.client import ApiClient, ApiError
from qorch.config import RESOURCES, Config
from qorch.gateway import ApiServer, GatewayError, Platform
from qorch.workers.context import JobFailure
from qorch.workers.harness import HttpTransport, LocalTransport, Worker, WorkerPool

SCHEDULE = {"kind": "schedule", "payload": {"num_shifts": 5, "num_agents": 2}}
CARGO = {"kind": "knapsack", "payload": {"values": [6, 10, 12], "weights": [1, 2, 3], "capacity": 5}}


@pytest.fixture
def platform():
    return Platform()


@pytest.fixture
def server(platform):
    srv = ApiServer(platform).start()
    yield srv
    srv.stop()


@pytest.fixture
def client(server):
    return ApiClient(server.url)


def wait_for(client, instance_id, timeout=30):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        status = client.status(instance_id)
        if status["phase"] != "running":
            return status
        time.sleep(0.05)
    raise AssertionError("instance did not settle")


# -- in-process -------------------------------------------------------------


def test_submit_starts_at_input_aggregation(platform):
    iid = platform.submit(SCHEDULE)
    status = platform.status(iid)
    assert status["phase"] == "running" and status["current_task"] == "input-aggregation"


@pytest.mark.parametrize("body", [{"kind": "tsp", "payload": {}}, {"kind": "schedule"}, ["x"]])
def test_submit_rejects(platform, body):
    with pytest.raises(GatewayError) as err:
        platform.submit(body)
    assert err.value.status == 400


def test_result_before_completion(platform):
    iid = platform.submit(SCHEDULE)
    with pytest.raises(GatewayError, match="still running") as err:
        platform.result(iid)
    assert err.value.status == 409


def test_unknown_instance(platform):
    with pytest.raises(GatewayError) as err:
        platform.status("nope")
    assert err.value.status == 404


def test_small_knapsack_goes_classical(platform):
    iid = platform.submit(CARGO)
    status = platform.run_until_settled(iid)
    assert status["phase"] == "completed" and status["strategy"] == "classical-brute-force"
    assert platform.result(iid)["total_value"] == 22


def test_failed_instance_result(platform):
    iid = platform.submit({"kind": "knapsack", "payload": {"values": [], "weights": [], "capacity": 3}})
    status = platform.run_until_settled(iid)
    assert status["phase"] == "failed-incident" and "empty item list" in status["incident"]
    with pytest.raises(GatewayError, match="instance failed"):
        platform.result(iid)


def test_redeploy_skips_unchanged(platform):
    assert platform.deploy_directory(RESOURCES / "definitions")["strategy-decision"] == 1


def test_status_shows_child(platform):
    iid = platform.submit({**SCHEDULE, "strategy": "qaoa"})
    workers = platform.local_workers(["strategy_input-aggregation"])
    platform.run_until_settled(iid, workers)
    status = platform.status(iid)
    assert status["child"]["definition_id"] == "scheduling-qaoa-pipeline"
    assert status["child"]["current_task"] == "problem-mapping"


# -- worker harness ---------------------------------------------------------


def test_worker_non_retryable_failure(platform):
    platform.engine.deploy({"id": "one", "tasks": [{"id": "t", "kind": "service", "job_type": "boom"}]})
    iid = platform.engine.create_instance("one", {})

    def handler(payload):
        raise JobFailure("bad payload")

    Worker(LocalTransport(platform.broker), "boom", handler).poll_once()
    assert platform.engine.instance(iid).status == "failed-incident"


def test_worker_crash_is_retried(platform):
    platform.engine.deploy({"id": "one", "tasks": [{"id": "t", "kind": "service", "job_type": "flaky"}]})
    iid = platform.engine.create_instance("one", {})
    calls = []

    def handler(payload):
        calls.append(1)
        if len(calls) < 3:
            raise RuntimeError("transient")
        return {"ok": True}

    w = Worker(LocalTransport(platform.broker), "flaky", handler)
    while w.poll_once():
        pass
    assert len(calls) == 3 and platform.engine.instance(iid).variables["ok"] is True


def test_worker_discards_result_after_lock_loss():
    clock = ManualClock()
    p = Platform(clock=clock)
    p.engine.deploy({"id": "one", "tasks": [{"id": "t", "kind": "service", "job_type": "slow"}]})
    iid = p.engine.create_instance("one", {})

    def slow(payload):
        clock.advance(60)
        return {"late": True}

    w = Worker(LocalTransport(p.broker), "slow", slow, lock_ms=1000)
    w.poll_once()
    assert w.processed == 0
    assert "late" not in p.engine.instance(iid).variables
    fast = Worker(LocalTransport(p.broker), "slow", lambda payload: {"fast": True})
    fast.poll_once()
    assert p.engine.instance(iid).variables == {"fast": True}


# -- HTTP -------------------------------------------------------------------


def test_http_end_to_end_with_remote_workers(platform, server, client):
    pool = WorkerPool([
        Worker(HttpTransport(server.url), t, h, poll_ms=200) for t, h in sorted(platform.handlers.items())
    ]).start()
    try:
        iid = client.submit({**CARGO, "strategy": "qaoa", "seed": 2})
        status = wait_for(client, iid)
    finally:
        pool.stop()
    assert status["phase"] == "completed" and status["strategy"] == "qaoa-pipeline"
    assert client.result(iid)["total_weight"] <= 5


def test_http_errors(client):
    with pytest.raises(ApiError) as err:
        client.submit({"kind": "tsp", "payload": {}})
    assert err.value.status == 400
    with pytest.raises(ApiError) as err:
        client.status("missing")
    assert err.value.status == 404
    with pytest.raises(ApiError) as err:
        client.request("GET", "/nowhere")
    assert err.value.status == 404
    with pytest.raises(ApiError) as err:
        client.activate("ghost", "t", 1, 1000)
    assert err.value.status == 403
    with pytest.raises(ApiError) as err:
        client.complete("w", "no-such-job", {})
    assert err.value.status == 404
    with pytest.raises(ApiError) as err:
        client.deploy({"id": "bad", "tasks": []})
    assert err.value.status == 400


def test_http_result_pending(client):
    iid = client.submit(SCHEDULE)
    with pytest.raises(ApiError) as err:
        client.result(iid)
    assert err.value.status == 409 and err.value.message == "still running"


def test_http_lock_conflict(server, client, platform):
    platform.engine.deploy({"id": "one", "tasks": [{"id": "t", "kind": "service", "job_type": "x"}]})
    platform.engine.create_instance("one", {})
    client.register("a", "x")
    client.register("b", "x")
    (job,) = client.activate("a", "x", 1, 30_000)
    with pytest.raises(ApiError) as err:
        client.complete("b", job["id"], {})
    assert err.value.status == 409
    client.complete("a", job["id"], {})


def test_http_long_poll(server, client, platform):
    platform.engine.deploy({"id": "one", "tasks": [{"id": "t", "kind": "service", "job_type": "late"}]})
    client.register("w", "late")
    threading.Timer(0.2, lambda: platform.engine.create_instance("one", {})).start()
    jobs = client.activate("w", "late", 1, 30_000, timeout_ms=5000)
    assert len(jobs) == 1


def test_submit_is_non_blocking(client):
    start = time.monotonic()
    client.submit({**SCHEDULE, "strategy": "qaoa"})
    assert time.monotonic() - start < 1.0


def test_devices_and_definitions(client):
    assert [d["id"] for d in client.devices()] == ["local-sv-24", "local-sv-8-maintenance"]
    ids = {d["id"] for d in client.request("GET", "/definitions")["definitions"]}
    assert {"strategy-decision", "scheduling-qaoa-pipeline", "knapsack-qaoa-pipeline"} <= ids


# -- CLI --------------------------------------------------------------------


def cli(capsys, *args):
    code = main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_flow(tmp_path, server, platform, capsys):
    request = tmp_path / "scheduling-5x2.json"
    request.write_text(json.dumps(SCHEDULE))
    code, out, _ = cli(capsys, "submit", "--url", server.url, "--file", str(request))
    assert code == 0
    iid = json.loads(out)["instance_id"]

    code, _, err = cli(capsys, "result", "--url", server.url, iid)
    assert code == 3 and "still running" in err

    platform.run_until_settled(iid)
    code, out, _ = cli(capsys, "result", "--url", server.url, iid)
    assert code == 0 and len(json.loads(out)["schedule"]) == 5

    code, out, _ = cli(capsys, "status", "--url", server.url, iid)
    assert json.loads(out)["phase"] == "completed"


def test_cli_deploy_and_devices(server, capsys):
    pipeline = RESOURCES / "definitions" / "knapsack-qaoa-pipeline.json"
    code, out, _ = cli(capsys, "deploy", "--url", server.url, "--definition", str(pipeline))
    assert code == 0 and json.loads(out)["version"] == 2
    code, out, _ = cli(capsys, "devices", "list", "--url", server.url)
    assert code == 0 and json.loads(out)[0]["id"] == "local-sv-24"


def test_cli_errors(server, capsys):
    code, _, err = cli(capsys, "status", "--url", server.url, "nope")
    assert code == 1 and "404" in err
    code, _, err = cli(capsys, "status", "--url", "http://127.0.0.1:9", "x")
    assert code == 1 and "cannot reach" in err


def test_config_file(tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps({"port": 9999, "event_log": "events.jsonl", "qaoa": {"layers": 1}}))
    cfg = Config.load(tmp_path / "cfg.json")
    assert cfg.port == 9999 and cfg.event_log == str(tmp_path / "events.jsonl")
    with pytest.raises(ValueError):
        (tmp_path / "bad.json").write_text('{"colour": 1}')
        Config.load(tmp_path / "bad.json")


def test_platform_survives_restart(tmp_path):
    cfg = Config(event_log=str(tmp_path / "events.jsonl"))
    first = Platform(cfg)
    iid = first.submit(CARGO)
    second = Platform(cfg)
    assert second.status(iid)["current_task"] == "input-aggregation"
    status = second.run_until_settled(iid)
    assert status["phase"] == "completed"
    assert second.engine.definition("strategy-decision").version == 1
