"""Handlers shared by every pipeline: device selection and circuit execution.

Nothing here knows about scheduling or knapsack problems.
"""

from __future__ import annotations

from ..decisions import NoCapableDevice, select_device
from ..domain import DeviceDescriptor
from ..qasm import QasmError, parse
from ..simulator import SimulationError, sample, simulate
from .context import JobFailure, WorkerContext, require


def device_selection_handler(payload: dict, ctx: WorkerContext) -> dict:
    require(payload, "num_qubits")
    shots = payload.get("shots") or ctx.default_shots
    try:
        device_id = select_device(ctx.devices, payload["num_qubits"], shots, ctx.device_table)
    except NoCapableDevice as exc:
        raise JobFailure(str(exc)) from None
    return {"device_id": device_id}


def _device(ctx: WorkerContext, device_id: str | None) -> DeviceDescriptor:
    for device in ctx.devices:
        if device.id == device_id:
            return device
    raise JobFailure(f"unknown device {device_id!r}")


def circuit_execution_handler(payload: dict, ctx: WorkerContext) -> dict:
    require(payload, "device_id")
    device = _device(ctx, payload["device_id"])
    if not device.available:
        raise JobFailure(f"device {device.id!r} unavailable", retry=True)
    text = payload.get("bound_circuit_qasm") or payload.get("circuit_qasm")
    if text is None:
        raise JobFailure("missing variable 'bound_circuit_qasm'")
    try:
        circuit = parse(text)
    except QasmError as exc:
        raise JobFailure(f"parse failure: {exc}") from None
    if not circuit.is_bound:
        binding = payload.get("parameters") or {}
        missing = [name for name in circuit.parameters if name not in binding]
        if missing:
            raise JobFailure(f"unbound parameter {missing[0]!r}")
        circuit = circuit.bind(binding, final=True)
    if circuit.num_qubits > device.max_qubits:
        raise JobFailure(f"circuit needs {circuit.num_qubits} qubits, device has {device.max_qubits}")
    shots = payload.get("shots") or ctx.default_shots
    seed = payload.get("seed", device.seed)
    try:
        counts = sample(simulate(circuit), shots, seed)
    except SimulationError as exc:
        raise JobFailure(str(exc)) from None
    return {"counts": counts.to_dict()}
