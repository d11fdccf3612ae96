"""Job handlers: one pure function per job type.

Every handler takes the job payload (a snapshot of the process variables) and
the static :class:`WorkerContext`, and returns the variables to write back.
Raising :class:`JobFailure` fails the job with its message.
"""

from __future__ import annotations

import sys
from functools import partial
from typing import Any, Mapping

from ..classical import solve_knapsack, solve_schedule
from ..domain import (
    IsingModel,
    KnapsackProblem,
    MeasurementCounts,
    SchedulingProblem,
    ValidationError,
    problem_from_dict,
    validate,
)
from ..encoders import (
    DECODE_MODES,
    EncodingMetadata,
    build_constraint_graph,
    decode_knapsack,
    decode_schedule,
    knapsack_to_qubo,
    maxcut_to_ising,
    qubo_to_ising,
)
from ..qaoa import FIXED_START, build_qaoa_circuit, refine
from ..qasm import QasmError, emit, parse
from .context import Handler, JobFailure, WorkerContext, require
from .quantum import circuit_execution_handler, device_selection_handler

STRATEGY_HINTS = ("auto", "classical", "qaoa")


def _problem(
    payload: Mapping[str, Any],
    ctx: WorkerContext,
    kind: str | None = None,
    max_qubits: int | None = None,
):
    require(payload, "problem")
    try:
        problem = validate(
            problem_from_dict(payload["problem"]),
            ctx.max_qubits if max_qubits is None else max_qubits,
        )
    except ValidationError as exc:
        raise JobFailure(str(exc)) from None
    except (KeyError, TypeError) as exc:
        raise JobFailure(f"malformed problem: {exc}") from None
    if kind is not None and payload["problem"].get("kind") != kind:
        raise JobFailure("kind mismatch")
    return problem


# -- quantum orchestration pipeline ---------------------------------------


def problem_mapping_handler(payload: dict, ctx: WorkerContext, kind: str) -> dict:
    problem = _problem(payload, ctx, kind)
    if isinstance(problem, SchedulingProblem):
        ising, meta = maxcut_to_ising(build_constraint_graph(problem))
    else:
        qubo, meta = knapsack_to_qubo(problem)
        ising = qubo_to_ising(qubo)
    return {"ising_model": ising.to_dict(), "encoding_metadata": meta.to_dict()}


def circuit_generation_handler(payload: dict, ctx: WorkerContext) -> dict:
    require(payload, "ising_model")
    ising = IsingModel.from_dict(payload["ising_model"])
    if ising.n > ctx.max_qubits:
        raise JobFailure(f"qubit cap exceeded: {ising.n} > {ctx.max_qubits}")
    cfg = ctx.qaoa_config(payload)
    circuit = build_qaoa_circuit(ising, cfg.layers)
    # angles used when refinement is skipped
    start = {name: FIXED_START for name in circuit.parameters}
    return {"circuit_qasm": emit(circuit), "num_qubits": circuit.num_qubits, "parameters": start}


def circuit_refinement_handler(payload: dict, ctx: WorkerContext) -> dict:
    require(payload, "circuit_qasm", "ising_model")
    try:
        circuit = parse(payload["circuit_qasm"])
    except QasmError as exc:
        raise JobFailure(f"parse failure: {exc}") from None
    ising = IsingModel.from_dict(payload["ising_model"])
    cfg = ctx.qaoa_config(payload)
    if len(circuit.parameters) != 2 * cfg.layers or ising.n != circuit.num_qubits:
        raise JobFailure("parameter mismatch")
    trace = refine(circuit, ising, cfg)
    bound = circuit.bind(trace.best_parameters, final=True)
    return {
        "bound_circuit_qasm": emit(bound),
        "parameters": trace.best_parameters,
        "best_expectation": trace.best_expectation,
        "trace_summary": trace.summary(),
    }


def solution_mapping_handler(payload: dict, ctx: WorkerContext, kind: str) -> dict:
    require(payload, "counts", "encoding_metadata", "problem")
    meta = EncodingMetadata.from_dict(payload["encoding_metadata"])
    problem = _problem(payload, ctx)
    expected = "maxcut-schedule" if isinstance(problem, SchedulingProblem) else "knapsack-slack"
    if meta.kind != expected or payload["problem"]["kind"] != kind:
        raise JobFailure("kind mismatch")
    mode = payload.get("decode_mode") or ctx.decode_mode
    if mode not in DECODE_MODES:
        raise JobFailure(f"unknown decode mode {mode!r}")
    counts = MeasurementCounts.from_dict(payload["counts"])
    trace_length = (payload.get("trace_summary") or {}).get("evaluations", 0)
    decode = decode_schedule if isinstance(problem, SchedulingProblem) else decode_knapsack
    try:
        solution = decode(counts, meta, problem, mode, trace_length)
    except ValueError as exc:
        raise JobFailure(str(exc)) from None
    return {"solution": solution.to_dict()}


# -- strategy decision pattern --------------------------------------------


def classical_strategy_handler(payload: dict, ctx: WorkerContext) -> dict:
    # no qubits involved; only the brute-force cap applies
    problem = _problem(payload, ctx, max_qubits=sys.maxsize)
    if problem.num_variables > ctx.classical_cap:
        raise JobFailure(
            f"cap exceeded: {problem.num_variables} variables > {ctx.classical_cap}"
        )
    if isinstance(problem, SchedulingProblem):
        solution = solve_schedule(problem)
    else:
        solution = solve_knapsack(problem)
    return {"solution": solution.to_dict()}


def input_aggregation_handler(payload: dict, ctx: WorkerContext) -> dict:
    """Normalize a raw request into a validated problem plus run options."""
    require(payload, "kind", "payload")
    kind, body = payload["kind"], payload["payload"]
    if not isinstance(body, Mapping):
        raise JobFailure("payload must be an object")
    refs: dict[str, Any] = {}
    try:
        if kind == "schedule":
            agent_ids = body.get("agent_ids")
            if agent_ids is not None:
                unknown = [a for a in agent_ids if a not in ctx.references.agents]
                if unknown:
                    raise JobFailure(f"unknown reference {unknown[0]!r}")
                refs["agents"] = [{"id": a, "name": ctx.references.agents[a]} for a in agent_ids]
            problem = SchedulingProblem(
                num_shifts=body["num_shifts"],
                num_agents=len(agent_ids) if agent_ids is not None else body["num_agents"],
                constraint_e1=body.get("constraint_e1", True),
                constraint_e2=body.get("constraint_e2", True),
            )
        elif kind == "knapsack":
            container_ids = body.get("container_ids")
            if container_ids is not None:
                unknown = [c for c in container_ids if c not in ctx.references.containers]
                if unknown:
                    raise JobFailure(f"unknown reference {unknown[0]!r}")
                manifests = [ctx.references.containers[c] for c in container_ids]
                refs["containers"] = [
                    {"id": c, "name": m["name"]} for c, m in zip(container_ids, manifests)
                ]
                values = [m["value"] for m in manifests]
                weights = [m["weight"] for m in manifests]
            else:
                values, weights = body["values"], body["weights"]
            problem = KnapsackProblem(tuple(values), tuple(weights), body["capacity"])
        else:
            raise JobFailure(f"unknown kind {kind!r}")
        validate(problem, ctx.max_qubits)
    except ValidationError as exc:
        raise JobFailure(str(exc)) from None
    except (KeyError, TypeError) as exc:
        raise JobFailure(f"malformed payload: missing {exc}") from None

    hint = payload.get("strategy", "auto")
    if hint not in STRATEGY_HINTS:
        raise JobFailure(f"unknown strategy {hint!r}")
    qaoa = dict(payload.get("qaoa") or {})
    if "seed" in payload and "rng_seed" not in qaoa:
        qaoa["rng_seed"] = payload["seed"]
    return {
        "problem": problem.to_dict(),
        "num_variables": problem.num_variables,
        "strategy_hint": hint,
        "references": refs,
        "qaoa": qaoa,
        "shots": payload.get("shots") or ctx.default_shots,
        "decode_mode": payload.get("decode_mode") or ctx.decode_mode,
        "refine": payload.get("refine", True),
        "aggregate_output": payload.get("aggregate_output", True),
    }


def output_aggregation_handler(payload: dict, ctx: WorkerContext) -> dict:
    """Attach display names from the reference data to the solution."""
    require(payload, "solution")
    solution = dict(payload["solution"])
    refs = payload.get("references") or {}
    if solution.get("kind") == "schedule" and "agents" in refs:
        agents = refs["agents"]
        for entry in agents:
            if entry["id"] not in ctx.references.agents:
                raise JobFailure(f"unknown reference {entry['id']!r}")
        solution["schedule"] = [
            {**e, "agent_id": agents[e["agent"] - 1]["id"], "agent_name": agents[e["agent"] - 1]["name"]}
            for e in solution["schedule"]
        ]
    elif solution.get("kind") == "knapsack" and "containers" in refs:
        containers = refs["containers"]
        for entry in containers:
            if entry["id"] not in ctx.references.containers:
                raise JobFailure(f"unknown reference {entry['id']!r}")
        solution["containers"] = [
            {"item": i, "id": containers[i - 1]["id"], "name": containers[i - 1]["name"]}
            for i in solution["items"]
        ]
    return {"solution": solution}


# -- registry -------------------------------------------------------------

PIPELINE_DOMAINS = {"scheduling": "schedule", "knapsack": "knapsack"}
DEVICE_SELECTION = "quantum_device-selection"
CIRCUIT_EXECUTION = "quantum_circuit-execution"
CLASSICAL_STRATEGY = "classical_strategy"
INPUT_AGGREGATION = "strategy_input-aggregation"
OUTPUT_AGGREGATION = "strategy_output-aggregation"


def build_handlers(ctx: WorkerContext) -> dict[str, Handler]:
    """Every job type this package can serve, bound to ``ctx``."""
    handlers: dict[str, Handler] = {
        DEVICE_SELECTION: partial(device_selection_handler, ctx=ctx),
        CIRCUIT_EXECUTION: partial(circuit_execution_handler, ctx=ctx),
        CLASSICAL_STRATEGY: partial(classical_strategy_handler, ctx=ctx),
        INPUT_AGGREGATION: partial(input_aggregation_handler, ctx=ctx),
        OUTPUT_AGGREGATION: partial(output_aggregation_handler, ctx=ctx),
    }
    for prefix, kind in PIPELINE_DOMAINS.items():
        handlers[f"{prefix}_qaoa_problem-mapping"] = partial(
            problem_mapping_handler, ctx=ctx, kind=kind
        )
        handlers[f"{prefix}_qaoa_circuit-generation"] = partial(
            circuit_generation_handler, ctx=ctx
        )
        handlers[f"{prefix}_qaoa_circuit-refinement"] = partial(
            circuit_refinement_handler, ctx=ctx
        )
        handlers[f"{prefix}_qaoa_solution-mapping"] = partial(
            solution_mapping_handler, ctx=ctx, kind=kind
        )
    return handlers
