"""QAOA ansatz construction and classical parameter refinement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy.optimize import minimize

from .domain import Gate, IsingModel, ParamRef, QuantumCircuit
from .simulator import expectation, simulate


@dataclass(frozen=True)
class QaoaConfig:
    layers: int = 2
    optimizer: str = "nelder-mead"
    max_evals: int = 400
    tolerance: float = 1e-4
    restarts: int = 3
    rng_seed: int = 0
    initial_step: float = 0.25

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.optimizer != "nelder-mead":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "layers": self.layers,
            "optimizer": self.optimizer,
            "max_evals": self.max_evals,
            "tolerance": self.tolerance,
            "restarts": self.restarts,
            "rng_seed": self.rng_seed,
            "initial_step": self.initial_step,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | None) -> "QaoaConfig":
        data = data or {}
        return cls(**{k: data[k] for k in data if k in cls.__dataclass_fields__})


@dataclass
class RefinementTrace:
    evaluations: list[tuple[tuple[float, ...], float]] = field(default_factory=list)
    best_parameters: dict[str, float] = field(default_factory=dict)
    best_expectation: float = math.inf
    initial_expectation: float = math.nan

    def __len__(self) -> int:
        return len(self.evaluations)

    def summary(self) -> dict[str, Any]:
        return {
            "evaluations": len(self.evaluations),
            "best_expectation": self.best_expectation,
            "initial_expectation": self.initial_expectation,
            "best_parameters": dict(self.best_parameters),
        }


FIXED_START = 0.1


def parameter_names(layers: int) -> tuple[str, ...]:
    return tuple(f"gamma_{l}" for l in range(1, layers + 1)) + tuple(
        f"beta_{l}" for l in range(1, layers + 1)
    )


def build_qaoa_circuit(m: IsingModel, layers: int) -> QuantumCircuit:
    """Standard alternating cost/mixer ansatz over the CX-RZ-CX decomposition."""
    if layers < 1:
        raise ValueError("layers must be >= 1")
    gates = [Gate("H", (q,)) for q in range(m.n)]
    for l in range(1, layers + 1):
        gamma, beta = f"gamma_{l}", f"beta_{l}"
        for (u, v), coupling in sorted(m.j.items()):
            if coupling == 0:
                continue
            gates.append(Gate("CX", (u, v)))
            gates.append(Gate("RZ", (v,), ParamRef(gamma, 2.0 * coupling)))
            gates.append(Gate("CX", (u, v)))
        for q, field_ in sorted(m.h.items()):
            if field_ != 0:
                gates.append(Gate("RZ", (q,), ParamRef(gamma, 2.0 * field_)))
        gates.extend(Gate("RX", (q,), ParamRef(beta, 2.0)) for q in range(m.n))
    return QuantumCircuit(m.n, tuple(gates), parameter_names(layers))


class _BudgetSpent(Exception):
    pass


def refine(c: QuantumCircuit, m: IsingModel, cfg: QaoaConfig) -> RefinementTrace:
    """Minimize the expected energy over the circuit's free parameters.

    Runs ``cfg.restarts`` Nelder-Mead searches. The first starts from 0.1 for
    every angle; the rest start from uniform draws (gamma in [0, pi), beta in
    [0, pi/2)). Each search is capped at ``cfg.max_evals`` objective calls.
    """
    names = c.parameters
    if len(names) != 2 * cfg.layers:
        raise ValueError(
            f"parameter mismatch: circuit has {len(names)} parameters, expected {2 * cfg.layers}"
        )
    p = cfg.layers
    rng = np.random.default_rng(cfg.rng_seed)
    starts = [np.full(2 * p, FIXED_START)]
    for _ in range(cfg.restarts - 1):
        starts.append(
            np.concatenate([rng.uniform(0, np.pi, p), rng.uniform(0, np.pi / 2, p)])
        )

    trace = RefinementTrace()
    best_x = starts[0]

    def objective(x: np.ndarray) -> float:
        nonlocal best_x
        if budget[0] <= 0:
            raise _BudgetSpent
        budget[0] -= 1
        value = expectation(simulate(c, dict(zip(names, map(float, x)))), m)
        trace.evaluations.append((tuple(float(v) for v in x), value))
        if value < trace.best_expectation:
            trace.best_expectation = value
            best_x = np.array(x, dtype=float)
        return value

    for k, x0 in enumerate(starts):
        budget = [cfg.max_evals]
        simplex = np.vstack([x0] + [x0 + cfg.initial_step * e for e in np.eye(2 * p)])
        try:
            minimize(
                objective,
                x0,
                method="Nelder-Mead",
                options={
                    "initial_simplex": simplex,
                    "maxfev": cfg.max_evals,
                    "xatol": cfg.tolerance,
                    "fatol": cfg.tolerance,
                },
            )
        except _BudgetSpent:
            pass
        if k == 0:
            trace.initial_expectation = trace.evaluations[0][1]

    trace.best_parameters = dict(zip(names, map(float, best_x)))
    return trace
