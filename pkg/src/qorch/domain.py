"""Problem, model, circuit and result types shared by every service.

Everything here is a plain value: constructed once, serialized to JSON when it
crosses a service boundary, and rebuilt on the other side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Mapping, Union

import numpy as np

DEFAULT_MAX_QUBITS = 24

GATE_KINDS = ("H", "RX", "RZ", "CX")


class ValidationError(ValueError):
    """Raised when a payload violates one or more type invariants."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# ---------------------------------------------------------------------------
# Problem instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SchedulingProblem:
    num_shifts: int
    num_agents: int
    constraint_e1: bool = True
    constraint_e2: bool = True

    @property
    def num_variables(self) -> int:
        return self.num_shifts * self.num_agents

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "schedule",
            "num_shifts": self.num_shifts,
            "num_agents": self.num_agents,
            "constraint_e1": self.constraint_e1,
            "constraint_e2": self.constraint_e2,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SchedulingProblem":
        return cls(
            num_shifts=data["num_shifts"],
            num_agents=data["num_agents"],
            constraint_e1=data.get("constraint_e1", True),
            constraint_e2=data.get("constraint_e2", True),
        )


@dataclass(frozen=True)
class KnapsackProblem:
    values: tuple[int, ...]
    weights: tuple[int, ...]
    capacity: int

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "weights", tuple(self.weights))

    @property
    def num_items(self) -> int:
        return len(self.values)

    @property
    def num_slack(self) -> int:
        return slack_bits(self.capacity)

    @property
    def num_variables(self) -> int:
        return self.num_items + self.num_slack

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "knapsack",
            "values": list(self.values),
            "weights": list(self.weights),
            "capacity": self.capacity,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "KnapsackProblem":
        return cls(
            values=tuple(data["values"]),
            weights=tuple(data["weights"]),
            capacity=data["capacity"],
        )


Problem = Union[SchedulingProblem, KnapsackProblem]


def slack_bits(capacity: int) -> int:
    """Number of binary slack variables able to represent 0..capacity."""
    if capacity <= 0:
        return 0
    # ceil(log2(W + 1)) without float rounding
    return int(capacity).bit_length()


def problem_from_dict(data: Mapping[str, Any]) -> Problem:
    kind = data.get("kind")
    if kind == "schedule":
        return SchedulingProblem.from_dict(data)
    if kind == "knapsack":
        return KnapsackProblem.from_dict(data)
    raise ValidationError([f"unknown problem kind {kind!r}"])


def _is_int(x: Any) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def validate(problem: Problem, max_qubits: int = DEFAULT_MAX_QUBITS) -> Problem:
    """Return ``problem`` unchanged if it is well formed, else raise ValidationError."""
    errors: list[str] = []
    if isinstance(problem, SchedulingProblem):
        if not _is_int(problem.num_shifts) or problem.num_shifts < 1:
            errors.append("num_shifts must be a positive integer")
        if not _is_int(problem.num_agents) or problem.num_agents < 1:
            errors.append("num_agents must be a positive integer")
        elif problem.constraint_e1 and problem.num_agents < 2:
            errors.append("constraint E1 needs at least 2 agents")
        if not errors and problem.num_variables > max_qubits:
            errors.append(
                f"qubit budget exceeded: needs {problem.num_variables}, max {max_qubits}"
            )
    elif isinstance(problem, KnapsackProblem):
        if len(problem.values) == 0 and len(problem.weights) == 0:
            errors.append("empty item list")
        elif len(problem.values) != len(problem.weights):
            errors.append("values and weights differ in length")
        if any(not _is_int(v) or v <= 0 for v in problem.values):
            errors.append("values must be positive integers")
        if any(not _is_int(w) or w <= 0 for w in problem.weights):
            errors.append("weights must be positive integers")
        if not _is_int(problem.capacity) or problem.capacity <= 0:
            errors.append("nonpositive capacity")
        if not errors and problem.num_variables > max_qubits:
            errors.append(
                f"qubit budget exceeded: needs {problem.num_variables}, max {max_qubits}"
            )
    else:
        errors.append(f"unsupported problem type {type(problem).__name__}")
    if errors:
        raise ValidationError(errors)
    return problem


# ---------------------------------------------------------------------------
# Formal models
# ---------------------------------------------------------------------------


def _pair(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class ConstraintGraph:
    num_vertices: int
    edges: frozenset[tuple[int, int]]
    vertex_labels: tuple[tuple[int, int], ...]

    def __post_init__(self):
        edges = frozenset(_pair(int(u), int(v)) for u, v in self.edges)
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop on vertex {u}")
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
                raise ValueError(f"edge ({u}, {v}) out of range")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(
            self, "vertex_labels", tuple(tuple(lbl) for lbl in self.vertex_labels)
        )

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def cut_value(self, bits: str) -> int:
        return sum(1 for u, v in self.edges if bits[u] != bits[v])

    def to_dict(self) -> dict[str, Any]:
        return {
            "num_vertices": self.num_vertices,
            "edges": [list(e) for e in self.sorted_edges()],
            "vertex_labels": [list(lbl) for lbl in self.vertex_labels],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ConstraintGraph":
        return cls(
            num_vertices=data["num_vertices"],
            edges=frozenset(tuple(e) for e in data["edges"]),
            vertex_labels=tuple(tuple(lbl) for lbl in data["vertex_labels"]),
        )


@dataclass(frozen=True)
class QuboModel:
    """Minimize ``offset + sum linear[i] x_i + sum quadratic[i,j] x_i x_j``."""

    n: int
    linear: dict[int, float] = field(default_factory=dict)
    quadratic: dict[tuple[int, int], float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self):
        quad: dict[tuple[int, int], float] = {}
        for (i, j), c in self.quadratic.items():
            if i == j:
                raise ValueError(f"quadratic term ({i}, {j}) needs distinct endpoints")
            key = _pair(int(i), int(j))
            quad[key] = quad.get(key, 0) + c
        object.__setattr__(self, "quadratic", quad)
        object.__setattr__(self, "linear", {int(i): c for i, c in self.linear.items()})
        for i in self.linear:
            if not 0 <= i < self.n:
                raise ValueError(f"linear index {i} out of range")
        for i, j in quad:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"quadratic index ({i}, {j}) out of range")

    def value(self, bits: Union[str, Iterable[int]]) -> float:
        x = [int(b) for b in bits]
        total = self.offset
        total += sum(c * x[i] for i, c in self.linear.items())
        total += sum(c * x[i] * x[j] for (i, j), c in self.quadratic.items())
        return total

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "linear": [[i, c] for i, c in sorted(self.linear.items())],
            "quadratic": [[i, j, c] for (i, j), c in sorted(self.quadratic.items())],
            "offset": self.offset,
            "sense": "min",
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "QuboModel":
        return cls(
            n=data["n"],
            linear={int(i): c for i, c in data["linear"]},
            quadratic={(int(i), int(j)): c for i, j, c in data["quadratic"]},
            offset=data["offset"],
        )


@dataclass(frozen=True, eq=False)
class IsingModel:
    """Spin Hamiltonian ``offset + sum h_i z_i + sum J_ij z_i z_j`` with z in {-1, +1}."""

    n: int
    h: dict[int, float] = field(default_factory=dict)
    j: dict[tuple[int, int], float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self):
        couplings: dict[tuple[int, int], float] = {}
        for (a, b), c in self.j.items():
            if a == b:
                raise ValueError(f"coupling ({a}, {b}) needs distinct qubits")
            key = _pair(int(a), int(b))
            couplings[key] = couplings.get(key, 0.0) + c
        object.__setattr__(self, "j", couplings)
        object.__setattr__(self, "h", {int(i): c for i, c in self.h.items()})
        if self.n < 1:
            raise ValueError("Ising model needs at least one qubit")
        for i in self.h:
            if not 0 <= i < self.n:
                raise ValueError(f"field index {i} out of range")
        for a, b in couplings:
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise ValueError(f"coupling ({a}, {b}) out of range")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IsingModel):
            return NotImplemented
        return (self.n, self.h, self.j, self.offset) == (
            other.n,
            other.h,
            other.j,
            other.offset,
        )

    def energy(self, spins: Iterable[int]) -> float:
        z = list(spins)
        total = self.offset
        total += sum(c * z[i] for i, c in self.h.items())
        total += sum(c * z[a] * z[b] for (a, b), c in self.j.items())
        return total

    def energy_of_bits(self, bits: str) -> float:
        return self.energy(1 - 2 * int(b) for b in bits)

    @cached_property
    def energies(self) -> np.ndarray:
        """Energy of every basis state; index bit for qubit k sits at position n-1-k."""
        n = self.n
        idx = np.arange(2**n)
        z = 1 - 2 * ((idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1)
        out = np.full(2**n, float(self.offset))
        for i, c in self.h.items():
            out += c * z[:, i]
        for (a, b), c in self.j.items():
            out += c * z[:, a] * z[:, b]
        return out

    def scaled(self, factor: float) -> "IsingModel":
        return IsingModel(
            n=self.n,
            h={i: factor * c for i, c in self.h.items()},
            j={k: factor * c for k, c in self.j.items()},
            offset=factor * self.offset,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "h": [[i, c] for i, c in sorted(self.h.items())],
            "j": [[a, b, c] for (a, b), c in sorted(self.j.items())],
            "offset": self.offset,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "IsingModel":
        return cls(
            n=data["n"],
            h={int(i): float(c) for i, c in data["h"]},
            j={(int(a), int(b)): float(c) for a, b, c in data["j"]},
            offset=float(data["offset"]),
        )


# ---------------------------------------------------------------------------
# Circuits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamRef:
    """An angle ``scale * <parameter>`` left free until binding."""

    name: str
    scale: float = 1.0

    def resolve(self, binding: Mapping[str, float]) -> float:
        try:
            return self.scale * float(binding[self.name])
        except KeyError:
            raise KeyError(f"unbound parameter {self.name!r}") from None


Angle = Union[float, ParamRef, None]


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: Angle = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if isinstance(self.angle, (int, np.floating)) and not isinstance(self.angle, bool):
            object.__setattr__(self, "angle", float(self.angle))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "qubits": list(self.qubits)}
        if isinstance(self.angle, ParamRef):
            out["param"] = self.angle.name
            out["scale"] = self.angle.scale
        elif self.angle is not None:
            out["angle"] = self.angle
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Gate":
        angle: Angle = None
        if "param" in data:
            angle = ParamRef(data["param"], data.get("scale", 1.0))
        elif "angle" in data:
            angle = float(data["angle"])
        return cls(data["kind"], tuple(data["qubits"]), angle)


@dataclass(frozen=True)
class QuantumCircuit:
    num_qubits: int
    gates: tuple[Gate, ...] = ()
    parameters: tuple[str, ...] = ()
    final: bool = False

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "parameters", tuple(self.parameters))
        errors = circuit_errors(self)
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def is_bound(self) -> bool:
        return not any(isinstance(g.angle, ParamRef) for g in self.gates)

    def bind(self, binding: Mapping[str, float], final: bool | None = None) -> "QuantumCircuit":
        """Replace every parameter reference by its literal angle."""
        gates = tuple(
            Gate(g.kind, g.qubits, g.angle.resolve(binding))
            if isinstance(g.angle, ParamRef)
            else g
            for g in self.gates
        )
        return QuantumCircuit(
            self.num_qubits, gates, (), self.final if final is None else final
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "num_qubits": self.num_qubits,
            "gates": [g.to_dict() for g in self.gates],
            "parameters": list(self.parameters),
            "final": self.final,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "QuantumCircuit":
        return cls(
            num_qubits=data["num_qubits"],
            gates=tuple(Gate.from_dict(g) for g in data["gates"]),
            parameters=tuple(data.get("parameters", ())),
            final=data.get("final", False),
        )


def circuit_errors(c: QuantumCircuit) -> list[str]:
    errors = []
    if c.num_qubits < 1:
        errors.append("circuit needs at least one qubit")
    params = set(c.parameters)
    for k, g in enumerate(c.gates):
        if g.kind not in GATE_KINDS:
            errors.append(f"gate {k}: unsupported kind {g.kind!r}")
            continue
        arity = 2 if g.kind == "CX" else 1
        if len(g.qubits) != arity:
            errors.append(f"gate {k}: {g.kind} takes {arity} operand(s)")
        if any(not 0 <= q < c.num_qubits for q in g.qubits):
            errors.append(f"gate {k}: operand out of range")
        if g.kind == "CX" and len(set(g.qubits)) != len(g.qubits):
            errors.append(f"gate {k}: CX operands must differ")
        if g.kind in ("RX", "RZ"):
            if g.angle is None:
                errors.append(f"gate {k}: {g.kind} needs an angle")
            elif isinstance(g.angle, ParamRef) and g.angle.name not in params:
                errors.append(f"gate {k}: undeclared parameter {g.angle.name!r}")
        elif g.angle is not None:
            errors.append(f"gate {k}: {g.kind} takes no angle")
    return errors


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeasurementCounts:
    """Histogram of sampled bitstrings; character k of each key is qubit k."""

    shots: int
    counts: dict[str, int]

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be positive")
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("counts must be nonnegative")
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to shots")
        if len({len(b) for b in self.counts}) > 1:
            raise ValueError("bitstrings differ in length")
        if any(set(b) - {"0", "1"} for b in self.counts):
            raise ValueError("bitstrings must contain only 0 and 1")

    @property
    def num_qubits(self) -> int:
        return len(next(iter(self.counts))) if self.counts else 0

    @classmethod
    def from_counts(cls, counts: Mapping[str, int]) -> "MeasurementCounts":
        counts = {b: int(c) for b, c in counts.items()}
        return cls(shots=sum(counts.values()), counts=counts)

    def to_dict(self) -> dict[str, Any]:
        return {"shots": self.shots, "counts": dict(sorted(self.counts.items()))}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MeasurementCounts":
        return cls(shots=data["shots"], counts={b: int(c) for b, c in data["counts"].items()})


@dataclass(frozen=True)
class DomainSolution:
    kind: str
    feasible: bool
    schedule: tuple[tuple[int, int], ...] = ()
    items: tuple[int, ...] = ()
    total_value: int = 0
    total_weight: int = 0
    degraded: bool = False
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "feasible": self.feasible}
        if self.kind == "schedule":
            out["schedule"] = [{"shift": s, "agent": a} for s, a in self.schedule]
        else:
            out["items"] = list(self.items)
            out["total_value"] = self.total_value
            out["total_weight"] = self.total_weight
            out["degraded"] = self.degraded
        out["diagnostics"] = dict(self.diagnostics)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DomainSolution":
        kind = data["kind"]
        if kind == "schedule":
            return cls(
                kind=kind,
                feasible=data["feasible"],
                schedule=tuple((e["shift"], e["agent"]) for e in data["schedule"]),
                diagnostics=dict(data.get("diagnostics", {})),
            )
        return cls(
            kind=kind,
            feasible=data["feasible"],
            items=tuple(data["items"]),
            total_value=data["total_value"],
            total_weight=data["total_weight"],
            degraded=data.get("degraded", False),
            diagnostics=dict(data.get("diagnostics", {})),
        )


@dataclass(frozen=True)
class DeviceDescriptor:
    id: str
    kind: str = "statevector-simulator"
    max_qubits: int = DEFAULT_MAX_QUBITS
    available: bool = True
    cost_per_shot: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.max_qubits < 1:
            raise ValueError("max_qubits must be at least 1")
        if self.cost_per_shot < 0:
            raise ValueError("cost_per_shot must be nonnegative")
        if self.kind != "statevector-simulator":
            raise ValueError(f"unsupported device kind {self.kind!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind,
            "max_qubits": self.max_qubits,
            "available": self.available,
            "cost_per_shot": self.cost_per_shot,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DeviceDescriptor":
        return cls(**{k: data[k] for k in data if k in cls.__dataclass_fields__})

