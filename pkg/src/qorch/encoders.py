"""Domain <-> math translations: problem mapping and solution mapping.

Bit/vertex convention: vertex ``v = (shift-1)*num_agents + (agent-1)`` and the
leftmost character of a bitstring is qubit 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

from .domain import (
    ConstraintGraph,
    DomainSolution,
    IsingModel,
    KnapsackProblem,
    MeasurementCounts,
    QuboModel,
    SchedulingProblem,
    slack_bits,
)

DECODE_MODES = ("argmax_count", "best_sampled")


@dataclass(frozen=True)
class EncodingMetadata:
    kind: str  # "maxcut-schedule" | "knapsack-slack"
    graph: ConstraintGraph | None = None
    num_items: int = 0
    num_slack: int = 0
    slack_coefficients: tuple[int, ...] = ()
    penalty: int = 0

    @property
    def num_qubits(self) -> int:
        if self.kind == "maxcut-schedule":
            return self.graph.num_vertices
        return self.num_items + self.num_slack

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "maxcut-schedule":
            return {"kind": self.kind, "graph": self.graph.to_dict()}
        return {
            "kind": self.kind,
            "num_items": self.num_items,
            "num_slack": self.num_slack,
            "slack_coefficients": list(self.slack_coefficients),
            "penalty": self.penalty,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EncodingMetadata":
        if data["kind"] == "maxcut-schedule":
            return cls(kind=data["kind"], graph=ConstraintGraph.from_dict(data["graph"]))
        if data["kind"] == "knapsack-slack":
            return cls(
                kind=data["kind"],
                num_items=data["num_items"],
                num_slack=data["num_slack"],
                slack_coefficients=tuple(data["slack_coefficients"]),
                penalty=data["penalty"],
            )
        raise ValueError(f"unknown encoding kind {data['kind']!r}")


def vertex_index(shift: int, agent: int, num_agents: int) -> int:
    return (shift - 1) * num_agents + (agent - 1)


def build_constraint_graph(p: SchedulingProblem) -> ConstraintGraph:
    labels = tuple(
        (s, a) for s in range(1, p.num_shifts + 1) for a in range(1, p.num_agents + 1)
    )
    edges = set()
    if p.constraint_e1:
        # one agent per shift: same-shift vertices must be split
        for s in range(1, p.num_shifts + 1):
            for a in range(1, p.num_agents + 1):
                for b in range(a + 1, p.num_agents + 1):
                    edges.add(
                        (vertex_index(s, a, p.num_agents), vertex_index(s, b, p.num_agents))
                    )
    if p.constraint_e2:
        # an agent never works two consecutive shifts
        for s in range(1, p.num_shifts):
            for a in range(1, p.num_agents + 1):
                edges.add(
                    (vertex_index(s, a, p.num_agents), vertex_index(s + 1, a, p.num_agents))
                )
    return ConstraintGraph(len(labels), frozenset(edges), labels)


def maxcut_to_ising(g: ConstraintGraph) -> tuple[IsingModel, EncodingMetadata]:
    """Ising model whose energy is minus the cut size of each spin assignment."""
    if g.num_vertices < 1:
        raise ValueError("graph needs at least one vertex")
    model = IsingModel(
        n=g.num_vertices,
        h={},
        j={e: 0.5 for e in g.sorted_edges()},
        offset=-len(g.edges) / 2,
    )
    return model, EncodingMetadata(kind="maxcut-schedule", graph=g)


def knapsack_to_qubo(p: KnapsackProblem) -> tuple[QuboModel, EncodingMetadata]:
    """Penalized knapsack QUBO over items followed by binary slack variables.

    Minimizes ``-sum v_i x_i + A (sum w_i x_i + sum 2^k s_k - W)^2`` with
    ``A = sum(v) + 1``. All coefficients are integers.
    """
    n = p.num_items
    m = slack_bits(p.capacity)
    slack = tuple(2**k for k in range(m))
    penalty = sum(p.values) + 1
    W = p.capacity
    coeff = list(p.weights) + list(slack)

    linear = {}
    for i, a in enumerate(coeff):
        gain = -p.values[i] if i < n else 0
        linear[i] = gain + penalty * (a * a - 2 * W * a)
    quadratic = {
        (i, j): 2 * penalty * coeff[i] * coeff[j]
        for i in range(len(coeff))
        for j in range(i + 1, len(coeff))
    }
    qubo = QuboModel(n=n + m, linear=linear, quadratic=quadratic, offset=penalty * W * W)
    meta = EncodingMetadata(
        kind="knapsack-slack",
        num_items=n,
        num_slack=m,
        slack_coefficients=slack,
        penalty=penalty,
    )
    return qubo, meta


def qubo_to_ising(q: QuboModel) -> IsingModel:
    """Substitute ``x_i = (1 - z_i) / 2``; energies agree pointwise."""
    h = {i: -c / 2 for i, c in q.linear.items()}
    offset = q.offset + sum(q.linear.values()) / 2
    j = {}
    for (a, b), c in q.quadratic.items():
        j[(a, b)] = c / 4
        h[a] = h.get(a, 0.0) - c / 4
        h[b] = h.get(b, 0.0) - c / 4
        offset += c / 4
    h = {i: c for i, c in h.items() if c != 0}
    j = {k: c for k, c in j.items() if c != 0}
    return IsingModel(n=q.n, h=h, j=j, offset=offset)


# ---------------------------------------------------------------------------
# Solution mapping
# ---------------------------------------------------------------------------


def _check_counts(counts: MeasurementCounts, width: int) -> None:
    if not counts.counts:
        raise ValueError("empty counts map")
    if counts.num_qubits != width:
        raise ValueError(f"bitstring length {counts.num_qubits} != {width} qubits")


def _top_by_count(counts: Mapping[str, int]) -> str:
    # highest count first, lexicographically smallest on ties
    return min(counts, key=lambda b: (-counts[b], b))


def schedule_from_bits(bits: str, p: SchedulingProblem) -> tuple[list[tuple[int, int]], list[str]]:
    """Included (shift, agent) pairs plus a list of constraint violations."""
    assignment = []
    violations = []
    per_shift: dict[int, list[int]] = {s: [] for s in range(1, p.num_shifts + 1)}
    for v, bit in enumerate(bits):
        if bit == "1":
            s, a = divmod(v, p.num_agents)
            assignment.append((s + 1, a + 1))
            per_shift[s + 1].append(a + 1)
    for s, agents in per_shift.items():
        if len(agents) != 1:
            violations.append(f"shift {s} has {len(agents)} agents")
    if p.constraint_e2:
        for s in range(1, p.num_shifts):
            for a in set(per_shift[s]) & set(per_shift[s + 1]):
                violations.append(f"agent {a} works consecutive shifts {s} and {s + 1}")
    return assignment, violations


def decode_schedule(
    counts: MeasurementCounts,
    meta: EncodingMetadata,
    p: SchedulingProblem,
    mode: str = "best_sampled",
    trace_length: int = 0,
) -> DomainSolution:
    graph = meta.graph
    _check_counts(counts, graph.num_vertices)
    hist = counts.counts
    if mode == "argmax_count":
        bits = _top_by_count(hist)
    elif mode == "best_sampled":
        bits = min(hist, key=lambda b: (-graph.cut_value(b), -hist[b], b))
    else:
        raise ValueError(f"unknown decode mode {mode!r}")
    assignment, violations = schedule_from_bits(bits, p)
    e1_ok = not any(v.startswith("shift") for v in violations)
    return DomainSolution(
        kind="schedule",
        feasible=e1_ok,
        schedule=tuple(assignment),
        diagnostics={
            "bitstring": bits,
            "count": hist[bits],
            "objective": graph.cut_value(bits),
            "max_possible_cut": len(graph.edges),
            "violations": violations,
            "mode": mode,
            "trace_length": trace_length,
        },
    )


def knapsack_totals(items_bits: str, p: KnapsackProblem) -> tuple[int, int]:
    value = sum(v for v, b in zip(p.values, items_bits) if b == "1")
    weight = sum(w for w, b in zip(p.weights, items_bits) if b == "1")
    return value, weight


def decode_knapsack(
    counts: MeasurementCounts,
    meta: EncodingMetadata,
    p: KnapsackProblem,
    mode: str = "best_sampled",
    trace_length: int = 0,
) -> DomainSolution:
    n = meta.num_items
    _check_counts(counts, n + meta.num_slack)
    hist = counts.counts
    # slack bits carry no meaning for the caller; fold them away
    by_items: dict[str, int] = {}
    for bits, c in hist.items():
        by_items[bits[:n]] = by_items.get(bits[:n], 0) + c

    chosen_full = None
    if mode == "argmax_count":
        chosen_full = _top_by_count(hist)
        chosen = chosen_full[:n]
        if knapsack_totals(chosen, p)[1] > p.capacity:
            chosen = None
    elif mode == "best_sampled":
        feasible = [s for s in by_items if knapsack_totals(s, p)[1] <= p.capacity]
        chosen = (
            min(feasible, key=lambda s: (-knapsack_totals(s, p)[0], -by_items[s], s))
            if feasible
            else None
        )
    else:
        raise ValueError(f"unknown decode mode {mode!r}")

    diagnostics = {"mode": mode, "trace_length": trace_length}
    if chosen is None:
        diagnostics.update(
            bitstring=chosen_full, count=hist.get(chosen_full, 0) if chosen_full else 0,
            objective=0, reason="no feasible sample",
        )
        return DomainSolution(
            kind="knapsack", feasible=False, degraded=True, diagnostics=diagnostics
        )
    value, weight = knapsack_totals(chosen, p)
    diagnostics.update(
        bitstring=chosen_full or chosen,
        item_bits=chosen,
        count=hist[chosen_full] if chosen_full else by_items[chosen],
        objective=value,
    )
    return DomainSolution(
        kind="knapsack",
        feasible=True,
        items=tuple(i + 1 for i, b in enumerate(chosen) if b == "1"),
        total_value=value,
        total_weight=weight,
        diagnostics=diagnostics,
    )
