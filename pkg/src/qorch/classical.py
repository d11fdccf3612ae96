"""Exact classical solvers behind the classical strategy."""

from __future__ import annotations

import numpy as np

from .domain import ConstraintGraph, DomainSolution, KnapsackProblem, SchedulingProblem
from .encoders import build_constraint_graph, schedule_from_bits

BRUTE_FORCE_CAP = 20


def max_cut_exhaustive(g: ConstraintGraph) -> tuple[list[str], int]:
    """All maximum-cut bitstrings (sorted) and the maximum cut value."""
    n = g.num_vertices
    idx = np.arange(2**n, dtype=np.int64)
    cut = np.zeros(2**n, dtype=np.int64)
    for u, v in g.edges:
        cut += ((idx >> (n - 1 - u)) ^ (idx >> (n - 1 - v))) & 1
    best = int(cut.max())
    winners = sorted(format(int(b), f"0{n}b") for b in np.flatnonzero(cut == best))
    return winners, best


def solve_schedule(p: SchedulingProblem) -> DomainSolution:
    """Maximum cut of the constraint graph, preferring the fewest violations."""
    g = build_constraint_graph(p)
    winners, best = max_cut_exhaustive(g)
    ranked = []
    for bits in winners:
        assignment, violations = schedule_from_bits(bits, p)
        ranked.append((len(violations), bits, assignment, violations))
    _, bits, assignment, violations = min(ranked, key=lambda r: (r[0], r[1]))
    return DomainSolution(
        kind="schedule",
        feasible=not any(v.startswith("shift") for v in violations),
        schedule=tuple(assignment),
        diagnostics={
            "bitstring": bits,
            "objective": best,
            "max_possible_cut": len(g.edges),
            "violations": violations,
            "optimal_bitstrings": len(winners),
            "solver": "exhaustive-max-cut",
        },
    )


def knapsack_dp(p: KnapsackProblem) -> tuple[int, tuple[int, ...]]:
    """Optimal value and 1-based item numbers via the items x capacity table."""
    n, W = p.num_items, p.capacity
    best = [[0] * (W + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        v, w = p.values[i - 1], p.weights[i - 1]
        row, prev = best[i], best[i - 1]
        for c in range(W + 1):
            row[c] = prev[c]
            if w <= c and prev[c - w] + v > row[c]:
                row[c] = prev[c - w] + v
    chosen = []
    c = W
    for i in range(n, 0, -1):
        if best[i][c] != best[i - 1][c]:
            chosen.append(i)
            c -= p.weights[i - 1]
    return best[n][W], tuple(sorted(chosen))


def solve_knapsack(p: KnapsackProblem) -> DomainSolution:
    value, items = knapsack_dp(p)
    weight = sum(p.weights[i - 1] for i in items)
    return DomainSolution(
        kind="knapsack",
        feasible=True,
        items=items,
        total_value=value,
        total_weight=weight,
        diagnostics={"objective": value, "solver": "dynamic-programming"},
    )
