"""Dense statevector simulation of the {H, RX, RZ, CX} gate set.

Amplitude index ``b`` is read as an n-digit binary string whose leftmost digit
is qubit 0, so ``format(b, f"0{n}b")`` is exactly the measured bitstring.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .domain import Gate, IsingModel, MeasurementCounts, ParamRef, QuantumCircuit

MAX_SIMULATED_QUBITS = 24

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


class SimulationError(ValueError):
    pass


@dataclass
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    @classmethod
    def zero(cls, n: int) -> "StateVector":
        if n > MAX_SIMULATED_QUBITS:
            raise SimulationError(
                f"{n} qubits exceeds simulator cap of {MAX_SIMULATED_QUBITS}"
            )
        amps = np.zeros(2**n, dtype=complex)
        amps[0] = 1.0
        return cls(n, amps)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.probabilities())))

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())


def rx_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def _angle(gate: Gate, binding: Mapping[str, float]) -> float:
    if isinstance(gate.angle, ParamRef):
        try:
            return gate.angle.resolve(binding)
        except KeyError as exc:
            raise SimulationError(exc.args[0]) from None
    return float(gate.angle)


def apply_gate(
    state: StateVector, gate: Gate, binding: Mapping[str, float] | None = None
) -> None:
    """Apply one gate in place."""
    binding = binding or {}
    n = state.num_qubits
    if gate.kind == "CX":
        control, target = gate.qubits
        psi = state.amplitudes.reshape((2,) * n)
        index = [slice(None)] * n
        index[control] = 1
        sub = psi[tuple(index)]
        axis = target if target < control else target - 1
        sub[...] = np.flip(sub, axis=axis).copy()
        return

    (q,) = gate.qubits
    psi = state.amplitudes.reshape(2**q, 2, 2 ** (n - q - 1))
    if gate.kind == "RZ":
        theta = _angle(gate, binding)
        psi[:, 0, :] *= np.exp(-0.5j * theta)
        psi[:, 1, :] *= np.exp(0.5j * theta)
        return
    if gate.kind == "H":
        m = _H
    elif gate.kind == "RX":
        m = rx_matrix(_angle(gate, binding))
    else:
        raise SimulationError(f"unsupported gate {gate.kind!r}")
    a0 = psi[:, 0, :].copy()
    a1 = psi[:, 1, :]
    psi[:, 0, :] = m[0, 0] * a0 + m[0, 1] * a1
    psi[:, 1, :] = m[1, 0] * a0 + m[1, 1] * a1


def simulate(c: QuantumCircuit, binding: Mapping[str, float] | None = None) -> StateVector:
    """Run ``c`` from |0...0> with free parameters taken from ``binding``."""
    binding = binding or {}
    missing = [p for p in c.parameters if p not in binding]
    if missing:
        raise SimulationError(f"unbound parameter {missing[0]!r}")
    state = StateVector.zero(c.num_qubits)
    for gate in c.gates:
        apply_gate(state, gate, binding)
    return state


def expectation(s: StateVector, m: IsingModel) -> float:
    """Ising energy averaged over the measurement distribution of ``s``."""
    if s.num_qubits != m.n:
        raise SimulationError(
            f"dimension mismatch: state has {s.num_qubits} qubits, model {m.n}"
        )
    return float(np.dot(s.probabilities(), m.energies))


def sample(s: StateVector, shots: int, seed: int | None = None) -> MeasurementCounts:
    """Draw ``shots`` bitstrings from |amplitude|^2, deterministic per seed."""
    if shots < 1:
        raise SimulationError("shots must be positive")
    probs = s.probabilities()
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(shots, probs)
    n = s.num_qubits
    counts = {format(int(b), f"0{n}b"): int(draws[b]) for b in np.flatnonzero(draws)}
    return MeasurementCounts(shots=shots, counts=counts)
