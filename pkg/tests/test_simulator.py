import math
import random

import numpy as np
import pytest

from qorch.domain import Gate, IsingModel, ParamRef, QuantumCircuit
from qorch.simulator import SimulationError, StateVector, apply_gate, expectation, sample, simulate

from oracles import brute_expectation, dense_state

INV = 1 / math.sqrt(2)


def circ(n, *gates, params=()):
    return QuantumCircuit(n, tuple(gates), tuple(params))


def random_circuit(rng, n, depth):
    gates = []
    for _ in range(depth):
        kind = rng.choice(["H", "RX", "RZ", "CX"] if n > 1 else ["H", "RX", "RZ"])
        if kind == "CX":
            gates.append(Gate("CX", tuple(rng.sample(range(n), 2))))
        elif kind == "H":
            gates.append(Gate("H", (rng.randrange(n),)))
        else:
            gates.append(Gate(kind, (rng.randrange(n),), rng.uniform(-2 * math.pi, 2 * math.pi)))
    return QuantumCircuit(n, tuple(gates), ())


def test_hadamard():
    s = simulate(circ(1, Gate("H", (0,))))
    assert np.allclose(s.amplitudes, [INV, INV], atol=1e-12)


def test_rx_pi():
    s = simulate(circ(1, Gate("RX", (0,), math.pi)))
    assert np.allclose(s.amplitudes, [0, -1j], atol=1e-12)


def test_bell_state():
    s = simulate(circ(2, Gate("H", (0,)), Gate("CX", (0, 1))))
    assert np.allclose(s.amplitudes, [INV, 0, 0, INV], atol=1e-12)


def test_cx_control_is_leftmost_bit():
    # X on qubit 0 via H-RZ(pi)-H, then CX(0,1): |00> -> |11>, up to phase
    s = simulate(circ(2, Gate("RX", (0,), math.pi), Gate("CX", (0, 1))))
    assert abs(s.amplitudes[0b11]) == pytest.approx(1.0)
    s = simulate(circ(2, Gate("RX", (1,), math.pi), Gate("CX", (0, 1))))
    assert abs(s.amplitudes[0b01]) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(20))
def test_matches_dense_oracle(seed):
    rng = random.Random(seed)
    c = random_circuit(rng, rng.randint(1, 5), 25)
    assert np.allclose(simulate(c).amplitudes, dense_state(c), atol=1e-10)


def test_norm_preserved_every_gate():
    rng = random.Random(7)
    for _ in range(100):
        c = random_circuit(rng, rng.randint(1, 6), 20)
        s = StateVector.zero(c.num_qubits)
        for g in c.gates:
            apply_gate(s, g)
            assert abs(s.norm() - 1) < 1e-9


def test_inverse_round_trip():
    rng = random.Random(3)
    inverse = {"H": lambda g: g, "CX": lambda g: g, "RX": lambda g: Gate("RX", g.qubits, -g.angle),
               "RZ": lambda g: Gate("RZ", g.qubits, -g.angle)}
    for _ in range(50):
        c = random_circuit(rng, rng.randint(1, 5), 15)
        s = StateVector.zero(c.num_qubits)
        start = s.amplitudes.copy()
        for g in c.gates:
            apply_gate(s, g)
        for g in reversed(c.gates):
            apply_gate(s, inverse[g.kind](g))
        assert np.max(np.abs(s.amplitudes - start)) < 1e-9


def test_cx_rz_cx_is_zz_phase():
    theta = 0.7
    s = simulate(circ(2, Gate("H", (0,)), Gate("H", (1,)), Gate("CX", (0, 1)),
                      Gate("RZ", (1,), theta), Gate("CX", (0, 1))))
    parity = np.array([1, -1, -1, 1])
    assert np.allclose(s.amplitudes, 0.5 * np.exp(-0.5j * theta * parity), atol=1e-12)


def test_unbound_parameter():
    c = circ(1, Gate("RZ", (0,), ParamRef("g")), params=("g",))
    with pytest.raises(SimulationError, match="unbound parameter 'g'"):
        simulate(c)
    assert simulate(c, {"g": 0.0}).norm() == pytest.approx(1)


def test_basis_expectation():
    m = IsingModel(2, {}, {(0, 1): 0.5}, -0.5)
    s = simulate(circ(2, Gate("RX", (0,), math.pi)))
    assert expectation(s, m) == pytest.approx(-1)


def test_expectation_scales_linearly():
    rng = random.Random(1)
    m = IsingModel(3, {0: 0.3, 2: -1.0}, {(0, 1): 0.5, (1, 2): 2.0}, 0.25)
    s = simulate(random_circuit(rng, 3, 12))
    assert expectation(s, m.scaled(-2.5)) == pytest.approx(-2.5 * expectation(s, m))


@pytest.mark.parametrize("seed", range(10))
def test_expectation_matches_basis_sum(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 7)
    c = random_circuit(rng, n, 20)
    h = {i: rng.uniform(-1, 1) for i in range(n) if rng.random() < 0.5}
    j = {(a, b): rng.uniform(-1, 1) for a in range(n) for b in range(a + 1, n) if rng.random() < 0.5}
    m = IsingModel(n, h, j, rng.uniform(-1, 1))
    s = simulate(c)
    assert abs(expectation(s, m) - brute_expectation(s.amplitudes, m)) < 1e-9


def test_dimension_mismatch():
    with pytest.raises(SimulationError, match="dimension mismatch"):
        expectation(StateVector.zero(2), IsingModel(3, {}, {}, 0))


def test_sample_basis_state():
    s = simulate(circ(2, Gate("RX", (1,), math.pi)))
    assert sample(s, 1000, seed=0).counts == {"01": 1000}


def test_sample_bell_frequencies():
    s = simulate(circ(2, Gate("H", (0,)), Gate("CX", (0, 1))))
    counts = sample(s, 100_000, seed=11)
    assert set(counts.counts) == {"00", "11"}
    for k in ("00", "11"):
        assert abs(counts.counts[k] / 100_000 - 0.5) < 0.01


def test_sample_deterministic():
    rng = random.Random(5)
    s = simulate(random_circuit(rng, 4, 20))
    assert sample(s, 500, seed=9) == sample(s, 500, seed=9)


def test_sample_bad_shots():
    with pytest.raises(SimulationError):
        sample(StateVector.zero(1), 0, seed=1)
