import numpy as np
import pytest

from qorch.domain import IsingModel, ParamRef
from qorch.encoders import build_constraint_graph, maxcut_to_ising
from qorch.qaoa import QaoaConfig, build_qaoa_circuit, parameter_names, refine
from qorch.simulator import expectation, simulate

from oracles import brute_expectation, dense_state

EDGE = IsingModel(2, {}, {(0, 1): 0.5}, -0.5)


def grid_minimum(model, points=100):
    c = build_qaoa_circuit(model, 1)
    best = np.inf
    for g in np.linspace(0, np.pi, points, endpoint=False):
        for b in np.linspace(0, np.pi, points, endpoint=False):
            psi = dense_state(c, {"gamma_1": g, "beta_1": b})
            best = min(best, brute_expectation(psi, model))
    return best


def test_parameter_order():
    assert parameter_names(2) == ("gamma_1", "gamma_2", "beta_1", "beta_2")


def test_smallest_ansatz():
    c = build_qaoa_circuit(IsingModel(1, {0: 1.0}, {}, 0.0), 1)
    assert [g.kind for g in c.gates] == ["H", "RZ", "RX"]
    assert c.gates[1].angle == ParamRef("gamma_1", 2.0)
    assert c.gates[2].angle == ParamRef("beta_1", 2.0)
    assert c.parameters == ("gamma_1", "beta_1")


def test_single_edge_ansatz():
    c = build_qaoa_circuit(EDGE, 1)
    assert [(g.kind, g.qubits) for g in c.gates] == [
        ("H", (0,)), ("H", (1,)), ("CX", (0, 1)), ("RZ", (1,)), ("CX", (0, 1)), ("RX", (0,)), ("RX", (1,)),
    ]
    assert c.gates[3].angle == ParamRef("gamma_1", 1.0)


def test_five_by_two_gate_count(five_by_two):
    m, _ = maxcut_to_ising(build_constraint_graph(five_by_two))
    c = build_qaoa_circuit(m, 2)
    assert len(c.gates) == 108 and len(c.parameters) == 4


def test_ansatz_state_matches_dense_oracle():
    m = IsingModel(4, {0: 0.4, 3: -1.0}, {(0, 1): 0.5, (1, 3): -0.7, (0, 2): 1.1}, 0.3)
    c = build_qaoa_circuit(m, 2)
    binding = dict(zip(c.parameters, [0.3, -1.2, 0.8, 0.45]))
    assert np.allclose(simulate(c, binding).amplitudes, dense_state(c, binding), atol=1e-10)


def test_uniform_superposition_level(five_by_two):
    m, _ = maxcut_to_ising(build_constraint_graph(five_by_two))
    c = build_qaoa_circuit(m, 1)
    # beta = 0 and gamma = 0 leave |+>^n
    assert expectation(simulate(c, {"gamma_1": 0.0, "beta_1": 0.0}), m) == pytest.approx(-6.5, abs=1e-9)


def test_single_edge_refine_matches_grid():
    oracle = grid_minimum(EDGE)
    assert oracle == pytest.approx(-1, abs=0.02)
    trace = refine(build_qaoa_circuit(EDGE, 1), EDGE, QaoaConfig(layers=1))
    assert trace.best_expectation == pytest.approx(oracle, abs=0.02)
    assert trace.best_expectation == pytest.approx(-1, abs=0.02)


@pytest.mark.parametrize("seed", range(3))
def test_refine_never_worse_than_fixed_start(seed, five_by_two):
    m, _ = maxcut_to_ising(build_constraint_graph(five_by_two))
    trace = refine(build_qaoa_circuit(m, 2), m, QaoaConfig(rng_seed=seed, max_evals=60, restarts=2))
    assert trace.best_expectation <= trace.initial_expectation
    assert len(trace) <= 120
    binding = trace.best_parameters
    assert expectation(simulate(build_qaoa_circuit(m, 2), binding), m) == pytest.approx(trace.best_expectation)


def test_refine_budget_respected():
    trace = refine(build_qaoa_circuit(EDGE, 1), EDGE, QaoaConfig(layers=1, max_evals=7, restarts=3))
    assert len(trace) == 21


def test_refine_deterministic():
    cfg = QaoaConfig(layers=1, max_evals=40, rng_seed=4)
    a = refine(build_qaoa_circuit(EDGE, 1), EDGE, cfg)
    b = refine(build_qaoa_circuit(EDGE, 1), EDGE, cfg)
    assert a.best_parameters == b.best_parameters


def test_zero_ising_any_binding():
    m = IsingModel(2, {}, {}, 1.5)
    trace = refine(build_qaoa_circuit(m, 1), m, QaoaConfig(layers=1, max_evals=10, restarts=1))
    assert trace.best_expectation == pytest.approx(1.5)


def test_parameter_mismatch():
    with pytest.raises(ValueError, match="parameter mismatch"):
        refine(build_qaoa_circuit(EDGE, 1), EDGE, QaoaConfig(layers=2))


def test_config_round_trip():
    cfg = QaoaConfig(layers=3, rng_seed=7)
    assert QaoaConfig.from_dict(cfg.to_dict()) == cfg
    assert QaoaConfig.from_dict(None) == QaoaConfig()
