import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import lpsim.gates as gates
from lpsim.engine import from_matrix, from_vector, new_state
from lpsim.gates import (
    Circuit,
    Gate,
    GateStep,
    canonical_matrix,
    controlled_signal,
    expm_hermitian,
    generator_of,
    run_circuit,
    run_gate_step,
    run_gate_step_reference,
    standard_gate,
)
from lpsim.noise import NoiseSpec


def rand_state(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    rho = a @ a.conj().T
    return from_matrix(rho / np.trace(rho))


@pytest.mark.parametrize("name", ["X", "Y", "Z", "H", "S", "SDG", "T", "CNOT", "CZ", "SWAP"])
def test_fixed_gate_generators_reproduce_matrices(name):
    g = standard_gate(name, range(2 if name in ("CNOT", "CZ", "SWAP") else 1))
    assert np.allclose(g.unitary, canonical_matrix(name), atol=1e-12)


@pytest.mark.parametrize("name", ["RX", "RY", "RZ", "CRX", "CRY", "CRZ"])
def test_rotation_generators(name):
    theta = 0.731
    g = standard_gate(name, range(2 if name.startswith("C") else 1), theta)
    assert np.allclose(g.unitary, canonical_matrix(name, theta), atol=1e-12)


def test_signal_gate_phase_convention():
    g = standard_gate("SIG", (0,), "x", 0.4)
    plus = np.array([1, 1]) / math.sqrt(2)
    assert np.allclose(g.unitary @ plus, np.exp(0.4j) * plus)
    # exp(i theta sigma) = R(-2 theta)
    assert np.allclose(g.unitary, canonical_matrix("RX", -0.8))


def test_generator_of_inverts_expm():
    rng = np.random.default_rng(1)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    assert np.allclose(expm_hermitian(generator_of(q)), q, atol=1e-10)


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("bad", (0,), np.zeros((4, 4)))
    with pytest.raises(ValueError):
        Gate("bad", (0,), np.array([[0, 1], [0, 0]], dtype=complex))
    with pytest.raises(ValueError):
        GateStep((standard_gate("X", (0,)), standard_gate("CNOT", (0, 1))))
    with pytest.raises(ValueError):
        Circuit.sequential(1, [standard_gate("CNOT", (0, 1))])


def test_circuit_algebra_and_dump():
    c = Circuit.sequential(2, [standard_gate("H", (0,)), standard_gate("CNOT", (0, 1))])
    assert (c + c).depth == 4 and (c * 3).depth == 6
    assert "CNOT[0, 1]" in c.dump()
    bell = c.unitary() @ np.array([1, 0, 0, 0])
    assert np.allclose(bell, np.array([1, 0, 0, 1]) / math.sqrt(2))


def test_noiseless_gate_step_is_the_unitary():
    s = rand_state(3, 0)
    step = GateStep((standard_gate("CNOT", (2, 0)), standard_gate("H", (1,))))
    out = run_gate_step(s, step, NoiseSpec.noiseless(3))
    u = Circuit(3, (step,)).unitary()
    assert np.allclose(out.matrix, u @ s.matrix @ u.conj().T, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_fast_path_matches_literal_loop(seed, idle):
    rng = np.random.default_rng(seed)
    t1 = tuple(float(x) for x in rng.uniform(2, 50, 4))
    t2 = tuple(float(x) for x in rng.uniform(2, 50, 4))
    t1 = (math.inf,) + t1[1:]
    spec = NoiseSpec(t1, t2, n_sub=20, idle_noise=idle)
    s = rand_state(4, seed)
    step = GateStep((standard_gate("CNOT", (3, 1)), standard_gate("RY", (0,), 0.3)))
    a = run_gate_step(s, step, spec)
    b = run_gate_step_reference(s, step, spec)
    assert np.abs(a.matrix - b.matrix).max() < 1e-12


def test_large_gate_loop_path_matches_reference(monkeypatch):
    monkeypatch.setattr(gates, "SUPEROP_MAX_QUBITS", 1)
    spec = NoiseSpec.uniform(3, t1=9.0, t2=4.0)
    s = rand_state(3, 5)
    step = GateStep((standard_gate("CNOT", (0, 2)),))
    a = run_gate_step(s, step, spec)
    b = run_gate_step_reference(s, step, spec)
    assert np.abs(a.matrix - b.matrix).max() < 1e-12


def test_idle_step_applies_full_gate_time_of_dephasing():
    spec = NoiseSpec.uniform(1, t2=10.0)
    plus = from_vector(np.array([1, 1]) / math.sqrt(2))
    out = run_gate_step(plus, GateStep(), spec)
    assert abs(out.matrix[0, 1]) == pytest.approx(0.5 * math.exp(-0.1), abs=1e-12)


def test_idle_noise_switch():
    spec = NoiseSpec.uniform(2, t2=10.0, idle_noise=False)
    plus = from_vector(np.kron([1, 1], [1, 1]) / 2)
    out = run_gate_step(plus, GateStep((standard_gate("I", (1,)),)), spec)
    red = out.matrix.reshape(2, 2, 2, 2)
    assert abs(np.einsum("ajbj->ab", red)[0, 1]) == pytest.approx(0.5)  # qubit 0 untouched


def test_controlled_signal_accelerated_vs_repeated():
    a = controlled_signal(3, 0.2, "z", True, 0, 1, 2)
    b = controlled_signal(3, 0.2, "z", False, 0, 1, 2)
    assert a.depth == 1 and b.depth == 8
    assert np.allclose(a.unitary(), b.unitary(), atol=1e-12)
    with pytest.raises(ValueError):
        controlled_signal(1, 0.2, "y", True, 0, 1, 2)


def test_run_circuit_checks_register():
    with pytest.raises(ValueError):
        run_circuit(new_state(1), Circuit.idle(2, 1), NoiseSpec.noiseless(1))
