import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quencode.errors import ConfigError, DimensionError
from quencode.simcore import (
    Circuit,
    DensityMatrix,
    GateOp,
    StateVector,
    apply_gate,
    cnot,
    cry,
    cswap,
    cz,
    gate_matrix,
    h,
    idle,
    measure_probability,
    measure_probability_density,
    run_circuit,
    run_circuit_density,
    rx,
    ry,
    rz,
    simulate_batch,
    to_density,
    x,
    zero_state,
)

angles = st.floats(min_value=-10, max_value=10, allow_nan=False)


def dense_unitary(gate, n):
    """Reference: embed the gate by building its full matrix column by column."""
    dim = 1 << n
    u = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        basis = np.zeros(dim, dtype=complex)
        basis[col] = 1
        u[:, col] = apply_gate(StateVector(n, basis), gate).amplitudes
    return u


def test_hadamard_on_zero():
    s = run_circuit(Circuit(1, [h(0)]))
    assert np.allclose(s.amplitudes, [1 / math.sqrt(2)] * 2)


def test_x_flips_little_endian_bit():
    s = run_circuit(Circuit(3, [x(1)]))
    assert np.argmax(np.abs(s.amplitudes)) == 0b010


def test_bell_state():
    s = run_circuit(Circuit(2, [h(0), cnot(0, 1)]))
    assert np.allclose(s.probabilities(), [0.5, 0, 0, 0.5])


def test_cswap_swaps_only_when_control_set():
    s = run_circuit(Circuit(3, [x(0), x(1), cswap(0, 1, 2)]))
    assert np.argmax(np.abs(s.amplitudes)) == 0b101
    s = run_circuit(Circuit(3, [x(1), cswap(0, 1, 2)]))
    assert np.argmax(np.abs(s.amplitudes)) == 0b010


def test_measure_probability_ry():
    s = run_circuit(Circuit(2, [ry(1, 1.2)]))
    assert measure_probability(s, 1, 0) == pytest.approx(math.cos(0.6) ** 2, abs=1e-14)


def test_idle_is_identity_on_statevector():
    s1 = run_circuit(Circuit(2, [h(0), idle(0, 3.0), cnot(0, 1)]))
    s2 = run_circuit(Circuit(2, [h(0), cnot(0, 1)]))
    assert np.allclose(s1.amplitudes, s2.amplitudes)


def test_gate_validation():
    with pytest.raises(ConfigError):
        GateOp("FOO", (0,))
    with pytest.raises(DimensionError):
        GateOp("CNOT", (1, 1))
    with pytest.raises(ConfigError):
        GateOp("RY", (0,))
    with pytest.raises(DimensionError):
        run_circuit(Circuit(2, [x(3)]))


def test_state_normalization_checked():
    with pytest.raises(Exception):
        StateVector(1, [1.0, 1.0])


@pytest.mark.parametrize("gate", [h(0), x(1), ry(2, 0.3), rz(0, 1.1), rx(1, -0.4),
                                  cnot(2, 0), cz(0, 2), cry(1, 2, 0.7), cswap(2, 0, 1)])
def test_every_gate_unitary(gate):
    u = dense_unitary(gate, 3)
    assert np.allclose(u.conj().T @ u, np.eye(8), atol=1e-12)


def test_cry_matches_controlled_ry():
    u = dense_unitary(cry(0, 1, 0.9), 2)
    c, s = math.cos(0.45), math.sin(0.45)
    # basis index = q1*2 + q0; control q0
    expected = np.eye(4, dtype=complex)
    expected[np.ix_([1, 3], [1, 3])] = [[c, -s], [s, c]]
    assert np.allclose(u, expected)


def test_local_gate_matrix_shapes():
    assert gate_matrix(cswap(0, 1, 2)).shape == (8, 8)
    assert gate_matrix(cz(0, 1)).shape == (4, 4)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["RY", "RZ", "RX", "H", "CNOT", "CSWAP"]),
                          st.permutations([0, 1, 2]), angles), min_size=1, max_size=12))
def test_norm_preserved(ops):
    circ = Circuit(3)
    for kind, perm, th in ops:
        if kind in ("RY", "RZ", "RX"):
            circ.append(GateOp(kind, (perm[0],), th))
        elif kind == "H":
            circ.append(h(perm[0]))
        elif kind == "CNOT":
            circ.append(cnot(perm[0], perm[1]))
        else:
            circ.append(cswap(*perm))
    assert run_circuit(circ).norm() == pytest.approx(1.0, abs=1e-12)


def test_density_matches_statevector(rng):
    circ = Circuit(3, [h(0), ry(1, 0.4), cnot(0, 2), cswap(0, 1, 2), rz(2, 1.3), cry(2, 1, 0.8), h(0)])
    psi = run_circuit(circ)
    rho = run_circuit_density(circ)
    assert np.allclose(rho.entries, to_density(psi).entries, atol=1e-12)
    for q in range(3):
        assert measure_probability_density(rho, q, 0) == pytest.approx(measure_probability(psi, q, 0), abs=1e-12)


def test_reduced_state_and_purity():
    rho = to_density(run_circuit(Circuit(2, [h(0), cnot(0, 1)])))
    assert rho.purity() == pytest.approx(1.0)
    red = rho.reduced([0])
    assert np.allclose(red, np.eye(2) / 2)


def test_maximally_mixed():
    mm = DensityMatrix.maximally_mixed(3)
    assert mm.trace() == pytest.approx(1.0)
    assert mm.purity() == pytest.approx(1 / 8)


def test_simulate_batch_matches_single(rng):
    circuits = []
    for _ in range(20):
        t = rng.uniform(0, 6, 3)
        circuits.append(Circuit(3, [h(0), ry(1, t[0]), rz(2, t[1]), cry(1, 2, t[2]), cswap(0, 1, 2), h(0)]))
    circuits.append(Circuit(3, [x(0), cz(0, 1)]))
    batch = simulate_batch(circuits)
    for amps, circ in zip(batch, circuits):
        assert np.allclose(amps, run_circuit(circ).amplitudes, atol=1e-13)


def test_idle_markers_fill_gaps():
    circ = Circuit(3, [h(0), cnot(1, 2), cnot(1, 2), cswap(0, 1, 2)]).with_idle_markers()
    idles = [op for op in circ.ops if op.kind == "IDLE"]
    assert idles and all(op.qubits == (0,) for op in idles)
    assert sum(op.duration for op in idles) == 1.0


def test_zero_state():
    s = zero_state(4)
    assert s.amplitudes[0] == 1 and s.norm() == 1
