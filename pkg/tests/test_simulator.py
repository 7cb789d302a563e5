import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from quantum_bl import simulator as sim
from quantum_bl.errors import DimensionMismatch, UnsupportedSpec
from quantum_bl.simulator import Circuit, CompiledCircuit, FeatureMapSpec

# --- dense reference simulator (kron products, little-endian) ---------------

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)
H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def embed(ops: dict, n: int) -> np.ndarray:
    """Tensor product with ``ops[q]`` on qubit q; qubit 0 is the rightmost factor."""
    out = np.array([[1.0 + 0j]])
    for q in reversed(range(n)):
        out = np.kron(out, ops.get(q, I2))
    return out


def dense_gate(name, qubits, theta, n):
    if name == "H":
        return embed({qubits[0]: H}, n)
    if name in ("RX", "RY", "RZ"):
        p = {"RX": X, "RY": Y, "RZ": Z}[name]
        return embed({qubits[0]: expm(-0.5j * theta * p)}, n)
    if name == "RZZ":
        return expm(-0.5j * theta * embed({qubits[0]: Z, qubits[1]: Z}, n))
    if name == "CZ":
        return _cz(qubits, n)
    if name == "CNOT":
        p0 = np.diag([1.0, 0.0])
        p1 = np.diag([0.0, 1.0])
        return embed({qubits[0]: p0}, n) + embed({qubits[0]: p1, qubits[1]: X}, n)
    raise ValueError(name)


def _cz(qubits, n):
    d = np.ones(2 ** n, dtype=complex)
    for z in range(2 ** n):
        if (z >> qubits[0]) & 1 and (z >> qubits[1]) & 1:
            d[z] = -1
    return np.diag(d)


def dense_run(c: Circuit, params=None):
    psi = np.zeros(2 ** c.n_qubits, dtype=complex)
    psi[0] = 1
    params = np.zeros(c.n_params) if params is None else np.asarray(params)
    for g in c.gates:
        psi = dense_gate(g.name, g.qubits, g.resolve(params), c.n_qubits) @ psi
    return psi


# --- gates and states --------------------------------------------------------

def test_ry_pi_flips():
    c = Circuit(1).add("RY", 0, angle=np.pi)
    psi = sim.apply_circuit(sim.zero_state(1), c)
    assert abs(psi[1]) == pytest.approx(1.0, abs=1e-15)


def test_bell_state():
    c = Circuit(2).add("H", 0).add("CNOT", 0, 1)
    psi = sim.apply_circuit(sim.zero_state(2), c)
    assert np.allclose(psi, [2 ** -0.5, 0, 0, 2 ** -0.5], atol=1e-15)


def test_little_endian_bitstrings():
    c = Circuit(3).add("RX", 0, angle=np.pi)
    psi = sim.apply_circuit(sim.zero_state(3), c)
    assert np.argmax(np.abs(psi)) == 1
    assert sim.bitstring(1, 3) == "001"
    assert sim.bits_of(1, 3) == (1, 0, 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 25), st.integers(0, 2 ** 31))
def test_random_circuits_match_dense_reference(n, depth, seed):
    c = sim.random_circuit(n, depth, np.random.default_rng(seed))
    psi = sim.apply_circuit(sim.zero_state(n), c)
    assert np.allclose(psi, dense_run(c), atol=1e-12)
    assert abs(np.linalg.norm(psi) - 1.0) <= 1e-12


def test_norm_preserved_three_qubits(rng):
    c = sim.random_circuit(3, 40, rng)
    psi = sim.apply_circuit(sim.zero_state(3), c)
    assert abs(np.vdot(psi, psi).real - 1.0) <= 1e-12


def test_parameter_count_mismatch():
    c = Circuit(1).add("RY", 0, slot=0)
    with pytest.raises(DimensionMismatch):
        sim.apply_circuit(sim.zero_state(1), c, [0.1, 0.2])
    with pytest.raises(DimensionMismatch):
        sim.apply_circuit(sim.zero_state(2), c, [0.1])


def test_circuit_validation():
    with pytest.raises(ValueError):
        Circuit(2).add("CNOT", 0, 0)
    with pytest.raises(ValueError):
        Circuit(2).add("RY", 2, angle=0.1)
    with pytest.raises(ValueError):
        Circuit(2).add("FOO", 0)


def test_circuit_json_roundtrip(rng):
    c = sim.random_circuit(3, 10, rng)
    c.add("RY", 1, slot=0)
    back = Circuit.from_json(c.to_json())
    assert back.to_json() == c.to_json()
    assert json.loads(c.to_json())["n_qubits"] == 3


def test_expectation_diagonal():
    e = np.array([3.0, -1.0, 2.0, 5.0])
    assert sim.expectation_diagonal(sim.zero_state(2), e) == 3.0
    c = Circuit(2).add("H", 0).add("H", 1)
    psi = sim.apply_circuit(sim.zero_state(2), c)
    assert sim.expectation_diagonal(psi, e) == pytest.approx(e.mean(), abs=1e-14)


def test_expectation_random_state_oracle(rng):
    psi = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    psi /= np.linalg.norm(psi)
    e = rng.standard_normal(16)
    direct = sum(abs(a) ** 2 * ez for a, ez in zip(psi, e))
    val = sim.expectation_diagonal(psi, e)
    assert val == pytest.approx(direct, abs=1e-10)
    assert e.min() <= val <= e.max()
    var = sim.variance_diagonal(psi, e)
    assert var == pytest.approx(sum(abs(a) ** 2 * (ez - direct) ** 2 for a, ez in zip(psi, e)), abs=1e-10)


# --- sampling ----------------------------------------------------------------

def test_sample_deterministic_state():
    psi = sim.apply_circuit(sim.zero_state(1), Circuit(1).add("RX", 0, angle=np.pi))
    assert sim.sample(psi, 5, np.random.default_rng(0)) == {"1": 5}


def test_sample_bell_statistics():
    psi = sim.apply_circuit(sim.zero_state(2), Circuit(2).add("H", 0).add("CNOT", 0, 1))
    shots = 10 ** 6
    counts = sim.sample(psi, shots, np.random.default_rng(7))
    assert set(counts) == {"00", "11"}
    sd = np.sqrt(shots * 0.25)
    assert abs(counts["00"] - shots / 2) <= 3 * sd
    assert sum(counts.values()) == shots


def test_sample_reproducible(rng):
    c = sim.random_circuit(3, 15, rng)
    psi = sim.apply_circuit(sim.zero_state(3), c)
    assert sim.sample(psi, 100, np.random.default_rng(3)) == sim.sample(psi, 100, np.random.default_rng(3))


def test_sampled_mean_energy_within_four_se():
    rng = np.random.default_rng(11)
    c = sim.random_circuit(4, 30, rng)
    psi = sim.apply_circuit(sim.zero_state(4), c)
    e = rng.standard_normal(16)
    idx = sim.sample_indices(psi, 10 ** 6, np.random.default_rng(5))
    se = np.sqrt(sim.variance_diagonal(psi, e) / idx.size)
    assert abs(e[idx].mean() - sim.expectation_diagonal(psi, e)) <= 4 * se


# --- compiled evaluation and gradients ----------------------------------------

def _parametrized(n, layers, rng):
    c = Circuit(n)
    slot = 0
    for _ in range(layers):
        for q in range(n):
            for name in ("RY", "RZ", "RX"):
                c.add(name, q, slot=slot)
                slot += 1
        for q in range(n - 1):
            c.add("CNOT", q, q + 1)
        c.add("RZZ", 0, n - 1, slot=slot, coeff=0.7)
        c.add("CZ", 0, 1)
        c.add("H", n - 1)
        slot += 1
    return c, rng.uniform(0, 2 * np.pi, size=slot)


def test_compiled_matches_generic(rng):
    c, p = _parametrized(4, 3, rng)
    generic = sim.apply_circuit(sim.zero_state(4), c, p)
    assert np.allclose(CompiledCircuit(c).state(p), generic, atol=1e-12)
    assert np.allclose(generic, dense_run(c, p), atol=1e-12)


def test_adjoint_gradient_matches_finite_difference(rng):
    c, p = _parametrized(4, 2, rng)
    e = rng.standard_normal(16)
    comp = CompiledCircuit(c)
    val, grad = comp.value_and_grad(p, e)
    val2, grad2 = sim.expectation_and_gradient(c, p, e)
    fd = np.array([(comp.expectation(p + h, e) - comp.expectation(p - h, e)) / 2e-6
                   for h in np.eye(p.size) * 1e-6])
    assert val == pytest.approx(val2, abs=1e-12)
    assert np.allclose(grad, fd, atol=1e-7)
    assert np.allclose(grad2, fd, atol=1e-7)


def test_batched_parameters(rng):
    c, _ = _parametrized(3, 1, rng)
    ps = rng.uniform(0, 1, size=(5, c.n_params))
    batch = sim.apply_circuit(sim.zero_state(3, batch=5), c, ps)
    for k in range(5):
        assert np.allclose(batch[k], sim.apply_circuit(sim.zero_state(3), c, ps[k]), atol=1e-14)


# --- feature maps and kernels ------------------------------------------------

def test_simple_map_structure():
    c = sim.build_feature_map(FeatureMapSpec("simple", 4, 0))
    assert c.n_qubits == 4 and len(c.gates) == 4
    assert c.count("CNOT", "CZ", "RZZ") == 0
    one = sim.build_feature_map(FeatureMapSpec("simple", 1, 0))
    assert [g.name for g in one.gates] == ["RY"] and one.n_params == 1


def test_pauli_map_structure():
    c = sim.build_feature_map(FeatureMapSpec("pauli", 3, 1, "linear", ("Z", "YY")))
    pairs = sorted(g.qubits for g in c.gates if g.name == "RZZ")
    assert pairs == [(0, 1), (1, 2)]
    with pytest.raises(UnsupportedSpec):
        sim.build_feature_map(FeatureMapSpec("pauli", 3, 1, "linear", ("Q",)))
    with pytest.raises(UnsupportedSpec):
        sim.build_feature_map(FeatureMapSpec("other", 3))


def test_pauli_rotation_matches_expm(rng):
    x = rng.uniform(0, 2 * np.pi, 2)
    for word in ("XX", "YY", "ZZ", "XZ", "YZ"):
        spec = FeatureMapSpec("pauli", 2, 1, "linear", (word,))
        psi = sim.feature_states(x[None, :], spec)[0]
        phi = (np.pi - x[0]) * (np.pi - x[1])
        mats = {"X": X, "Y": Y, "Z": Z}
        gen = embed({0: mats[word[0]], 1: mats[word[1]]}, 2)
        start = embed({0: H, 1: H}, 2)[:, 0]
        ref = expm(-1j * phi * gen) @ start
        assert abs(abs(np.vdot(ref, psi)) - 1.0) <= 1e-12, word


def test_one_qubit_kernel_formula():
    spec = FeatureMapSpec("simple", 1, 0)
    grid = np.linspace(0.1, 2 * np.pi, 20)
    for a in grid[::3]:
        for b in grid:
            assert sim.kernel_entry([a], [b], spec) == pytest.approx(np.cos((b - a) / 2) ** 2, abs=1e-12)


@pytest.mark.parametrize("spec", [
    FeatureMapSpec("simple", 4, 0),
    FeatureMapSpec("simple", 4, 2, "linear"),
    FeatureMapSpec("pauli", 3, 2, "full", ("Z", "ZZ")),
    FeatureMapSpec("pauli", 4, 1, "circular", ("Y", "XX")),
])
def test_kernel_psd_symmetric(spec, rng):
    x = rng.uniform(0, 2 * np.pi, size=(25, spec.n_features))
    k = sim.kernel_matrix(x, None, spec)
    assert np.allclose(k, k.T, atol=1e-12)
    assert np.allclose(np.diag(k), 1.0, atol=1e-12)
    assert np.linalg.eigvalsh(k).min() >= -1e-8
    assert sim.kernel_entry(x[0], x[1], spec) == pytest.approx(sim.kernel_entry(x[1], x[0], spec), abs=1e-12)


def test_feature_dimension_checked():
    with pytest.raises(DimensionMismatch):
        sim.kernel_entry([0.1, 0.2], [0.1, 0.2], FeatureMapSpec("simple", 4))
