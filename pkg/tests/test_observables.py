import numpy as np
import pytest

from qelm_witness.exceptions import ConfigError, ContractViolation
from qelm_witness.linalg import ket_to_dm, random_density_matrix
from qelm_witness.observables import (
    BELL_STATES, all_pauli_products, bell_witness, default_registry, expectation_matrix, general_witness,
    load_registry, pauli_product, resolve, save_registry, schmidt_coefficients, sweep_targets,
)

HV = np.array([0, 1, 0, 0], dtype=complex)
HH = np.array([1, 0, 0, 0], dtype=complex)
P1 = np.sqrt(1 / 4) * np.array([0, 1, 0, 0]) + np.sqrt(3 / 4) * np.array([0, 0, 1, 0])


def random_factors(n, rng):
    a = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    b = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    return a / np.linalg.norm(a, axis=1, keepdims=True), b / np.linalg.norm(b, axis=1, keepdims=True)


def product(a, b):
    return np.einsum("ni,nj->nij", a, b).reshape(len(a), 4)


def test_pauli_examples():
    assert np.allclose(pauli_product(0, 0).matrix, np.eye(4))
    phi = ket_to_dm(BELL_STATES["Phi+"])
    assert np.trace(pauli_product(3, 3).matrix @ phi).real == pytest.approx(1.0)
    for bell in BELL_STATES.values():
        assert np.trace(pauli_product(1, 0).matrix @ ket_to_dm(bell)).real == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ContractViolation):
        pauli_product(4, 0)


def test_pauli_basis_orthogonal():
    mats = np.stack([o.matrix for o in all_pauli_products()])
    gram = np.einsum("iab,jba->ij", mats, mats)
    assert np.allclose(gram, 4 * np.eye(16))


def test_bell_witness_examples():
    w = bell_witness(1)
    assert w.observable.name == "W_Phi+" and w.alpha == 0.5
    assert np.trace(w.observable.matrix @ ket_to_dm(BELL_STATES["Phi+"])).real == pytest.approx(-0.5)
    assert np.trace(w.observable.matrix @ ket_to_dm(HH)).real == pytest.approx(0.0, abs=1e-15)
    main_text_form = 0.5 * (np.eye(4) - 2 * ket_to_dm(BELL_STATES["Phi+"]))
    assert np.array_equal(w.observable.matrix, main_text_form)


def test_general_witness_alpha():
    for bell in BELL_STATES.values():
        assert general_witness(bell).alpha == pytest.approx(0.5)
    assert general_witness(HV).alpha == pytest.approx(1.0)
    assert general_witness(P1).alpha == pytest.approx(0.75)


def test_general_witness_alpha_matches_brute_force(rng):
    a, b = random_factors(100_000, rng)
    # one alternating step: for fixed b the best a is <b|psi>, still a product state
    a_best = np.einsum("ij,nj->ni", P1.reshape(2, 2), b.conj())
    a_best /= np.linalg.norm(a_best, axis=1, keepdims=True)
    prods = np.concatenate([product(a, b), product(a_best, b)])
    overlap = np.abs(prods.conj() @ P1) ** 2
    assert abs(overlap.max() - 0.75) < 1e-3
    assert overlap.max() <= 0.75 + 1e-12


@pytest.mark.parametrize("psi", [BELL_STATES["Phi+"], BELL_STATES["Psi-"], P1, HV])
def test_witness_spectrum(psi):
    w = general_witness(psi)
    eig = np.linalg.eigvalsh(w.observable.matrix)
    assert eig.min() == pytest.approx(w.alpha - 1, abs=1e-12)
    assert eig.max() == pytest.approx(w.alpha, abs=1e-12)


def test_schmidt_coefficients_normalized(rng):
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    s = schmidt_coefficients(psi)
    assert np.sum(s**2) == pytest.approx(1.0)


def test_expectation_matrix_examples(rng):
    rhos = np.stack([random_density_matrix(4, rng) for _ in range(5)])
    M = expectation_matrix([pauli_product(0, 0)], rhos)
    assert np.allclose(M, 1.0)
    phi = np.stack([ket_to_dm(BELL_STATES["Phi+"])] * 3)
    assert np.allclose(expectation_matrix([bell_witness(1).observable], phi), -0.5)


def test_pauli_round_trip(rng):
    paulis = all_pauli_products()
    rhos = np.stack([random_density_matrix(4, rng) for _ in range(20)])
    M = expectation_matrix(paulis, rhos)
    for k, rho in enumerate(rhos):
        rebuilt = sum(M[j, k] * p.matrix for j, p in enumerate(paulis)) / 4
        assert np.allclose(rebuilt, rho, atol=1e-12)


def test_registry_contents():
    reg = default_registry()
    assert len(reg) == 20 and {"W_Phi+", "W_Phi-", "W_Psi+", "W_Psi-", "XY"} <= set(reg)
    names = [o.name for o in sweep_targets()]
    assert len(names) == 19 and "II" not in names


def test_registry_file_round_trip(tmp_path):
    reg = default_registry()
    save_registry(reg.values(), tmp_path / "reg.json")
    again = load_registry(tmp_path / "reg.json")
    assert set(again) == set(reg)
    assert all(np.array_equal(again[n].matrix, reg[n].matrix) for n in reg)
    (tmp_path / "bad.json").write_text('{"A": [[1, 0]]}')
    with pytest.raises(ConfigError):
        load_registry(tmp_path / "bad.json")
    with pytest.raises(ConfigError):
        resolve(["nope"])


def test_observable_rejects_non_hermitian():
    from qelm_witness.observables import Observable
    with pytest.raises(ContractViolation):
        Observable("bad", np.triu(np.ones((4, 4))))
