import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qelm_witness.exceptions import ContractViolation, NumericalError
from qelm_witness.linalg import (
    dagger, expectation_value, is_unitary, ket_to_dm, numerical_rank, pseudoinverse, random_density_matrix,
    random_unitary, singular_values, tensor_product, unvec, vec,
)
from qelm_witness.observables import bell_witness, BELL_STATES, PAULIS
from qelm_witness.validation import validate_density_matrix

X, Z, I2 = PAULIS["X"], PAULIS["Z"], PAULIS["I"]


def test_tensor_identity():
    assert np.array_equal(tensor_product(I2, I2), np.eye(4))


def test_tensor_basis_projectors():
    e1 = np.array([[1, 0], [0, 0]])
    e2 = np.array([[0, 0], [0, 1]])
    out = tensor_product(e1, e2)
    expected = np.zeros((4, 4))
    expected[1, 1] = 1  # |0><0| (x) |1><1| = |01><01|
    assert np.array_equal(out, expected)
    assert numerical_rank(out) == 1


def test_tensor_bit_flip():
    ket00 = np.array([1, 0, 0, 0])
    assert np.array_equal(tensor_product(X, X) @ ket00, [0, 0, 0, 1])


def test_tensor_associative(rng):
    # small integer entries keep every product exact in floating point
    a, b, c = (rng.integers(-5, 6, (2, 3)) + 1j * rng.integers(-5, 6, (2, 3)) for _ in range(3))
    assert np.array_equal(tensor_product(tensor_product(a, b), c), tensor_product(a, tensor_product(b, c)))


def test_pinv_invertible():
    m = np.array([[2.0, 1.0], [1.0, 3.0]])
    assert np.allclose(pseudoinverse(m), np.linalg.inv(m), atol=1e-12)


def test_pinv_zero():
    assert np.array_equal(pseudoinverse(np.zeros((3, 5))), np.zeros((5, 3)))


def test_pinv_full_row_rank_matches_normal_equations(rng):
    m = rng.normal(size=(4, 25))
    p = pseudoinverse(m)
    assert np.allclose(m @ p, np.eye(4), atol=1e-10)
    # oracle: M^T (M M^T)^-1 via a direct solve
    assert np.allclose(p, np.linalg.solve(m @ m.T, m).T, atol=1e-10)


def test_pinv_rcond_truncates():
    m = np.diag([1.0, 1e-14])
    assert np.allclose(pseudoinverse(m, rcond=1e-12), np.diag([1.0, 0.0]))


def test_pinv_involution(rng):
    m = rng.normal(size=(5, 7)) + 1j * rng.normal(size=(5, 7))
    assert np.allclose(pseudoinverse(pseudoinverse(m)), m, atol=1e-10)


def test_singular_values_examples(rng):
    assert np.allclose(singular_values(np.eye(3)), [1, 1, 1])
    assert np.allclose(singular_values(np.diag([3.0, 0.0])), [3, 0])
    s = singular_values(random_unitary(6, rng))
    assert np.allclose(s, 1, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_singular_values_sorted_nonnegative(r, c, seed):
    m = np.random.default_rng(seed).normal(size=(r, c))
    s = singular_values(m)
    assert np.all(s >= 0) and np.all(np.diff(s) <= 0)


def test_numerical_rank(rng):
    assert numerical_rank(np.eye(4)) == 4
    u = rng.normal(size=4)
    assert numerical_rank(np.outer(u, u)) == 1
    assert numerical_rank(np.zeros((3, 3))) == 0


def test_vec_column_stacking():
    m = np.array([[1, 2], [3, 4]])
    assert np.array_equal(vec(m), [1, 3, 2, 4])
    assert np.array_equal(unvec(vec(m)), m)


def test_vec_superoperator_identity(rng):
    # vec(A X B) = (B^T kron A) vec(X) fixes the convention
    A, X_, B = (rng.normal(size=(3, 3)) for _ in range(3))
    assert np.allclose(vec(A @ X_ @ B), np.kron(B.T, A) @ vec(X_))


def test_expectation_examples(rng):
    assert expectation_value(Z, ket_to_dm(np.array([1, 0]))) == pytest.approx(1.0)
    rho = random_density_matrix(4, rng)
    assert expectation_value(np.eye(4), rho) == pytest.approx(1.0)
    phi = ket_to_dm(BELL_STATES["Phi+"])
    assert expectation_value(bell_witness(1).observable.matrix, phi) == pytest.approx(-0.5, abs=1e-12)


def test_expectation_rejects_non_hermitian(rng):
    with pytest.raises(ContractViolation):
        expectation_value(np.array([[0, 1], [0, 0]]), np.eye(2) / 2)
    with pytest.raises(ContractViolation):
        expectation_value(np.eye(4), np.eye(2) / 2)


def test_expectation_flags_imaginary_residue():
    # Hermitian observable, non-Hermitian "state": the trace picks up an imaginary part
    rho = np.array([[0.5, 0.3j], [0.0, 0.5]])
    with pytest.raises(NumericalError):
        expectation_value(X, rho)


def test_dagger_and_unitary(rng):
    u = random_unitary(4, rng)
    assert is_unitary(u)
    assert np.allclose(dagger(u) @ u, np.eye(4), atol=1e-12)


def test_validate_density_matrix(rng):
    rho = random_density_matrix(4, rng, rank=2)
    assert validate_density_matrix(rho, 4) is not None
    with pytest.raises(ContractViolation):
        validate_density_matrix(np.diag([1.2, -0.2]), 2)
    with pytest.raises(ContractViolation):
        validate_density_matrix(np.eye(2), 2)
