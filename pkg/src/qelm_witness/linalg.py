"""Dense complex linear algebra shared by the rest of the package.

Matrices are plain ``numpy`` arrays. Operators are vectorized by stacking
columns (Fortran order) everywhere, so ``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

from .exceptions import ContractViolation, NumericalError

ATOL_STRUCT = 1e-12
ATOL_DERIVED = 1e-10


def tensor_product(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of any number of matrices or vectors, left to right."""
    if not ops:
        raise ContractViolation("tensor_product needs at least one operand")
    return reduce(np.kron, (np.asarray(op) for op in ops))


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization of a matrix."""
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise ContractViolation(f"vector of length {v.size} is not a vectorized square matrix")
    return v.reshape((dim, dim), order="F")


def singular_values(m: np.ndarray) -> np.ndarray:
    """Singular values in descending order (numpy already sorts them)."""
    m = np.atleast_2d(np.asarray(m))
    if m.size == 0:
        return np.zeros(0)
    return np.linalg.svd(m, compute_uv=False)


def numerical_rank(m: np.ndarray, tol: float = ATOL_DERIVED) -> int:
    """Number of singular values strictly above ``tol * sigma_max``."""
    if tol <= 0:
        raise ContractViolation("tol must be positive")
    s = singular_values(m)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def pseudoinverse(m: np.ndarray, rcond: float = 1e-12) -> np.ndarray:
    """Moore-Penrose pseudoinverse through the SVD.

    Singular values at or below ``rcond * sigma_max`` are treated as zero.
    """
    if rcond <= 0:
        raise ContractViolation("rcond must be positive")
    m = np.atleast_2d(np.asarray(m))
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc
    if s.size == 0 or s[0] == 0:
        return np.zeros(m.shape[::-1], dtype=np.result_type(m, float))
    keep = s > rcond * s[0]
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (dagger(vh) * s_inv) @ dagger(u)


def is_hermitian(m: np.ndarray, atol: float = ATOL_STRUCT) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.allclose(m, dagger(m), atol=atol, rtol=0)


def is_unitary(m: np.ndarray, atol: float = ATOL_STRUCT) -> bool:
    m = np.asarray(m)
    return np.allclose(dagger(m) @ m, np.eye(m.shape[1]), atol=atol, rtol=0)


def ket_to_dm(ket: np.ndarray) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


def expectation_value(obs: np.ndarray, rho: np.ndarray, atol: float = ATOL_DERIVED) -> float:
    """Real expectation ``Tr(obs @ rho)`` of a Hermitian observable."""
    obs = np.asarray(obs)
    rho = np.asarray(rho)
    if obs.shape != rho.shape:
        raise ContractViolation(f"dimension mismatch: {obs.shape} vs {rho.shape}")
    if not is_hermitian(obs):
        raise ContractViolation("observable is not Hermitian")
    # Tr(A B) = sum_ij A_ij B_ji
    val = np.sum(obs * rho.T)
    if abs(val.imag) > atol:
        raise NumericalError(f"expectation value has imaginary part {val.imag:.3e}")
    return float(val.real)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary (QR of a Ginibre matrix with phase fix)."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_ket(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random mixed state from the induced (Ginibre) measure."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real
