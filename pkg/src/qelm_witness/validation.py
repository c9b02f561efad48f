"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import numpy as np

from .exceptions import ContractViolation, EmptyStatisticsError
from .linalg import ATOL_STRUCT, dagger


def check_matrix(m, name: str = "matrix", square: bool = False) -> np.ndarray:
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise ContractViolation(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise ContractViolation(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} has non-finite entries")
    return arr


def check_ket(v, dim: int | None = None, atol: float = ATOL_STRUCT) -> np.ndarray:
    arr = np.asarray(v, dtype=complex).ravel()
    if dim is not None and arr.size != dim:
        raise ContractViolation(f"ket must have dimension {dim}, got {arr.size}")
    if abs(np.linalg.norm(arr) - 1.0) > atol:
        raise ContractViolation(f"ket is not normalized (norm={np.linalg.norm(arr):.15f})")
    return arr


def check_hermitian(m, name: str = "operator", atol: float = ATOL_STRUCT) -> np.ndarray:
    arr = check_matrix(m, name, square=True)
    if not np.allclose(arr, dagger(arr), atol=atol, rtol=0):
        raise ContractViolation(f"{name} is not Hermitian")
    return arr


def validate_density_matrix(rho, dim: int | None = None, atol: float = ATOL_STRUCT) -> np.ndarray:
    """Return ``rho`` as a complex array after checking it is a density matrix.

    Hermitian, unit trace and non-negative spectrum, each within ``atol``.
    """
    arr = check_hermitian(np.asarray(rho, dtype=complex), "density matrix", atol)
    if dim is not None and arr.shape != (dim, dim):
        raise ContractViolation(f"density matrix must be {dim}x{dim}, got {arr.shape}")
    tr = np.trace(arr)
    if abs(tr - 1.0) > atol:
        raise ContractViolation(f"density matrix trace is {tr.real:.15f}, expected 1")
    if np.linalg.eigvalsh(arr)[0] < -atol:
        raise ContractViolation("density matrix has a negative eigenvalue")
    return arr


def check_statistics(X, n_outcomes: int | None = None, name: str = "X") -> np.ndarray:
    """2-D array of non-negative outcome statistics, one row per state."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    arr = check_matrix(arr, name)
    if n_outcomes is not None and arr.shape[1] != n_outcomes:
        raise ContractViolation(f"{name} must have {n_outcomes} columns, got {arr.shape[1]}")
    if np.any(arr < 0):
        raise ContractViolation(f"{name} has negative entries")
    return arr


def normalize_rows(X: np.ndarray) -> np.ndarray:
    """Divide each row by its sum; a row of zeros is an error."""
    X = np.asarray(X, dtype=float)
    totals = X.sum(axis=-1, keepdims=True)
    if np.any(totals <= 0):
        raise EmptyStatisticsError("cannot normalize counts with no recorded events")
    return X / totals
