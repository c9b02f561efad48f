"""Shadow estimators from the canonical dual of an effective POVM.

The frame superoperator ``F(X) = sum_b Tr(mu_b X) mu_b`` is stored as a
``d^2 x d^2`` matrix acting on column-stacked operators, ``F = E E^dag`` with
``E`` the matrix of vectorized effects. Duals are ``mu*_b = F^+(mu_b)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ContractViolation
from .linalg import ATOL_DERIVED, dagger, numerical_rank, pseudoinverse, unvec
from .sampling import CountsMatrix
from .validation import check_statistics

DUAL_RCOND = 1e-10


@dataclass
class FrameSuperoperator:
    matrix: np.ndarray

    @property
    def rank(self) -> int:
        return numerical_rank(self.matrix, DUAL_RCOND)

    def apply(self, X: np.ndarray) -> np.ndarray:
        d = X.shape[0]
        return unvec(self.matrix @ X.reshape(-1, order="F"), d)

    def inverse_trace(self, rcond: float = DUAL_RCOND) -> float:
        """``Tr(F^+)``, the average-variance figure of merit of the measurement."""
        return float(np.trace(pseudoinverse(self.matrix, rcond)).real)


@dataclass
class DualFrame:
    duals: np.ndarray
    pseudo_inverted: bool


def frame_superoperator(povm) -> FrameSuperoperator:
    E = povm.vectorized()
    return FrameSuperoperator(E @ dagger(E))


def dual_frame(f: FrameSuperoperator, povm, tol: float = DUAL_RCOND) -> DualFrame:
    """Canonical dual effects; pseudo-inverse (and flag) when ``F`` is singular."""
    F_plus = pseudoinverse(f.matrix, tol)
    E = povm.vectorized()
    D = F_plus @ E
    d = povm.dim
    duals = np.stack([unvec(D[:, b], d) for b in range(D.shape[1])])
    # Hermitian by construction up to rounding; symmetrize to remove the residue
    duals = 0.5 * (duals + dagger(duals))
    return DualFrame(duals, bool(numerical_rank(f.matrix, tol) < d * d))


def shadow_estimator(obs, duals: DualFrame) -> np.ndarray:
    """``o(b) = Tr(O mu*_b)`` for each outcome ``b``."""
    O = np.asarray(getattr(obs, "matrix", obs))
    return np.einsum("ij,bji->b", O, duals.duals).real


def shadow_mse(counts, truths, obs, duals: DualFrame, n_guess: float) -> float:
    """Mean over states of ``|sum_b o(b) N_b / n_guess - Tr(O rho)|^2``."""
    if n_guess <= 0:
        raise ContractViolation("n_guess must be positive")
    C = counts.counts if isinstance(counts, CountsMatrix) else np.asarray(counts)
    est = shadow_estimator(obs, duals) @ C / n_guess
    return float(np.mean((est - np.asarray(truths, dtype=float)) ** 2))


def default_n_grid() -> np.ndarray:
    return np.logspace(2, 8, 60)


def min_mse_over_n(counts, truths, obs, duals: DualFrame, n_grid=None) -> tuple[float, float]:
    """Scan every grid point and return ``(n_star, mse_min)``.

    This is a lower bound on the shadow error: the best ``N`` is picked with
    hindsight for each observable.
    """
    grid = default_n_grid() if n_grid is None else np.asarray(n_grid, dtype=float)
    if grid.size == 0:
        raise ContractViolation("n_grid must not be empty")
    values = np.array([shadow_mse(counts, truths, obs, duals, n) for n in grid])
    k = int(np.argmin(values))
    return float(grid[k]), float(values[k])


class ShadowEstimator(RegressorMixin, BaseEstimator):
    """Shadow estimates in the same ``predict(X)`` shape as :class:`QELMRegressor`.

    ``fit`` takes the effective POVM and the target observables instead of
    training data. ``predict`` takes per-shot frequencies, or raw counts when
    ``n_guess`` is set (counts are then divided by ``n_guess``).
    """

    def __init__(self, tol=DUAL_RCOND, n_guess=None):
        self.tol = tol
        self.n_guess = n_guess

    def fit(self, povm, observables, y=None):
        self.frame_ = frame_superoperator(povm)
        self.dual_frame_ = dual_frame(self.frame_, povm, self.tol)
        self.coef_ = np.stack([shadow_estimator(o, self.dual_frame_) for o in observables])
        self.n_features_in_ = povm.n_outcomes
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_statistics(X, self.n_features_in_)
        if self.n_guess is not None:
            X = X / self.n_guess
        return X @ self.coef_.T


def reconstruct(povm, duals: DualFrame, rho: np.ndarray) -> np.ndarray:
    """``sum_b Tr(mu_b rho) mu*_b``; equals ``rho`` for informationally complete POVMs."""
    p = povm.probabilities(rho)
    return np.einsum("b,bij->ij", p, duals.duals)


def is_informationally_complete(povm, tol: float = ATOL_DERIVED) -> bool:
    return numerical_rank(povm.vectorized(), tol) == povm.dim**2
