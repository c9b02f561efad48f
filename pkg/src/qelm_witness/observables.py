"""Target observables: Pauli products, Bell states and projector-based witnesses."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, ContractViolation
from .linalg import ket_to_dm, singular_values
from .validation import check_hermitian, check_ket

PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
PAULI_LETTERS = "IXYZ"

_H = np.array([1, 0], dtype=complex)
_V = np.array([0, 1], dtype=complex)
BELL_STATES = {
    "Phi+": (np.kron(_H, _H) + np.kron(_V, _V)) / np.sqrt(2),
    "Phi-": (np.kron(_H, _H) - np.kron(_V, _V)) / np.sqrt(2),
    "Psi+": (np.kron(_H, _V) + np.kron(_V, _H)) / np.sqrt(2),
    "Psi-": (np.kron(_H, _V) - np.kron(_V, _H)) / np.sqrt(2),
}
BELL_ORDER = ["Phi+", "Phi-", "Psi+", "Psi-"]


@dataclass(frozen=True)
class Observable:
    name: str
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", check_hermitian(np.asarray(self.matrix, dtype=complex), self.name))


@dataclass(frozen=True)
class WitnessSpec:
    """``alpha * I - |psi><psi|`` with ``alpha`` the best separable overlap with ``psi``."""

    target: np.ndarray
    alpha: float
    observable: Observable


def pauli_product(j: int, k: int) -> Observable:
    """``sigma_j (x) sigma_k`` with ``sigma_0 = I``, named e.g. ``"XZ"``."""
    if not (0 <= j <= 3 and 0 <= k <= 3):
        raise ContractViolation("Pauli indices must be in 0..3")
    a, b = PAULI_LETTERS[j], PAULI_LETTERS[k]
    return Observable(a + b, np.kron(PAULIS[a], PAULIS[b]))


def all_pauli_products() -> list[Observable]:
    return [pauli_product(j, k) for j in range(4) for k in range(4)]


def schmidt_coefficients(psi: np.ndarray) -> np.ndarray:
    psi = check_ket(psi, 4)
    return singular_values(psi.reshape(2, 2))


def general_witness(psi: np.ndarray, name: str | None = None) -> WitnessSpec:
    """Projector witness for a pure two-qubit target.

    The separable bound is the largest squared Schmidt coefficient of ``psi``.
    """
    psi = check_ket(psi, 4)
    alpha = float(schmidt_coefficients(psi)[0] ** 2)
    mat = alpha * np.eye(4) - ket_to_dm(psi)
    return WitnessSpec(psi, alpha, Observable(name or "W_custom", mat))


def bell_witness(i: int) -> WitnessSpec:
    """Witness for the i-th Bell state, ``i = 1..4`` in the order Phi+, Phi-, Psi+, Psi-."""
    if not 1 <= i <= 4:
        raise ContractViolation("Bell witness index must be in 1..4")
    key = BELL_ORDER[i - 1]
    psi = BELL_STATES[key]
    return WitnessSpec(psi, 0.5, Observable(f"W_{key}", 0.5 * np.eye(4) - ket_to_dm(psi)))


def bell_witnesses() -> list[Observable]:
    return [bell_witness(i).observable for i in range(1, 5)]


def default_registry() -> dict[str, Observable]:
    """All 16 Pauli products and the four Bell witnesses, keyed by name."""
    obs = all_pauli_products() + bell_witnesses()
    return {o.name: o for o in obs}


def sweep_targets() -> list[Observable]:
    """Targets averaged over in MSE-vs-N sweeps: Bell witnesses plus the 15 non-trivial Paulis."""
    return bell_witnesses() + [o for o in all_pauli_products() if o.name != "II"]


def expectation_matrix(observables, states) -> np.ndarray:
    """``M[j, k] = Tr(O_j rho_k)``.

    ``states`` may be a stack of density matrices or anything with ``.rho``
    items (e.g. a :class:`~qelm_witness.states.Dataset`).
    """
    rhos = _as_rho_stack(states)
    mats = np.stack([o.matrix for o in observables])
    return np.einsum("jab,kba->jk", mats, rhos).real


def _as_rho_stack(states) -> np.ndarray:
    if hasattr(states, "rhos"):
        return states.rhos()
    arr = np.asarray(states) if not isinstance(states, list) else None
    if arr is not None and arr.dtype != object and arr.ndim == 3:
        return arr
    return np.stack([s.rho if hasattr(s, "rho") else np.asarray(s) for s in states])


# -- registry file: {name: [[re, im] x 16]} row-major ------------------------

def save_registry(observables, path) -> None:
    data = {
        o.name: [[float(z.real), float(z.imag)] for z in np.asarray(o.matrix).ravel()]
        for o in observables
    }
    Path(path).write_text(json.dumps(data, indent=2))


def load_registry(path) -> dict[str, Observable]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: cannot read observable registry: {exc}") from exc
    out = {}
    for name, entries in data.items():
        arr = np.array([complex(re, im) for re, im in entries])
        if arr.size != 16:
            raise ConfigError(f"{path}: observable {name!r} needs 16 entries, got {arr.size}")
        out[name] = Observable(name, arr.reshape(4, 4))
    return out


def resolve(names, registry: dict | None = None) -> list[Observable]:
    registry = default_registry() if registry is None else registry
    missing = [n for n in names if n not in registry]
    if missing:
        raise ConfigError(f"unknown observables: {', '.join(missing)}")
    return [registry[n] for n in names]
