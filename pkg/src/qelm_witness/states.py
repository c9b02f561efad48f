"""Labeled two-qubit input states made by local waveplate rotations of reference states."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, ContractViolation
from .linalg import ATOL_DERIVED, ket_to_dm, numerical_rank, vec
from .observables import default_registry, schmidt_coefficients
from .optics import H, V, hwp, prep_unitary, qwp  # noqa: F401  (re-exported)
from .validation import check_ket, validate_density_matrix

SAME_ANGLES = "same_angles"
INDEPENDENT_ANGLES = "independent_angles"
MODES = (SAME_ANGLES, INDEPENDENT_ANGLES)


@dataclass(frozen=True)
class ReferenceState:
    tag: str
    ket: np.ndarray
    entangled: bool

    def __post_init__(self):
        object.__setattr__(self, "ket", check_ket(self.ket, 4))

    @property
    def label(self) -> str:
        if not self.entangled:
            return "separable"
        return "entangled" if np.isclose(schmidt_coefficients(self.ket)[0] ** 2, 0.5) else "partial"

    @classmethod
    def custom(cls, ket) -> "ReferenceState":
        ket = check_ket(ket, 4)
        return cls("Custom", ket, bool(schmidt_coefficients(ket)[1] > 1e-12))


def _k(a, b):
    return np.kron(a, b)


REFERENCE_STATES = {
    "PsiPlus": ReferenceState("PsiPlus", (_k(H, V) + _k(V, H)) / np.sqrt(2), True),
    "VV": ReferenceState("VV", _k(V, V), False),
    "VH": ReferenceState("VH", _k(V, H), False),
    "HV": ReferenceState("HV", _k(H, V), False),
    "PsiPlusP1": ReferenceState("PsiPlusP1", np.sqrt(1 / 4) * _k(H, V) + np.sqrt(3 / 4) * _k(V, H), True),
    "PsiPlusP2": ReferenceState("PsiPlusP2", np.sqrt(1 / 5) * _k(H, V) + np.sqrt(4 / 5) * _k(V, H), True),
}


def reference(tag: str) -> ReferenceState:
    try:
        return REFERENCE_STATES[tag]
    except KeyError:
        raise ConfigError(f"unknown reference state {tag!r}") from None


@dataclass(frozen=True)
class PreparationAngles:
    phi_a: float
    theta_a: float
    phi_b: float
    theta_b: float

    @property
    def same(self) -> bool:
        return self.phi_a == self.phi_b and self.theta_a == self.theta_b

    def unitary(self) -> np.ndarray:
        return np.kron(prep_unitary(self.phi_a, self.theta_a), prep_unitary(self.phi_b, self.theta_b))


@dataclass
class LabeledState:
    rho: np.ndarray
    label: str
    prep: PreparationAngles
    reference: ReferenceState
    true_values: dict = field(default_factory=dict)


@dataclass
class Dataset:
    states: list
    seed: int | None = None
    mode: str = SAME_ANGLES

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractViolation(f"mode must be one of {MODES}")

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, idx):
        if isinstance(idx, (slice, list, np.ndarray)):
            picked = self.states[idx] if isinstance(idx, slice) else [self.states[i] for i in idx]
            return Dataset(picked, self.seed, self.mode)
        return self.states[idx]

    def __iter__(self):
        return iter(self.states)

    def rhos(self) -> np.ndarray:
        return np.stack([s.rho for s in self.states]) if self.states else np.zeros((0, 4, 4), complex)

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.states])

    def subset(self, *labels: str) -> "Dataset":
        return Dataset([s for s in self.states if s.label in labels], self.seed, self.mode)

    def truths(self, names) -> np.ndarray:
        """``n_obs x n_states`` matrix of stored true values."""
        return np.array([[s.true_values[n] for s in self.states] for n in names], dtype=float)

    def __add__(self, other: "Dataset") -> "Dataset":
        return Dataset(self.states + other.states, self.seed, self.mode)


def prepare_input(ref: ReferenceState, angles: PreparationAngles, observables=None,
                  true_reference: ReferenceState | None = None) -> LabeledState:
    """Apply ``U(phi_a, theta_a) (x) U(phi_b, theta_b)`` to the reference ket.

    ``true_values`` are computed for every observable (default: the full
    registry) from the ideal state. If ``true_reference`` is given, the
    labels are computed from that reference instead, prepared with the same
    angles; this is how partially entangled states are deliberately
    mislabeled as maximally entangled.
    """
    observables = default_registry().values() if observables is None else observables
    U = angles.unitary()
    rho = validate_density_matrix(ket_to_dm(U @ ref.ket), 4)
    label_rho = rho if true_reference is None else ket_to_dm(U @ true_reference.ket)
    values = {o.name: float(np.sum(o.matrix * label_rho.T).real) for o in observables}
    return LabeledState(rho, ref.label, angles, ref, values)


def _draw_angles(rng: np.random.Generator, mode: str) -> PreparationAngles:
    a = rng.uniform(0.0, np.pi, 4)
    if mode == SAME_ANGLES:
        return PreparationAngles(a[0], a[1], a[0], a[1])
    return PreparationAngles(*a)


def generate_dataset(ref_sep: ReferenceState, ref_ent: ReferenceState, n_sep: int, n_ent: int,
                     mode: str = SAME_ANGLES, seed: int = 0, observables=None,
                     ref_partial: ReferenceState | None = None, n_partial: int = 0,
                     mislabel_partial: bool = False) -> Dataset:
    """Random dataset: separable states first, then entangled, then partial.

    Waveplate angles are uniform in [0, pi) and drawn in that order from one
    generator seeded with ``seed``.
    """
    if min(n_sep, n_ent, n_partial) < 0:
        raise ContractViolation("state counts must be non-negative")
    if mode not in MODES:
        raise ContractViolation(f"mode must be one of {MODES}")
    if n_partial and ref_partial is None:
        raise ContractViolation("n_partial > 0 needs ref_partial")
    observables = list(default_registry().values()) if observables is None else list(observables)
    rng = np.random.default_rng(seed)
    states = []
    for ref, n in ((ref_sep, n_sep), (ref_ent, n_ent), (ref_partial, n_partial)):
        for _ in range(n):
            true_ref = REFERENCE_STATES["PsiPlus"] if (mislabel_partial and ref.label == "partial") else None
            states.append(prepare_input(ref, _draw_angles(rng, mode), observables, true_ref))
    return Dataset(states, seed, mode)


def span_rank(rhos, tol: float = ATOL_DERIVED) -> int:
    """Dimension of the real linear span of a stack of density matrices."""
    rhos = np.asarray(rhos)
    if len(rhos) == 0:
        return 0
    return numerical_rank(np.stack([vec(r) for r in rhos]), tol)


def span_ranks(d: Dataset, tol: float = ATOL_DERIVED) -> tuple[int, int, int]:
    """Span dimensions of the separable subset, the entangled subset and all states."""
    if len(d) == 0:
        raise ContractViolation("dataset is empty")
    sep = d.subset("separable").rhos()
    ent = d.subset("entangled", "partial").rhos()
    return span_rank(sep, tol), span_rank(ent, tol), span_rank(d.rhos(), tol)


def angle_mismatch_dataset(d: Dataset, delta_std: float, seed: int = 0, observables=None) -> Dataset:
    """Copy of ``d`` with arm b's preparation angles jittered by ``N(0, delta_std^2)``."""
    if delta_std < 0:
        raise ContractViolation("delta_std must be non-negative")
    if delta_std == 0:
        return Dataset(list(d.states), d.seed, d.mode)
    rng = np.random.default_rng(seed)
    names = list(d.states[0].true_values) if d.states else []
    registry = default_registry()
    if observables is None:
        observables = [registry[n] for n in names if n in registry]
    out = []
    for s in d.states:
        dphi, dtheta = rng.normal(0.0, delta_std, 2)
        angles = replace(s.prep, phi_b=s.prep.phi_b + dphi, theta_b=s.prep.theta_b + dtheta)
        out.append(prepare_input(s.reference, angles, observables))
    return Dataset(out, d.seed, INDEPENDENT_ANGLES)


# -- dataset file ---------------------------------------------------------------

def save_dataset(d: Dataset, path) -> None:
    records = []
    for s in d.states:
        records.append({
            "label": s.label,
            "reference": s.reference.tag,
            "reference_ket": [[float(z.real), float(z.imag)] for z in s.reference.ket],
            "angles": {k: float(np.rad2deg(v)) for k, v in vars(s.prep).items()},
            "rho": [[float(z.real), float(z.imag)] for z in s.rho.ravel()],
            "true_values": s.true_values,
        })
    Path(path).write_text(json.dumps({"seed": d.seed, "mode": d.mode, "states": records}))


def load_dataset(path) -> Dataset:
    try:
        data = json.loads(Path(path).read_text())
        states = []
        for r in data["states"]:
            ket = np.array([complex(a, b) for a, b in r["reference_ket"]])
            ref = ReferenceState(r["reference"], ket, r["label"] != "separable")
            prep = PreparationAngles(**{k: float(np.deg2rad(v)) for k, v in r["angles"].items()})
            rho = np.array([complex(a, b) for a, b in r["rho"]]).reshape(4, 4)
            states.append(LabeledState(rho, r["label"], prep, ref, dict(r["true_values"])))
        return Dataset(states, data.get("seed"), data.get("mode", SAME_ANGLES))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: cannot read dataset: {exc}") from exc
