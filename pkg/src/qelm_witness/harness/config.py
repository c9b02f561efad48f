"""Experiment and loss-model configuration, loaded from JSON files.

A reservoir is referenced by path (relative to the experiment file) or by the
name of a shipped config (``R1``, ``R2``, ``R3``). Experiment names ``E1`` ..
``E6`` resolve to the shipped scenario files.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from ..exceptions import ConfigError
from ..observables import default_registry, sweep_targets
from ..reservoir import ReservoirConfig
from ..states import MODES, REFERENCE_STATES

TRAINING_MODES = ("mixed", "separable_only", "plus_k_entangled")
BUILTIN_RESERVOIRS = ("R1", "R2", "R3")


def data_path(name: str) -> Path:
    return Path(str(resources.files("qelm_witness") / "data" / name))


def _read_json(path: Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


def load_reservoir(ref, base: Path | None = None) -> ReservoirConfig:
    """Reservoir from an inline dict, a shipped name, or a JSON path."""
    if isinstance(ref, ReservoirConfig):
        return ref
    if isinstance(ref, dict):
        return ReservoirConfig.from_dict(ref)
    ref = str(ref)
    if ref.upper() in BUILTIN_RESERVOIRS:
        path = data_path(f"{ref.lower()}.json")
    else:
        path = Path(ref)
        if not path.is_absolute() and base is not None:
            path = base / path
    if not path.exists():
        raise ConfigError(f"reservoir file not found: {path}")
    try:
        return ReservoirConfig.from_dict(_read_json(path))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulated scenario.

    ``n_sep``/``n_ent``/``n_partial`` are the sizes of the whole dataset;
    ``training`` decides how it is split. With ``mixed`` a random
    ``train_fraction`` of every class is used for training; with
    ``separable_only`` all separable states train and all entangled states
    test; ``plus_k_entangled`` moves ``k`` entangled states into training.
    ``shots=None`` means exact probabilities.
    """

    reservoir: object = "R1"
    ref_sep: str = "VV"
    ref_ent: str = "PsiPlus"
    ref_partial: str | None = None
    n_sep: int = 300
    n_ent: int = 300
    n_partial: int = 0
    mode: str = "same_angles"
    shots: int | None = 1117
    seed: int = 0
    targets: tuple = ()
    witness: str = "W_Phi+"
    training: str = "mixed"
    k_entangled: int = 0
    train_fraction: float = 0.5
    repeats: int = 20
    input_form: str = "frequencies"
    sampling: str = "multinomial"
    transmission: float = 1.0
    mislabel_partial: bool = False
    name: str = ""
    source: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.targets:
            object.__setattr__(self, "targets", tuple(o.name for o in sweep_targets()))
        else:
            object.__setattr__(self, "targets", tuple(self.targets))
        self.validate()

    def _fail(self, key: str, msg: str):
        where = f"{self.source}: " if self.source else ""
        raise ConfigError(f"{where}key {key!r}: {msg}")

    def validate(self) -> None:
        for key in ("ref_sep", "ref_ent") + (("ref_partial",) if self.ref_partial else ()):
            if getattr(self, key) not in REFERENCE_STATES:
                self._fail(key, f"unknown reference state {getattr(self, key)!r}")
        for key in ("n_sep", "n_ent", "n_partial", "k_entangled"):
            if int(getattr(self, key)) < 0:
                self._fail(key, "must be non-negative")
        if self.n_partial and not self.ref_partial:
            self._fail("ref_partial", "required when n_partial > 0")
        if self.mode not in MODES:
            self._fail("mode", f"must be one of {MODES}")
        if self.shots is not None and self.shots < 0:
            self._fail("shots", "must be non-negative")
        if self.training not in TRAINING_MODES:
            self._fail("training", f"must be one of {TRAINING_MODES}")
        if self.training == "plus_k_entangled" and self.k_entangled >= self.n_ent:
            self._fail("k_entangled", "must leave at least one entangled test state")
        if not 0 < self.train_fraction < 1:
            self._fail("train_fraction", "must lie in (0, 1)")
        if self.repeats < 1:
            self._fail("repeats", "must be at least 1")
        if self.input_form not in ("frequencies", "raw_counts", "normalized_counts"):
            self._fail("input_form", "unknown statistics form")
        if self.sampling not in ("multinomial", "poisson"):
            self._fail("sampling", "must be 'multinomial' or 'poisson'")
        if not 0 < self.transmission <= 1:
            self._fail("transmission", "must lie in (0, 1]")
        registry = default_registry()
        for name in self.targets + (self.witness,):
            if name not in registry:
                self._fail("targets", f"unknown observable {name!r}")
        if self.witness not in self.targets:
            self._fail("witness", "must be one of the targets")

    @property
    def exact(self) -> bool:
        return self.shots is None

    def reservoir_config(self) -> ReservoirConfig:
        base = Path(self.source).parent if self.source else None
        try:
            return load_reservoir(self.reservoir, base)
        except ConfigError as exc:
            self._fail("reservoir", str(exc))

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("source")
        d["targets"] = list(self.targets)
        if isinstance(self.reservoir, ReservoirConfig):
            d["reservoir"] = self.reservoir.to_dict()
        return d

    def hash(self) -> str:
        """Content hash of the resolved config, reservoir angles included."""
        d = self.to_dict()
        d["reservoir"] = self.reservoir_config().to_dict()
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict, source: str = "") -> "ExperimentConfig":
        known = {f.name for f in fields(cls)} - {"source"}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"{source or 'config'}: unknown key(s) {unknown}")
        d = dict(d)
        if d.get("shots") in ("inf", "exact"):
            d["shots"] = None
        try:
            return cls(**d, source=source)
        except TypeError as exc:
            raise ConfigError(f"{source or 'config'}: {exc}") from exc


def load_experiment(ref) -> ExperimentConfig:
    """Experiment config from a JSON path or a shipped name (``E1`` .. ``E6``)."""
    ref = str(ref)
    path = data_path(f"{ref.lower()}.json") if ref.upper() in BUILTIN_EXPERIMENTS else Path(ref)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cfg = ExperimentConfig.from_dict(_read_json(path), source=str(path))
    cfg.reservoir_config()  # surface a missing reservoir file now
    return cfg


BUILTIN_EXPERIMENTS = ("E1", "E2", "E3", "E4", "E5", "E6")


@dataclass(frozen=True)
class LossModel:
    """Per-photon transmissions and the source coincidence rate (Hz)."""

    eta_qp: float = 0.80
    eta_qw: float = 0.56
    eta_proj: float = 0.5
    eta_slm: float = 0.78
    eta_smf: float = 0.4
    cc_source: float = 20e3

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "cc_source":
                if not v > 0:
                    raise ConfigError("cc_source must be positive")
            elif not 0 < v <= 1:
                raise ConfigError(f"{f.name} must lie in (0, 1]")

    @property
    def per_photon(self) -> float:
        # the q-plate transmission is already part of eta_qw
        return self.eta_qw * self.eta_proj * self.eta_slm * self.eta_smf


def config_digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=lambda x: np.asarray(x).tolist())
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
