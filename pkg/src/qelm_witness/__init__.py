"""Entanglement-witness estimation with a quantum-walk extreme learning machine."""

from .exceptions import (
    ConfigError, ContractViolation, EmptyStatisticsError, NumericalError, PovmValidityError,
    QelmError, TrainingError,
)
from .observables import Observable, WitnessSpec, bell_witness, default_registry, general_witness, sweep_targets
from .qelm import QELMRegressor, ReadoutMatrix, evaluate, predict, train, witness_confusion
from .reservoir import EffectivePovm, ReservoirConfig, effective_povm, random_reservoir, swap_coin_qwps
from .sampling import CountsMatrix, probability_matrix, sample_counts, sample_matrix
from .shadow import ShadowEstimator, dual_frame, frame_superoperator, shadow_estimator
from .states import Dataset, generate_dataset, prepare_input, reference, span_ranks

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ContractViolation", "CountsMatrix", "Dataset", "EffectivePovm", "EmptyStatisticsError",
    "NumericalError", "Observable", "PovmValidityError", "QELMRegressor", "QelmError", "ReadoutMatrix",
    "ReservoirConfig", "ShadowEstimator", "TrainingError", "WitnessSpec", "bell_witness", "default_registry",
    "dual_frame", "effective_povm", "evaluate", "frame_superoperator", "general_witness", "generate_dataset",
    "predict", "prepare_input", "probability_matrix", "random_reservoir", "reference", "sample_counts",
    "sample_matrix", "shadow_estimator", "span_ranks", "swap_coin_qwps", "sweep_targets", "train",
    "witness_confusion",
]
