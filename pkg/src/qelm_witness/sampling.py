"""Outcome probabilities and finite-statistics counts.

Post-selection loss is the 26th multinomial category: a state with outcome
probabilities ``p`` (summing to less than one) is sampled ``N`` times and
only the 25 observed counts are reported.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, ContractViolation, PovmValidityError
from .validation import normalize_rows

DEFAULT_SHOTS = 1117
NEG_TOL = 1e-12


@dataclass
class ProbabilityVector:
    probs: np.ndarray
    loss: float


@dataclass
class CountsVector:
    counts: np.ndarray
    shots: int


@dataclass
class CountsMatrix:
    """Integer counts, one column per state, plus the injected shots per column."""

    counts: np.ndarray
    shots: np.ndarray

    @property
    def n_states(self) -> int:
        return self.counts.shape[1]

    def column(self, k: int) -> CountsVector:
        return CountsVector(self.counts[:, k], int(self.shots[k]))

    def frequencies(self) -> np.ndarray:
        """Counts normalized by observed events, ``n_outcomes x n_states``."""
        return normalize_rows(self.counts.T).T

    def per_shot(self) -> np.ndarray:
        """Counts divided by injected shots (includes the loss deficit)."""
        return self.counts / self.shots[None, :]


def _clean(probs: np.ndarray) -> np.ndarray:
    if np.any(probs < -NEG_TOL):
        raise PovmValidityError(f"negative outcome probability {probs.min():.3e}")
    return np.clip(probs, 0.0, None)


def outcome_probabilities(rho: np.ndarray, povm, transmission: float = 1.0) -> ProbabilityVector:
    """``p_b = transmission * Tr(mu_b rho)``; whatever is missing is loss."""
    rho = np.asarray(rho)
    if rho.shape != (povm.dim, povm.dim):
        raise ContractViolation(f"state of shape {rho.shape} does not match POVM dimension {povm.dim}")
    if not 0 < transmission <= 1:
        raise ContractViolation("transmission must lie in (0, 1]")
    probs = _clean(transmission * povm.probabilities(rho))
    total = probs.sum()
    if total > 1 + 1e-10:
        raise PovmValidityError(f"probabilities sum to {total:.12f} > 1")
    return ProbabilityVector(probs, float(max(0.0, 1.0 - total)))


def column_rng(seed, column: int) -> np.random.Generator:
    """Independent stream for column ``column`` of a run seeded with ``seed``.

    ``seed`` is an int or a tuple of ints (e.g. ``(seed, repeat)``).
    """
    entropy = [int(x) for x in np.atleast_1d(seed)] + [int(column)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def sample_counts(p: ProbabilityVector, N: int, rng_seed=None, method: str = "multinomial") -> CountsVector:
    """Draw outcome counts for ``N`` injected copies.

    ``rng_seed`` may be an int or a ``numpy.random.Generator``. ``method`` is
    ``"multinomial"`` (one draw over outcomes plus loss) or ``"poisson"``
    (independent Poisson counts with means ``N * p_b``).
    """
    if N < 0:
        raise ContractViolation("N must be non-negative")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    N = int(N)
    if method == "multinomial":
        pv = np.append(p.probs, p.loss)
        pv = pv / pv.sum()
        counts = rng.multinomial(N, pv)[:-1]
    elif method == "poisson":
        counts = rng.poisson(N * p.probs)
    else:
        raise ContractViolation(f"unknown sampling method {method!r}")
    return CountsVector(counts.astype(np.int64), N)


def normalize_counts(c: CountsVector) -> np.ndarray:
    return normalize_rows(np.asarray(c.counts, dtype=float)[None, :])[0]


def mix_distributions(p_ent: ProbabilityVector, p_sep: ProbabilityVector, p: float) -> ProbabilityVector:
    """``(1 - p) * p_ent + p * p_sep``, the statistics of the mixed state."""
    if not 0 <= p <= 1:
        raise ContractViolation("mixing weight must lie in [0, 1]")
    return ProbabilityVector((1 - p) * p_ent.probs + p * p_sep.probs, (1 - p) * p_ent.loss + p * p_sep.loss)


def probability_matrix(rhos, povm, transmission: float = 1.0) -> np.ndarray:
    """Exact ``n_outcomes x n_states`` probability matrix."""
    rhos = rhos.rhos() if hasattr(rhos, "rhos") else np.asarray(rhos)
    P = _clean(transmission * povm.probabilities(rhos)).T
    return P


def sample_matrix(P: np.ndarray, N, seed, method: str = "multinomial", offset: int = 0) -> CountsMatrix:
    """Sample every column of an exact probability matrix.

    Column ``k`` uses the stream ``column_rng(seed, offset + k)`` so results do
    not depend on evaluation order.
    """
    P = np.asarray(P)
    n = P.shape[1]
    shots = np.broadcast_to(np.asarray(N, dtype=np.int64), (n,)).copy()
    counts = np.zeros(P.shape, dtype=np.int64)
    for k in range(n):
        pk = ProbabilityVector(P[:, k], float(max(0.0, 1.0 - P[:, k].sum())))
        counts[:, k] = sample_counts(pk, shots[k], column_rng(seed, offset + k), method).counts
    return CountsMatrix(counts, shots)


def build_matrices(d, povm, N=DEFAULT_SHOTS, seed: int = 0, method: str = "multinomial",
                   transmission: float = 1.0):
    """Exact probability matrix and, unless ``N`` is ``None``/``inf``, sampled counts.

    Columns follow dataset order.
    """
    P = probability_matrix(d, povm, transmission)
    if N is None or (np.isscalar(N) and np.isinf(N)):
        return P, None
    return P, sample_matrix(P, N, seed, method)


# -- counts file: state_id, shots, c_0..c_24 -----------------------------------

def counts_header(n_outcomes: int = 25) -> list[str]:
    return ["state_id", "shots"] + [f"c{b}" for b in range(n_outcomes)]


def save_counts(c: CountsMatrix, path, state_ids=None) -> None:
    ids = range(c.n_states) if state_ids is None else state_ids
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(counts_header(c.counts.shape[0]))
        for k, sid in enumerate(ids):
            w.writerow([sid, int(c.shots[k]), *map(int, c.counts[:, k])])


def load_counts(path, n_outcomes: int = 25) -> tuple[list[str], CountsMatrix]:
    """Read a counts file; a header that does not match the schema is a hard error."""
    expected = counts_header(n_outcomes)
    try:
        with open(Path(path), newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not rows or rows[0] != expected:
        got = rows[0] if rows else []
        diff = [f"col {i}: expected {e!r}, got {g!r}" for i, (e, g) in
                enumerate(zip(expected, got + [None] * len(expected))) if e != g]
        raise ConfigError(f"{path}: counts schema mismatch; " + "; ".join(diff[:5]))
    ids, shots, counts = [], [], []
    for line_no, r in enumerate(rows[1:], start=2):
        if len(r) != len(expected):
            raise ConfigError(f"{path}:{line_no}: expected {len(expected)} fields, got {len(r)}")
        ids.append(r[0])
        shots.append(int(r[1]))
        counts.append([int(x) for x in r[2:]])
    return ids, CountsMatrix(np.array(counts, dtype=np.int64).T.reshape(n_outcomes, -1), np.array(shots))
