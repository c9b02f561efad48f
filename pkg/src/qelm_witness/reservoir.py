"""Two-photon quantum-walk reservoir and its effective POVM.

Each photon runs a two-step walk in polarization (coin) and orbital angular
momentum (walker). After the walk the polarization is projected on a fixed
state and the OAM is measured in ``n = -2..2``, so each photon has 5
outcomes and the pair has 25.

Basis conventions
-----------------
* single photon: ``polarization (x) OAM``, OAM ordered ``-N..N``; the walk
  operators use the circular basis ``(L, R)`` with
  ``|L> = (|H> + i|V>)/sqrt2`` and ``|R> = (|H> - i|V>)/sqrt2``.
* two-photon input: ``pol_a (x) pol_b`` in the H/V basis.
* outcome index ``b = 5 * (n1 + 2) + (n2 + 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import ATOL_STRUCT, dagger, vec
from .optics import CIRCULAR_TO_LINEAR, polarization_angles, polarization_ket
from .validation import check_ket
from .exceptions import ConfigError, ContractViolation, PovmValidityError

OUTCOME_RANGE = 2
N_SINGLE = 2 * OUTCOME_RANGE + 1
N_OUTCOMES = N_SINGLE**2
OUTCOME_LABELS = [(n1, n2) for n1 in range(-2, 3) for n2 in range(-2, 3)]

# q-plate optical-axis offsets set at fabrication, degrees: (first step, second step)
QPLATE_ALPHAS_DEG = {"a": (19.0, 77.0), "b": (336.0, 163.0)}


def outcome_index(n1: int, n2: int) -> int:
    return N_SINGLE * (n1 + OUTCOME_RANGE) + (n2 + OUTCOME_RANGE)


@dataclass(frozen=True)
class CoinAngles:
    zeta: float
    theta: float
    phi: float


@dataclass(frozen=True)
class QPlateSetting:
    alpha: float
    delta: float


@dataclass(frozen=True)
class WalkConfig:
    """Coin angles plus the two q-plates.

    The standard walk uses ``delta = pi/2`` then ``delta = pi``; other
    tunings are accepted for toy checks.
    """

    coin: CoinAngles
    qplate1: QPlateSetting
    qplate2: QPlateSetting

    @classmethod
    def standard(cls, coin: CoinAngles, alpha1: float, alpha2: float) -> "WalkConfig":
        return cls(coin, QPlateSetting(alpha1, np.pi / 2), QPlateSetting(alpha2, np.pi))


@dataclass(frozen=True)
class ReservoirConfig:
    walk_a: WalkConfig
    walk_b: WalkConfig
    projection_a: np.ndarray = field(default_factory=lambda: np.array([1, 0], dtype=complex))
    projection_b: np.ndarray = field(default_factory=lambda: np.array([1, 0], dtype=complex))
    oam_internal_halfwidth: int = 4
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "projection_a", check_ket(self.projection_a, 2))
        object.__setattr__(self, "projection_b", check_ket(self.projection_b, 2))
        if self.oam_internal_halfwidth < 2:
            raise ContractViolation("oam_internal_halfwidth must be at least 2")

    # -- parameter-vector view, used by the optimizer ---------------------
    def to_vector(self) -> np.ndarray:
        """``[zeta, theta, phi] x 2 walks + [theta_p, phi_p] x 2 arms``, radians."""
        out = []
        for w in (self.walk_a, self.walk_b):
            out += [w.coin.zeta, w.coin.theta, w.coin.phi]
        for eta in (self.projection_a, self.projection_b):
            out += list(polarization_angles(eta))
        return np.array(out, dtype=float)

    @classmethod
    def from_vector(cls, x, oam_internal_halfwidth: int = 4, name: str = "") -> "ReservoirConfig":
        x = np.asarray(x, dtype=float)
        if x.shape != (10,):
            raise ContractViolation("reservoir parameter vector must have 10 entries")
        walks = []
        for k, arm in enumerate("ab"):
            a1, a2 = np.deg2rad(QPLATE_ALPHAS_DEG[arm])
            walks.append(WalkConfig.standard(CoinAngles(*x[3 * k: 3 * k + 3]), a1, a2))
        return cls(
            walks[0], walks[1],
            polarization_ket(x[6], x[7]), polarization_ket(x[8], x[9]),
            oam_internal_halfwidth, name,
        )

    def to_dict(self) -> dict:
        """Serializable form, angles in degrees."""
        out = {"name": self.name, "oam_internal_halfwidth": self.oam_internal_halfwidth}
        for key, w in (("walk_a", self.walk_a), ("walk_b", self.walk_b)):
            out[key] = {
                "zeta": np.rad2deg(w.coin.zeta), "theta": np.rad2deg(w.coin.theta),
                "phi": np.rad2deg(w.coin.phi),
                "alpha1": np.rad2deg(w.qplate1.alpha), "alpha2": np.rad2deg(w.qplate2.alpha),
            }
            if not (np.isclose(w.qplate1.delta, np.pi / 2) and np.isclose(w.qplate2.delta, np.pi)):
                out[key]["delta1"] = np.rad2deg(w.qplate1.delta)
                out[key]["delta2"] = np.rad2deg(w.qplate2.delta)
        for key, eta in (("projection_a", self.projection_a), ("projection_b", self.projection_b)):
            tp, pp = polarization_angles(eta)
            out[key] = {"theta_p": np.rad2deg(tp), "phi_p": np.rad2deg(pp)}
        return _plain(out)

    @classmethod
    def from_dict(cls, d: dict) -> "ReservoirConfig":
        try:
            walks = []
            for key in ("walk_a", "walk_b"):
                w = d[key]
                coin = CoinAngles(*np.deg2rad([w["zeta"], w["theta"], w["phi"]]))
                q1 = QPlateSetting(np.deg2rad(w["alpha1"]), np.deg2rad(w.get("delta1", 90.0)))
                q2 = QPlateSetting(np.deg2rad(w["alpha2"]), np.deg2rad(w.get("delta2", 180.0)))
                walks.append(WalkConfig(coin, q1, q2))
            etas = [
                polarization_ket(*np.deg2rad([d[key]["theta_p"], d[key]["phi_p"]]))
                for key in ("projection_a", "projection_b")
            ]
            return cls(
                walks[0], walks[1], etas[0], etas[1],
                int(d.get("oam_internal_halfwidth", 4)), str(d.get("name", "")),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"reservoir config: missing or malformed key {exc}") from exc


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def swap_coin_qwps(cfg: ReservoirConfig, name: str = "") -> ReservoirConfig:
    """Exchange the two coin quarter-wave-plate angles (zeta <-> phi) in both walks."""
    def swapped(w: WalkConfig) -> WalkConfig:
        return replace(w, coin=CoinAngles(w.coin.phi, w.coin.theta, w.coin.zeta))
    return replace(cfg, walk_a=swapped(cfg.walk_a), walk_b=swapped(cfg.walk_b), name=name)


def random_reservoir(rng: np.random.Generator, oam_internal_halfwidth: int = 4, name: str = "") -> ReservoirConfig:
    """Coin angles uniform in [0, pi), projection uniform on the Bloch sphere."""
    coins = rng.uniform(0, np.pi, 6)
    # Bloch polar angle is 2*theta_p; uniform cos of it gives the uniform sphere
    theta_p = 0.5 * np.arccos(rng.uniform(-1, 1, 2))
    phi_p = rng.uniform(0, 2 * np.pi, 2)
    x = np.concatenate([coins, [theta_p[0], phi_p[0], theta_p[1], phi_p[1]]])
    return ReservoirConfig.from_vector(x, oam_internal_halfwidth, name)


# ---------------------------------------------------------------------------
# walk operators
# ---------------------------------------------------------------------------

def coin_operator(c: CoinAngles) -> np.ndarray:
    """Coin unitary in the circular basis ``(L, R)``."""
    eta = c.zeta - 2 * c.theta + c.phi
    return np.array([
        [np.exp(-1j * (c.zeta - c.phi)) * np.cos(eta), np.exp(1j * (c.zeta + c.phi)) * np.sin(eta)],
        [-np.exp(-1j * (c.zeta + c.phi)) * np.sin(eta), np.exp(1j * (c.zeta - c.phi)) * np.cos(eta)],
    ])


def shift_operator(q: QPlateSetting, oam_halfwidth: int) -> np.ndarray:
    """Controlled OAM shift of a q-plate on ``(L, R) (x) OAM[-N..N]``.

    ``|R, n+1>`` and ``|L, n>`` are mixed by the 2x2 block
    ``[[cos(d/2), i sin(d/2) e^{2ia}], [i sin(d/2) e^{-2ia}, cos(d/2)]]``.
    Blocks are laid for every ``n`` with both partners inside the truncation;
    the two leftover corners ``|R,-N>`` and ``|L,N>`` act as identity so the
    truncated operator stays unitary.
    """
    n_max = int(oam_halfwidth)
    if n_max < 1:
        raise ContractViolation("oam_halfwidth must be >= 1")
    m = 2 * n_max + 1
    c = np.cos(q.delta / 2)
    s = 1j * np.sin(q.delta / 2)
    ph = np.exp(2j * q.alpha)
    S = np.zeros((2 * m, 2 * m), dtype=complex)

    def L(n):
        return n + n_max

    def R(n):
        return m + n + n_max

    for n in range(-n_max, n_max):
        S[L(n), L(n)] = c
        S[R(n + 1), R(n + 1)] = c
        S[L(n), R(n + 1)] = s * ph
        S[R(n + 1), L(n)] = s * np.conj(ph)
    S[R(-n_max), R(-n_max)] = 1.0
    S[L(n_max), L(n_max)] = 1.0
    return S


def single_walk_unitary(w: WalkConfig, oam_halfwidth: int, basis: str = "circular") -> np.ndarray:
    """``S(alpha2, delta2) (C (x) I) S(alpha1, delta1)`` for one photon.

    ``basis="linear"`` rotates the polarization factor to H/V.
    """
    eye = np.eye(2 * oam_halfwidth + 1)
    U = shift_operator(w.qplate2, oam_halfwidth) @ np.kron(coin_operator(w.coin), eye) @ shift_operator(
        w.qplate1, oam_halfwidth
    )
    if basis == "circular":
        return U
    if basis == "linear":
        T = np.kron(CIRCULAR_TO_LINEAR, eye)
        return T @ U @ dagger(T)
    raise ContractViolation(f"unknown basis {basis!r}")


def single_photon_contraction(w: WalkConfig, eta: np.ndarray, oam_halfwidth: int) -> np.ndarray:
    """5x2 map from H/V polarization to OAM amplitudes ``n = -2..2`` after projecting on ``eta``."""
    U = single_walk_unitary(w, oam_halfwidth, basis="linear")
    m = 2 * oam_halfwidth + 1
    cols = [pol * m + oam_halfwidth for pol in (0, 1)]  # |pol, n=0>
    out = U[:, cols].reshape(2, m, 2)  # (pol_out, n, pol_in)
    projected = np.einsum("p,pnk->nk", np.conj(eta), out)
    lo = oam_halfwidth - OUTCOME_RANGE
    return projected[lo: lo + N_SINGLE]


def channel_contraction(cfg: ReservoirConfig) -> np.ndarray:
    """25x4 contraction ``K``: two-qubit polarization amplitudes to post-selected OAM amplitudes.

    The walks act independently on each photon, so ``K = K_a (x) K_b`` with
    rows in outcome order ``b = 5(n1+2) + (n2+2)``.
    """
    N = cfg.oam_internal_halfwidth
    Ka = single_photon_contraction(cfg.walk_a, cfg.projection_a, N)
    Kb = single_photon_contraction(cfg.walk_b, cfg.projection_b, N)
    return np.kron(Ka, Kb)


def full_channel_contraction(cfg: ReservoirConfig) -> np.ndarray:
    """Same ``K`` as :func:`channel_contraction` built from the full two-photon unitary.

    Slow reference route, kept for cross-checking the factorized one.
    """
    N = cfg.oam_internal_halfwidth
    m = 2 * N + 1
    Ua = single_walk_unitary(cfg.walk_a, N, basis="linear")
    Ub = single_walk_unitary(cfg.walk_b, N, basis="linear")
    U = np.kron(Ua, Ub)  # (pol_a, oam_a, pol_b, oam_b)
    zero = np.zeros(m)
    zero[N] = 1.0
    embed = np.zeros((4 * m * m, 4), dtype=complex)
    for i, (pa, pb) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        ea = np.kron(np.eye(2)[pa], zero)
        eb = np.kron(np.eye(2)[pb], zero)
        embed[:, i] = np.kron(ea, eb)
    out = (U @ embed).reshape(2, m, 2, m, 4)
    proj = np.einsum("a,b,anbmk->nmk", np.conj(cfg.projection_a), np.conj(cfg.projection_b), out)
    lo = N - OUTCOME_RANGE
    return proj[lo: lo + N_SINGLE, lo: lo + N_SINGLE].reshape(N_OUTCOMES, 4)


# ---------------------------------------------------------------------------
# effective POVM
# ---------------------------------------------------------------------------

@dataclass
class EffectivePovm:
    """Effects ``mu_b`` acting on the input; ``p_b(rho) = Tr(mu_b rho)``.

    Sub-normalized: ``sum_b mu_b <= I``, the deficit being post-selection loss.
    """

    effects: np.ndarray
    outcome_labels: list = field(default_factory=lambda: list(OUTCOME_LABELS))

    def __post_init__(self):
        self.effects = np.asarray(self.effects, dtype=complex)
        if self.effects.ndim != 3 or self.effects.shape[1] != self.effects.shape[2]:
            raise ContractViolation("effects must have shape (n_outcomes, d, d)")
        if len(self.outcome_labels) != self.n_outcomes:
            self.outcome_labels = list(range(self.n_outcomes))

    @property
    def n_outcomes(self) -> int:
        return self.effects.shape[0]

    @property
    def dim(self) -> int:
        return self.effects.shape[1]

    @classmethod
    def from_contraction(cls, K: np.ndarray) -> "EffectivePovm":
        K = np.asarray(K)
        # mu_b = K^dag |b><b| K
        effects = np.einsum("bi,bj->bij", K.conj(), K)
        labels = OUTCOME_LABELS if K.shape[0] == N_OUTCOMES else list(range(K.shape[0]))
        return cls(effects, list(labels))

    def total(self) -> np.ndarray:
        return self.effects.sum(axis=0)

    def vectorized(self) -> np.ndarray:
        """``d^2 x n_outcomes`` matrix whose columns are ``vec(mu_b)``."""
        return np.stack([vec(e) for e in self.effects], axis=1)

    def probabilities(self, rho: np.ndarray) -> np.ndarray:
        """Real outcome probabilities for one state, or a stack ``(n, d, d)``."""
        rho = np.asarray(rho)
        return np.einsum("bij,...ji->...b", self.effects, rho).real

    def check(self, atol: float = ATOL_STRUCT) -> "EffectivePovm":
        """Raise unless every effect is PSD and the sum is at most identity."""
        for b, e in enumerate(self.effects):
            if not np.allclose(e, dagger(e), atol=atol, rtol=0):
                raise PovmValidityError(f"effect {b} is not Hermitian")
            if np.linalg.eigvalsh(e)[0] < -atol:
                raise PovmValidityError(f"effect {b} is not positive semidefinite")
        if np.linalg.eigvalsh(np.eye(self.dim) - self.total())[0] < -atol:
            raise PovmValidityError("effects sum to more than the identity")
        return self


def effective_povm(cfg: ReservoirConfig) -> EffectivePovm:
    return EffectivePovm.from_contraction(channel_contraction(cfg))


def oam_support(cfg: ReservoirConfig) -> np.ndarray:
    """Total output weight per internal OAM value of each walk (before projection).

    Used to verify that nothing reaches ``|n| > 2`` from ``n = 0``.
    """
    N = cfg.oam_internal_halfwidth
    m = 2 * N + 1
    weights = []
    for w in (cfg.walk_a, cfg.walk_b):
        U = single_walk_unitary(w, N)
        cols = U[:, [N, m + N]]
        weights.append(np.sum(np.abs(cols.reshape(2, m, 2)) ** 2, axis=(0, 2)))
    return np.array(weights)


def identity_walk() -> WalkConfig:
    """Trivial coin and untuned q-plates: acts as the identity."""
    return WalkConfig(CoinAngles(0.0, 0.0, 0.0), QPlateSetting(0.0, 0.0), QPlateSetting(0.0, 0.0))


__all__ = [
    "CoinAngles", "QPlateSetting", "WalkConfig", "ReservoirConfig", "EffectivePovm",
    "coin_operator", "shift_operator", "single_walk_unitary", "channel_contraction",
    "full_channel_contraction", "effective_povm", "swap_coin_qwps", "random_reservoir",
    "outcome_index", "oam_support", "identity_walk",
    "N_OUTCOMES", "OUTCOME_LABELS", "QPLATE_ALPHAS_DEG",
]
