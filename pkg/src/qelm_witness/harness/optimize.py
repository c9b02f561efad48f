"""Derivative-free search for reservoir angles minimizing ``Tr(F^+)``."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..reservoir import ReservoirConfig, effective_povm, random_reservoir
from ..shadow import frame_superoperator

log = logging.getLogger(__name__)

RANK_PENALTY = 1e12
N_RESTARTS = 32


def frame_objective(cfg: ReservoirConfig) -> float:
    """``Tr(F^+)`` of the effective POVM, with a large penalty per missing rank."""
    f = frame_superoperator(effective_povm(cfg))
    missing = 16 - f.rank
    return f.inverse_trace() + RANK_PENALTY * missing


def _objective_vec(x: np.ndarray, oam: int) -> float:
    return frame_objective(ReservoirConfig.from_vector(x, oam))


@dataclass
class OptimizationResult:
    config: ReservoirConfig
    objective: float
    restart_objectives: list
    evaluations: int


def optimize_reservoir(seed_cfg: ReservoirConfig | None = None, budget: int = 6400, seed: int = 0,
                       restarts: int = N_RESTARTS) -> OptimizationResult:
    """Nelder-Mead from ``restarts`` random starting points (the first is ``seed_cfg`` if given).

    The evaluation budget is split evenly between restarts; the best end point
    is returned.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    rng = np.random.default_rng(seed)
    oam = 4 if seed_cfg is None else seed_cfg.oam_internal_halfwidth
    per_run = max(1, budget // restarts)
    best = None
    ends = []
    used = 0
    for r in range(restarts):
        start = seed_cfg if (r == 0 and seed_cfg is not None) else random_reservoir(rng, oam)
        x0 = start.to_vector()
        res = minimize(
            _objective_vec, x0, args=(oam,), method="Nelder-Mead",
            options={"maxfev": per_run, "xatol": 1e-8, "fatol": 1e-10, "adaptive": True},
        )
        used += res.nfev
        ends.append(float(res.fun))
        if best is None or res.fun < best.fun:
            best = res
        log.debug("restart %d: objective %.6g after %d evaluations", r, res.fun, res.nfev)
    x = best.x.copy()
    x[:6] = np.mod(x[:6], np.pi)  # the coin matrix is pi-periodic in each waveplate angle
    cfg = ReservoirConfig.from_vector(x, oam, name="optimized")
    value = frame_objective(cfg)
    log.info("optimized reservoir: Tr(F^+) = %.6g (%d evaluations)", value, used)
    return OptimizationResult(cfg, value, ends, used)
