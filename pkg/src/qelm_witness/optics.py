"""Jones matrices for waveplates, in the H/V basis.

Conventions::

    HWP(t) = [[cos 2t, sin 2t], [sin 2t, -cos 2t]]
    QWP(t) = R(t) @ diag(1, i) @ R(-t)

with ``R`` the real rotation. With these, ``QWP(t) @ QWP(t) == HWP(t)`` exactly.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from .exceptions import NumericalError
from .validation import check_ket

H = np.array([1.0, 0.0], dtype=complex)
V = np.array([0.0, 1.0], dtype=complex)
# circular states as columns, ordered (L, R)
CIRCULAR_TO_LINEAR = np.array([[1.0, 1.0], [1j, -1j]]) / np.sqrt(2)


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def hwp(theta: float) -> np.ndarray:
    c, s = np.cos(2 * theta), np.sin(2 * theta)
    return np.array([[c, s], [s, -c]], dtype=complex)


def qwp(theta: float) -> np.ndarray:
    return rotation(theta) @ np.diag([1.0, 1j]) @ rotation(-theta)


def prep_unitary(phi: float, theta: float) -> np.ndarray:
    """Preparation unitary ``QWP(phi) @ HWP(theta)`` applied to one photon."""
    return qwp(phi) @ hwp(theta)


def polarization_ket(theta_p: float, phi_p: float) -> np.ndarray:
    """``cos(theta_p)|H> + exp(i phi_p) sin(theta_p)|V>``."""
    return np.array([np.cos(theta_p), np.exp(1j * phi_p) * np.sin(theta_p)], dtype=complex)


def polarization_angles(eta: np.ndarray) -> tuple[float, float]:
    """Inverse of :func:`polarization_ket`, ignoring the global phase of ``eta``."""
    eta = check_ket(eta, 2)
    theta_p = float(np.arctan2(abs(eta[1]), abs(eta[0])))
    phi_p = float(np.angle(eta[1]) - np.angle(eta[0])) if abs(eta[1]) > 0 and abs(eta[0]) > 0 else 0.0
    return theta_p, float(np.mod(phi_p, 2 * np.pi))


def _projection_loss(x: np.ndarray, eta: np.ndarray) -> float:
    out = qwp(x[0]) @ hwp(x[1]) @ eta
    return 1.0 - abs(out[0]) ** 2


def projection_waveplates(eta: np.ndarray, tol: float = 1e-10) -> tuple[float, float]:
    """Angles ``(theta_proj, phi_proj)`` with ``QWP(theta_proj) HWP(phi_proj) eta ~ |H>``.

    A PBS transmitting H after these two plates projects onto ``eta``.
    Solved numerically from a coarse grid; both angles are returned in [0, pi).
    """
    eta = check_ket(eta, 2)
    grid = np.linspace(0, np.pi, 25, endpoint=False)
    starts = sorted(
        ((_projection_loss(np.array([a, b]), eta), a, b) for a in grid for b in grid)
    )[:4]
    for _, a, b in starts:
        res = minimize(
            _projection_loss, x0=[a, b], args=(eta,), method="Nelder-Mead",
            options={"xatol": 1e-13, "fatol": 1e-18, "maxiter": 4000},
        )
        x = np.mod(res.x, np.pi)
        if abs(1.0 - np.sqrt(1.0 - _projection_loss(x, eta))) < tol:
            return float(x[0]), float(x[1])
    raise NumericalError("no waveplate pair found projecting onto the requested polarization")
