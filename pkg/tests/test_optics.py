import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qelm_witness.linalg import is_unitary
from qelm_witness.optics import H, V, hwp, polarization_angles, polarization_ket, prep_unitary, projection_waveplates, qwp


def same_up_to_phase(a, b, atol=1e-12):
    return np.isclose(abs(np.vdot(a, b)), 1.0, atol=atol)


def proportional(a, b, atol=1e-12):
    k = np.vdot(b.ravel(), a.ravel()) / np.vdot(b.ravel(), b.ravel())
    return np.allclose(a, k * b, atol=atol) and np.isclose(abs(k), 1.0)


def test_waveplates_at_zero():
    assert proportional(hwp(0.0), np.diag([1, -1]))
    assert proportional(qwp(0.0), np.diag([1, 1j]))


def test_hwp_swaps_h_and_v():
    assert same_up_to_phase(hwp(np.pi / 4) @ H, V)


def test_qwp_keeps_h():
    assert same_up_to_phase(qwp(0.0) @ H, H)


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10, allow_nan=False))
def test_waveplate_algebra(theta):
    assert proportional(hwp(theta) @ hwp(theta), np.eye(2))
    assert proportional(qwp(theta) @ qwp(theta), hwp(theta))
    assert is_unitary(hwp(theta)) and is_unitary(qwp(theta))


def test_waveplates_pi_periodic(rng):
    for t in rng.uniform(0, np.pi, 5):
        assert np.allclose(hwp(t), hwp(t + np.pi))
        assert np.allclose(qwp(t), qwp(t + np.pi))


def test_prep_unitary_examples():
    assert np.allclose(np.abs(prep_unitary(0, 0)), np.eye(2))
    assert same_up_to_phase(prep_unitary(0, np.pi / 4) @ H, V)


def test_prep_unitary_coverage_is_two_parameter_family(rng):
    """U(phi, theta)|V> reaches the whole Bloch sphere, but only through two angles."""
    angles = rng.uniform(0, np.pi, (10_000, 2))
    kets = np.array([prep_unitary(p, t) @ V for p, t in angles])
    rho = np.einsum("ni,nj->nij", kets, kets.conj())
    bloch = np.stack([2 * rho[:, 0, 1].real, -2 * rho[:, 0, 1].imag, (rho[:, 0, 0] - rho[:, 1, 1]).real], axis=1)
    assert np.allclose(np.linalg.norm(bloch, axis=1), 1.0)
    # first moments span all three Bloch directions; the map is a 2-parameter family
    moments = np.stack([bloch[:, i] * bloch[:, j] for i in range(3) for j in range(i, 3)], axis=1)
    assert np.linalg.matrix_rank(moments - moments.mean(0), tol=1e-8) >= 3
    J = np.stack([(np.array([prep_unitary(p + 1e-6, t) @ V, prep_unitary(p, t + 1e-6) @ V])
                   - prep_unitary(p, t) @ V) / 1e-6 for p, t in angles[:50]])
    assert all(np.linalg.matrix_rank(np.hstack([j.real, j.imag]), tol=1e-4) <= 2 for j in J)


def test_polarization_ket_round_trip(rng):
    for _ in range(20):
        tp, pp = rng.uniform(0, np.pi / 2), rng.uniform(0, 2 * np.pi)
        eta = polarization_ket(tp, pp)
        assert np.isclose(np.linalg.norm(eta), 1)
        assert same_up_to_phase(polarization_ket(*polarization_angles(eta)), eta)


def test_projection_waveplates_examples():
    t, p = projection_waveplates(H)
    assert same_up_to_phase(qwp(t) @ hwp(p) @ H, H, atol=1e-10)
    t, p = projection_waveplates(V)
    assert same_up_to_phase(qwp(t) @ hwp(p) @ V, H, atol=1e-10)
    # the documented solutions also work directly
    assert same_up_to_phase(qwp(0) @ hwp(0) @ H, H)
    assert same_up_to_phase(qwp(0) @ hwp(np.pi / 4) @ V, H)


def test_projection_waveplates_random(rng):
    for _ in range(10):
        eta = rng.normal(size=2) + 1j * rng.normal(size=2)
        eta /= np.linalg.norm(eta)
        t, p = projection_waveplates(eta)
        assert abs(np.vdot(H, qwp(t) @ hwp(p) @ eta)) == pytest.approx(1.0, abs=1e-10)
