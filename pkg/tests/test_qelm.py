import numpy as np
import pytest
from sklearn.base import clone

from qelm_witness.exceptions import ConfigError, ContractViolation, TrainingError
from qelm_witness.harness.scenarios import loglog_slope
from qelm_witness.linalg import random_density_matrix
from qelm_witness.observables import BELL_STATES, all_pauli_products, bell_witness, expectation_matrix
from qelm_witness.qelm import (
    QELMRegressor, ReadoutMatrix, evaluate, load_readout, mse, negative_recall, predict, save_readout, train,
    witness_confusion,
)
from qelm_witness.sampling import CountsMatrix, probability_matrix, sample_matrix
from qelm_witness.states import REFERENCE_STATES, SAME_ANGLES, generate_dataset

PAULIS = all_pauli_products()
W_PHI = bell_witness(1).observable


def random_states(n, rng):
    return np.stack([random_density_matrix(4, rng) for _ in range(n)])


@pytest.fixture(scope="module")
def exact_readout(povm_r1):
    rng = np.random.default_rng(0)
    rhos = random_states(60, rng)
    w, rep = train(probability_matrix(rhos, povm_r1), expectation_matrix(PAULIS, rhos), input_form="frequencies")
    return w, rep


def test_exact_inversion_full_span(povm_r1, exact_readout, rng):
    w, rep = exact_readout
    assert rep.effective_rank == 16
    assert np.all(rep.mse_train < 1e-20)
    test = random_states(100, rng)
    pred = predict(w, probability_matrix(test, povm_r1), "frequencies")
    assert np.max(np.abs(pred - expectation_matrix(PAULIS, test))) < 1e-9


def test_exact_consistency_for_any_witness(povm_r1, exact_readout, rng):
    w, _ = exact_readout
    test = random_states(50, rng)
    P = probability_matrix(test, povm_r1)
    # any observable is a linear combination of Pauli products
    coeffs = np.array([np.trace(p.matrix @ W_PHI.matrix).real / 4 for p in PAULIS])
    assert np.allclose(coeffs @ predict(w, P, "frequencies"), expectation_matrix([W_PHI], test)[0], atol=1e-9)


@pytest.fixture(scope="module")
def vv_readout(povm_r1):
    d = generate_dataset(REFERENCE_STATES["VV"], REFERENCE_STATES["PsiPlus"], 60, 0, SAME_ANGLES, seed=1)
    P = probability_matrix(d, povm_r1)
    w, rep = train(P, expectation_matrix([W_PHI], d.rhos()), input_form="frequencies")
    return w, rep


def test_span_confinement_in_span(povm_r1, vv_readout):
    w, rep = vv_readout
    assert rep.effective_rank == 9
    inside = generate_dataset(REFERENCE_STATES["VV"], REFERENCE_STATES["PsiPlus"], 20, 0, SAME_ANGLES, seed=99)
    pred = predict(w, probability_matrix(inside, povm_r1), "frequencies")
    assert np.max(np.abs(pred - expectation_matrix([W_PHI], inside.rhos()))) < 1e-9


def test_span_confinement_out_of_span(povm_r1, vv_readout):
    w, _ = vv_readout
    psi_plus, singlet = (np.outer(k, k.conj()) for k in (REFERENCE_STATES["PsiPlus"].ket, BELL_STATES["Psi-"]))
    pred = predict(w, probability_matrix(np.stack([psi_plus, singlet]), povm_r1), "frequencies")[0]
    # Psi+ is symmetric, so its projector lies in the span of |aa><aa|; the singlet does not
    assert abs(pred[0] - np.trace(W_PHI.matrix @ psi_plus).real) < 1e-9
    assert abs(pred[1] - np.trace(W_PHI.matrix @ singlet).real) > 1e-3


def test_bias_constant_for_shared_out_of_span_part(povm_r1, vv_readout, rng):
    w, _ = vv_readout
    seps = generate_dataset(REFERENCE_STATES["VV"], REFERENCE_STATES["PsiPlus"], 5, 0, SAME_ANGLES, seed=3).rhos()
    outside = random_density_matrix(4, rng)
    mixes = np.stack([0.5 * outside + 0.5 * s for s in seps])
    bias = predict(w, probability_matrix(mixes, povm_r1), "frequencies")[0] - expectation_matrix([W_PHI], mixes)[0]
    assert np.ptp(bias) < 1e-9 and abs(bias[0]) > 1e-4


def test_zero_readout_predicts_zero():
    w = ReadoutMatrix(np.zeros((3, 25)), "frequencies")
    assert not predict(w, np.random.default_rng(0).random((25, 4)), "frequencies").any()


def test_eigenprojector_toy():
    # Z measured with its own eigenprojectors: W holds the eigenvalues
    w = ReadoutMatrix(np.array([[1.0, -1.0]]), "frequencies")
    assert np.isclose(predict(w, np.array([0.7, 0.3]), "frequencies")[0], 0.4)


def test_raw_count_readout_scales_with_shots(povm_r1):
    d = generate_dataset(REFERENCE_STATES["VH"], REFERENCE_STATES["PsiPlus"], 100, 100, seed=2)
    P = probability_matrix(d, povm_r1)
    truths = expectation_matrix([W_PHI], d.rhos())
    w, _ = train(sample_matrix(P, 10_000, 1), truths, input_form="raw_counts")
    same = predict(w, sample_matrix(P, 10_000, 2))
    double = predict(w, sample_matrix(P, 20_000, 2))
    assert np.isclose(np.sum(double * same) / np.sum(same**2), 2.0, rtol=0.02)
    # per-shot frequencies remove the scale
    wf, _ = train(sample_matrix(P, 10_000, 1), truths, input_form="frequencies")
    ratio = predict(wf, sample_matrix(P, 20_000, 2)) / predict(wf, sample_matrix(P, 10_000, 2))
    assert abs(np.median(ratio) - 1) < 0.05


def test_form_mismatch():
    w = ReadoutMatrix(np.ones((1, 25)), "normalized_counts")
    with pytest.raises(ContractViolation):
        predict(w, np.ones((25, 2)), "frequencies")
    with pytest.raises(ContractViolation):
        predict(w, np.ones((25, 2)))


def test_training_errors():
    with pytest.raises(TrainingError):
        train(np.zeros((25, 4)), np.ones((1, 4)), input_form="frequencies")
    with pytest.raises(ContractViolation):
        train(np.ones((25, 4)), np.ones((1, 3)), input_form="frequencies")
    with pytest.raises(ContractViolation):
        ReadoutMatrix(np.array([[np.nan]]), "frequencies")


def test_normalized_counts_default():
    c = CountsMatrix(np.arange(1, 51).reshape(25, 2), np.array([5000, 5000]))
    w, _ = train(c, np.ones((1, 2)))
    assert w.trained_on == "normalized_counts"


def test_mse_examples():
    t = np.array([0.1, -0.3, 0.5])
    assert mse(t, t) == 0
    assert np.isclose(mse(t + 0.2, t), 0.04)
    with pytest.raises(ContractViolation):
        mse(t, t[:2])


def test_zero_predictor_mse_on_entangled_set():
    d = generate_dataset(REFERENCE_STATES["VV"], REFERENCE_STATES["PsiPlus"], 0, 200, seed=4)
    t = expectation_matrix([W_PHI], d.rhos())[0]
    assert np.isclose(mse(np.zeros_like(t), t), np.mean(t**2))


def test_confusion_examples():
    t = np.array([-0.4, -0.1, 0.2, 0.3])
    c = witness_confusion(t, t, mse_train=0.01)
    assert np.array_equal(c.confusion, [[2, 0], [0, 2]]) and c.accuracy == 1.0
    assert c.certified_fraction == 0.5  # only -0.4 is below -3 * 0.1
    z = witness_confusion(np.zeros(4), t)
    assert np.array_equal(z.confusion, [[0, 2], [0, 2]]) and z.accuracy == 0.5
    assert np.isnan(z.certified_fraction)
    assert negative_recall(z.confusion) == 0.0
    assert z.confusion.sum() == 4


def test_ridge_tends_to_pinv(povm_r1, rng):
    rhos = random_states(40, rng)
    P = probability_matrix(rhos, povm_r1)
    M = expectation_matrix(PAULIS, rhos)
    w0, _ = train(P, M, input_form="frequencies")
    test = probability_matrix(random_states(10, rng), povm_r1)
    errs = []
    for lam in (1e-4, 1e-7, 1e-10):
        wr, _ = train(P, M, method="ridge", ridge_lambda=lam, input_form="frequencies")
        errs.append(np.max(np.abs(predict(wr, test, "frequencies") - predict(w0, test, "frequencies"))))
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-4


def test_sklearn_estimator(povm_r1, rng):
    rhos = random_states(40, rng)
    X = probability_matrix(rhos, povm_r1).T
    y = expectation_matrix([W_PHI], rhos)[0]
    est = QELMRegressor(rcond=1e-10)
    assert est.get_params()["rcond"] == 1e-10
    twin = clone(est).set_params(method="ridge", ridge_lambda=1e-12)
    assert twin.get_params()["method"] == "ridge" and not hasattr(twin, "coef_")
    est.fit(X, y)
    assert est.predict(X).shape == (40,)
    assert est.score(X, y) > 1 - 1e-9
    assert est.effective_rank_ == 16
    aff = QELMRegressor(fit_intercept=True).fit(X, y + 0.25)
    assert np.allclose(aff.predict(X), y + 0.25, atol=1e-8)
    with pytest.raises(ContractViolation):
        QELMRegressor(method="sgd").fit(X, y)
    with pytest.raises(ContractViolation):
        est.predict(X[:, :10])


def test_estimator_normalizes_rows():
    X = np.array([[1.0, 3.0], [2.0, 2.0], [4.0, 0.0]])
    y = np.array([0.5, 0.0, -1.0])
    est = QELMRegressor(input_form="normalized_counts").fit(X, y)
    assert np.allclose(est.predict(10 * X), y)


def test_inverse_n_scaling_with_exact_readout(povm_r1, exact_readout, rng):
    w, _ = exact_readout
    test = random_states(50, rng)
    P = probability_matrix(test, povm_r1)
    truths = expectation_matrix([W_PHI], test)
    coeffs = np.array([np.trace(p.matrix @ W_PHI.matrix).real / 4 for p in PAULIS])
    ns = np.array([1e4, 3e4, 1e5, 3e5, 1e6])
    errs = []
    for N in ns:
        e = [mse(coeffs @ predict(w, sample_matrix(P, int(N), (int(N), r))), truths[0]) for r in range(10)]
        errs.append(np.mean(e))
    assert -1.15 <= loglog_slope(ns, errs) <= -0.85


def test_evaluate_report(povm_r1, exact_readout, rng):
    w, _ = exact_readout
    w = ReadoutMatrix(w.W, w.trained_on, observable_names=[p.name for p in PAULIS])
    test = random_states(10, rng)
    rep = evaluate(w, probability_matrix(test, povm_r1), expectation_matrix(PAULIS, test), witness="ZZ",
                   form="frequencies")
    assert rep.confusion.sum() == 10 and rep.accuracy == 1.0
    assert np.all(rep.mse_test < 1e-18)


def test_readout_file_round_trip(tmp_path, exact_readout):
    w, _ = exact_readout
    w = ReadoutMatrix(w.W, "frequencies", 1e-12, None, [p.name for p in PAULIS], np.arange(16) * 0.1)
    save_readout(w, tmp_path / "w.csv")
    again = load_readout(tmp_path / "w.csv")
    assert np.array_equal(again.W, w.W) and np.array_equal(again.intercept, w.intercept)
    assert again.observable_names == w.observable_names and again.trained_on == "frequencies"
    (tmp_path / "bad.csv").write_text("observable,b0\nx,1\n")
    with pytest.raises(ConfigError):
        load_readout(tmp_path / "bad.csv")
