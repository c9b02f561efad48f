"""Linear readout trained on measurement statistics.

:class:`QELMRegressor` is a scikit-learn estimator: ``X`` holds one row of
outcome statistics per state, ``y`` the target expectation values. The
module-level :func:`train` / :func:`predict` work with the column-per-state
matrices used elsewhere in the package and return a :class:`ReadoutMatrix`.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigError, ContractViolation, TrainingError
from .linalg import pseudoinverse, singular_values
from .sampling import CountsMatrix, CountsVector
from .validation import check_statistics, normalize_rows

INPUT_FORMS = ("frequencies", "raw_counts", "normalized_counts")
METHODS = ("pinv", "ridge")


def _prepare_statistics(X: np.ndarray, input_form: str) -> np.ndarray:
    if input_form not in INPUT_FORMS:
        raise ContractViolation(f"input_form must be one of {INPUT_FORMS}")
    if input_form == "normalized_counts":
        return normalize_rows(X)
    return X


class QELMRegressor(RegressorMixin, BaseEstimator):
    """Least-squares linear map from outcome statistics to expectation values.

    Parameters
    ----------
    method : {"pinv", "ridge"}
        ``pinv`` solves ``W D = M`` with the Moore-Penrose pseudoinverse of the
        statistics matrix ``D``; ``ridge`` uses ``M D^T (D D^T + lambda I)^-1``.
    rcond : float
        Relative singular-value cutoff of the pseudoinverse.
    ridge_lambda : float
        Regularization strength for ``method="ridge"``.
    input_form : {"frequencies", "raw_counts", "normalized_counts"}
        ``normalized_counts`` divides every row of ``X`` by its sum, in both
        ``fit`` and ``predict``. The other forms use ``X`` as given.
    fit_intercept : bool
        Append a constant column, giving an affine rather than linear readout.
    """

    def __init__(self, method="pinv", rcond=1e-12, ridge_lambda=1e-8,
                 input_form="frequencies", fit_intercept=False):
        self.method = method
        self.rcond = rcond
        self.ridge_lambda = ridge_lambda
        self.input_form = input_form
        self.fit_intercept = fit_intercept

    def _design(self, X) -> np.ndarray:
        D = _prepare_statistics(check_statistics(X), self.input_form)
        if self.fit_intercept:
            D = np.hstack([D, np.ones((D.shape[0], 1))])
        return D

    def fit(self, X, y):
        if self.method not in METHODS:
            raise ContractViolation(f"method must be one of {METHODS}")
        X = check_statistics(X)
        y = np.asarray(y, dtype=float)
        if y.shape[0] != X.shape[0]:
            raise ContractViolation(f"X has {X.shape[0]} states but y has {y.shape[0]}")
        if not np.any(X):
            raise TrainingError("training statistics are all zero")
        self._single_output = y.ndim == 1
        Y = y[:, None] if self._single_output else y
        D = self._design(X)  # n_states x n_features
        if self.method == "pinv":
            coef = Y.T @ pseudoinverse(D.T, self.rcond)
        else:
            G = D.T @ D
            coef = Y.T @ D @ np.linalg.inv(G + self.ridge_lambda * np.eye(G.shape[0]))
        if self.fit_intercept:
            self.coef_, self.intercept_ = coef[:, :-1], coef[:, -1]
        else:
            self.coef_, self.intercept_ = coef, np.zeros(coef.shape[0])
        self.n_features_in_ = X.shape[1]
        self.singular_values_ = singular_values(D)
        self.effective_rank_ = int(np.count_nonzero(self.singular_values_ > self.rcond * self.singular_values_[0]))
        resid = self._raw_predict(X) - Y
        self.mse_train_ = np.mean(resid**2, axis=0)
        return self

    def _raw_predict(self, X) -> np.ndarray:
        D = _prepare_statistics(check_statistics(X, self.n_features_in_), self.input_form)
        return D @ self.coef_.T + self.intercept_

    def predict(self, X):
        check_is_fitted(self, "coef_")
        out = self._raw_predict(X)
        return out[:, 0] if self._single_output else out


# ---------------------------------------------------------------------------
# column-per-state functional API
# ---------------------------------------------------------------------------

@dataclass
class ReadoutMatrix:
    W: np.ndarray
    trained_on: str
    rcond: float = 1e-12
    ridge_lambda: float | None = None
    observable_names: list = field(default_factory=list)
    intercept: np.ndarray | None = None

    def __post_init__(self):
        self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
        if not np.all(np.isfinite(self.W)):
            raise ContractViolation("readout matrix has non-finite entries")
        if self.trained_on not in INPUT_FORMS:
            raise ContractViolation(f"trained_on must be one of {INPUT_FORMS}")


@dataclass
class TrainReport:
    mse_train: np.ndarray
    singular_spectrum: np.ndarray
    effective_rank: int


def statistics(data, form: str) -> np.ndarray:
    """Column-per-state statistics in the requested form.

    ``data`` is a :class:`CountsMatrix`, a :class:`CountsVector`, or an array
    already holding statistics (returned unchanged except for normalization).
    """
    if isinstance(data, CountsVector):
        data = CountsMatrix(np.asarray(data.counts)[:, None], np.array([data.shots]))
    if isinstance(data, CountsMatrix):
        if form == "frequencies":
            return data.per_shot()
        if form == "raw_counts":
            return data.counts.astype(float)
        if form == "normalized_counts":
            return data.frequencies()
        raise ContractViolation(f"unknown form {form!r}")
    arr = np.asarray(data, dtype=float)
    if form == "normalized_counts":
        return normalize_rows(arr.T).T if arr.ndim == 2 else normalize_rows(arr[None])[0]
    return arr


def train(data, targets, method: str = "pinv", rcond: float = 1e-12, ridge_lambda: float | None = None,
          input_form: str = "normalized_counts", observable_names=None, fit_intercept: bool = False):
    """Fit ``W`` so that ``W @ stats ~ targets``.

    ``data`` is ``n_outcomes x n_states`` (probabilities, or a
    :class:`CountsMatrix`), ``targets`` is ``n_obs x n_states``.
    Returns ``(ReadoutMatrix, TrainReport)``.
    """
    D = statistics(data, input_form)
    M = np.atleast_2d(np.asarray(targets, dtype=float))
    if D.shape[1] != M.shape[1]:
        raise ContractViolation(f"{D.shape[1]} states in data but {M.shape[1]} in targets")
    if D.shape[1] < 1:
        raise ContractViolation("need at least one training state")
    est = QELMRegressor(
        method=method, rcond=rcond,
        ridge_lambda=1e-8 if ridge_lambda is None else ridge_lambda,
        # normalization already applied above
        input_form="frequencies", fit_intercept=fit_intercept,
    ).fit(D.T, M.T)
    readout = ReadoutMatrix(
        est.coef_, input_form, rcond, ridge_lambda if method == "ridge" else None,
        list(observable_names or []), est.intercept_ if fit_intercept else None,
    )
    return readout, TrainReport(est.mse_train_, est.singular_values_, est.effective_rank_)


def predict(w: ReadoutMatrix, stats, form: str | None = None) -> np.ndarray:
    """``W @ stats``; ``stats`` may be a counts object or an array in ``form``.

    Passing an array labelled with a form other than the one the readout was
    trained on is a contract violation.
    """
    if isinstance(stats, (CountsMatrix, CountsVector)):
        form = w.trained_on if form is None else form
    if form is None:
        raise ContractViolation("form must be given for array statistics")
    if form != w.trained_on:
        raise ContractViolation(f"readout trained on {w.trained_on!r}, got {form!r}")
    S = statistics(stats, form)
    out = w.W @ S
    if w.intercept is not None:
        out = out + (w.intercept[:, None] if out.ndim == 2 else w.intercept)
    return out


def mse(preds, truths, axis=-1):
    """Mean squared error over states (last axis by default)."""
    preds = np.asarray(preds, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if preds.shape != truths.shape:
        raise ContractViolation(f"shape mismatch {preds.shape} vs {truths.shape}")
    return np.mean((preds - truths) ** 2, axis=axis)


class WitnessConfusion(NamedTuple):
    confusion: np.ndarray
    accuracy: float
    certified_fraction: float


def witness_confusion(preds, truths, threshold: float = 0.0, mse_train: float | None = None) -> WitnessConfusion:
    """Sign confusion matrix of a witness estimate.

    Rows are the true class, columns the predicted class, both ordered
    ``(negative, non-negative)`` with respect to ``threshold``. ``accuracy`` is
    the overall fraction of matching signs. ``certified_fraction`` is the share
    of truly negative states predicted below ``-3 sqrt(mse_train)``; it is NaN
    when ``mse_train`` is not given or there are no negative states.
    """
    preds = np.ravel(preds)
    truths = np.ravel(truths)
    if preds.shape != truths.shape:
        raise ContractViolation("preds and truths must have equal length")
    t_neg = truths < threshold
    p_neg = preds < threshold
    conf = np.array([
        [np.sum(t_neg & p_neg), np.sum(t_neg & ~p_neg)],
        [np.sum(~t_neg & p_neg), np.sum(~t_neg & ~p_neg)],
    ])
    acc = float(np.trace(conf) / max(1, conf.sum()))
    if mse_train is None or not t_neg.any():
        cert = float("nan")
    else:
        cert = float(np.mean(preds[t_neg] < -3.0 * np.sqrt(mse_train)))
    return WitnessConfusion(conf, acc, cert)


def negative_recall(confusion: np.ndarray) -> float:
    """Fraction of truly negative states that are also predicted negative."""
    n = confusion[0].sum()
    return float(confusion[0, 0] / n) if n else float("nan")


@dataclass
class EvalReport:
    predictions: np.ndarray
    truths: np.ndarray
    mse_test: np.ndarray
    confusion: np.ndarray | None = None
    accuracy: float | None = None
    certified_fraction: float | None = None


def evaluate(w: ReadoutMatrix, stats, truths, witness: str | None = None,
             mse_train: float | None = None, form: str | None = None) -> EvalReport:
    preds = np.atleast_2d(predict(w, stats, form))
    truths = np.atleast_2d(np.asarray(truths, dtype=float))
    rep = EvalReport(preds, truths, mse(preds, truths))
    if witness is not None:
        j = w.observable_names.index(witness)
        wc = witness_confusion(preds[j], truths[j], mse_train=mse_train)
        rep.confusion, rep.accuracy, rep.certified_fraction = wc
    return rep


# -- persistence: '#'-prefixed metadata header, then one CSV row per observable --

def save_readout(w: ReadoutMatrix, path) -> None:
    buf = io.StringIO()
    buf.write(f"# trained_on={w.trained_on}\n# rcond={w.rcond!r}\n# ridge_lambda={w.ridge_lambda!r}\n")
    if w.intercept is not None:
        buf.write("# intercept=" + ",".join(repr(float(x)) for x in w.intercept) + "\n")
    buf.write("observable," + ",".join(f"b{b}" for b in range(w.W.shape[1])) + "\n")
    names = w.observable_names or [f"obs{j}" for j in range(w.W.shape[0])]
    for name, row in zip(names, w.W):
        buf.write(name + "," + ",".join(repr(float(x)) for x in row) + "\n")
    Path(path).write_text(buf.getvalue())


def load_readout(path) -> ReadoutMatrix:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    meta = {}
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key] = val
        elif line.strip():
            body.append(line.split(","))
    try:
        names = [r[0] for r in body[1:]]
        W = np.array([[float(x) for x in r[1:]] for r in body[1:]])
        lam = None if meta.get("ridge_lambda", "None") == "None" else float(meta["ridge_lambda"])
        intercept = np.array([float(x) for x in meta["intercept"].split(",")]) if "intercept" in meta else None
        return ReadoutMatrix(W, meta["trained_on"], float(meta.get("rcond", 1e-12)), lam, names, intercept)
    except (KeyError, ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed readout file: {exc}") from exc
