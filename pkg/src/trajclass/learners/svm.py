"""Soft-margin kernel SVM trained by SMO, one-vs-one for multiclass problems."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ConvergenceError, TrainingError
from . import _kernels
from ._validation import check_predict_input, check_training_data

KERNELS = ("linear", "poly", "rbf", "sigmoid")


def kernel_matrix(A, B, kernel, gamma=1.0, degree=3, coef0=0.0) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if kernel == "linear":
        return A @ B.T
    if kernel == "poly":
        return (gamma * (A @ B.T) + coef0) ** degree
    if kernel == "rbf":
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
        return np.exp(-gamma * np.maximum(sq, 0.0))
    if kernel == "sigmoid":
        return np.tanh(gamma * (A @ B.T) + coef0)
    raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")


def scale_gamma(X) -> float:
    """1 / (n_features * var(X)), or 1 when X has no variance."""
    X = np.asarray(X, dtype=float)
    var = X.var()
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


@dataclass(eq=False)
class BinaryMachine:
    """One pairwise SVM: ``positive`` vs ``negative`` class index.

    ``alpha`` and ``y`` cover the machine's whole training subset; ``support``
    indexes rows of the owning model's ``support_vectors_``.
    """

    positive: int
    negative: int
    alpha: np.ndarray
    y: np.ndarray
    rho: float
    n_iter: int
    support: np.ndarray = field(default=None)
    dual_coef: np.ndarray = field(default=None)
    objective_trace: np.ndarray = field(default=None)

    def dual_objective(self, K) -> float:
        ay = self.alpha * self.y
        return float(self.alpha.sum() - 0.5 * ay @ K @ ay)


class SVC(ClassifierMixin, BaseEstimator):
    """Kernel support vector classifier.

    Parameters
    ----------
    C : float
        Box constraint of the dual variables.
    kernel : {"linear", "poly", "rbf", "sigmoid"}
    gamma : float or "scale"
        Kernel coefficient; ``"scale"`` means ``1 / (n_features * X.var())``.
    degree, coef0 :
        Polynomial degree and independent term of the poly/sigmoid kernels.
    tol : float
        KKT violation tolerance of the SMO stopping rule.
    max_iter : int or None
        SMO iteration cap per binary machine; ``None`` means
        ``max(100000, 100 * n_samples)``.  Exceeding it raises
        :class:`~trajclass.exceptions.ConvergenceError`.
    record_objective : bool
        Keep the dual objective after every SMO step (diagnostics only).
    """

    def __init__(self, C=1.0, kernel="rbf", gamma="scale", degree=3, coef0=0.0, tol=1e-3, max_iter=None,
                 record_objective=False, random_state=None):
        self.C = C
        self.kernel = kernel
        self.gamma = gamma
        self.degree = degree
        self.coef0 = coef0
        self.tol = tol
        self.max_iter = max_iter
        self.record_objective = record_objective
        self.random_state = random_state

    def _kernel(self, A, B):
        return kernel_matrix(A, B, self.kernel, self.gamma_, self.degree, self.coef0)

    def fit(self, X, y):
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}; expected one of {KERNELS}")
        if not self.C > 0:
            raise ValueError("C must be positive")
        X, y_idx, self.classes_ = check_training_data(X, y)
        if len(self.classes_) < 2:
            raise TrainingError("SVM training needs at least two classes")
        self.n_features_in_ = X.shape[1]
        self.gamma_ = scale_gamma(X) if self.gamma == "scale" else float(self.gamma)
        K_full = self._kernel(X, X)
        machines = []
        used = np.zeros(len(X), dtype=bool)
        for a, b in combinations(range(len(self.classes_)), 2):
            rows = np.flatnonzero((y_idx == a) | (y_idx == b))
            signs = np.where(y_idx[rows] == a, 1.0, -1.0)
            K = np.ascontiguousarray(K_full[np.ix_(rows, rows)])
            max_iter = self.max_iter or max(100_000, 100 * len(rows))
            alpha, rho, n_iter, converged, trace = _kernels.smo_solve(
                K, signs, float(self.C), float(self.tol), int(max_iter), bool(self.record_objective))
            if not converged:
                raise ConvergenceError(f"SMO did not converge for classes {self.classes_[a]!r}/{self.classes_[b]!r}",
                                       int(n_iter))
            machine = BinaryMachine(a, b, alpha, signs, float(rho), int(n_iter),
                                    objective_trace=trace if self.record_objective else None)
            machine.support = rows[alpha > 0]
            machine.dual_coef = (alpha * signs)[alpha > 0]
            used[machine.support] = True
            machines.append(machine)
        # re-index supports into the compact support-vector matrix
        position = np.cumsum(used) - 1
        for m in machines:
            m.support = position[m.support]
        self.support_vectors_ = X[used]
        self.machines_ = machines
        return self

    def decision_function(self, X) -> np.ndarray:
        """Pairwise decision values, shape (n_samples, n_machines)."""
        check_is_fitted(self, "machines_")
        X = check_predict_input(X, self.n_features_in_)
        K = self._kernel(X, self.support_vectors_)
        return np.column_stack([K[:, m.support] @ m.dual_coef - m.rho for m in self.machines_]) \
            if len(X) else np.empty((0, len(self.machines_)))

    def predict(self, X):
        scores = self.decision_function(X)
        if len(scores) == 0:
            return self.classes_[:0]
        votes = np.zeros((len(scores), len(self.classes_)), dtype=np.int64)
        for col, m in enumerate(self.machines_):
            wins = scores[:, col] > 0
            votes[wins, m.positive] += 1
            votes[~wins, m.negative] += 1
        return self.classes_[np.argmax(votes, axis=1)]
