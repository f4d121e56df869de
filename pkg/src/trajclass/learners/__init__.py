"""Decision tree, random forest and SVM classifiers written from scratch.

The estimator classes follow the scikit-learn API.  ``DTParams``,
``RFParams`` and ``SVMParams`` hold the tunable hyperparameters and reject
values outside the search ranges; ``dt_train``/``rf_train``/``svm_train``
build fitted estimators from them.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..exceptions import ParameterError
from .serialization import model_from_json, model_to_json
from .svm import SVC, KERNELS, kernel_matrix
from .tree import DecisionTreeClassifier, RandomForestClassifier, entropy, gini

CRITERIA = ("gini", "entropy")


def _check_int(name, value, lo, hi):
    if int(value) != value or not lo <= value <= hi:
        raise ParameterError(f"{name} must be an integer in [{lo}, {hi}], got {value!r}")


@dataclass(frozen=True)
class DTParams:
    max_depth: int = 10
    min_samples_leaf: int = 1
    min_samples_split: int = 2
    criterion: str = "gini"

    def __post_init__(self):
        _check_int("max_depth", self.max_depth, 5, 50)
        _check_int("min_samples_leaf", self.min_samples_leaf, 1, 10)
        _check_int("min_samples_split", self.min_samples_split, 2, 10)
        if self.criterion not in CRITERIA:
            raise ParameterError(f"criterion must be one of {CRITERIA}")


@dataclass(frozen=True)
class RFParams(DTParams):
    n_estimators: int = 50

    def __post_init__(self):
        super().__post_init__()
        _check_int("n_estimators", self.n_estimators, 5, 100)


@dataclass(frozen=True)
class SVMParams:
    C: float = 1.0
    kernel: str = "rbf"

    def __post_init__(self):
        if not 0.1 <= self.C <= 100:
            raise ParameterError(f"C must be in [0.1, 100], got {self.C}")
        if self.kernel not in KERNELS:
            raise ParameterError(f"kernel must be one of {KERNELS}")


def dt_train(X, y, params: DTParams, seed=0) -> DecisionTreeClassifier:
    return DecisionTreeClassifier(**asdict(params), random_state=seed).fit(X, y)


def rf_train(X, y, params: RFParams, seed=0) -> RandomForestClassifier:
    return RandomForestClassifier(**asdict(params), random_state=seed).fit(X, y)


def svm_train(X, y, params: SVMParams, seed=0) -> SVC:
    return SVC(C=params.C, kernel=params.kernel, random_state=seed).fit(X, y)


def predict(model, X) -> np.ndarray:
    return model.predict(X)


def make_classifier(kind: str, params: dict, seed=0):
    """Unfitted estimator for ``kind`` in {"DT", "RF", "SVM"} from a flat parameter dict."""
    kind = kind.upper()
    if kind == "DT":
        return DecisionTreeClassifier(**asdict(DTParams(**params)), random_state=seed)
    if kind == "RF":
        return RandomForestClassifier(**asdict(RFParams(**params)), random_state=seed)
    if kind == "SVM":
        p = SVMParams(**params)
        return SVC(C=p.C, kernel=p.kernel, random_state=seed)
    raise ParameterError(f"unknown classifier {kind!r}")


__all__ = [
    "CRITERIA", "DTParams", "RFParams", "SVMParams", "DecisionTreeClassifier", "RandomForestClassifier",
    "SVC", "KERNELS", "kernel_matrix", "gini", "entropy", "dt_train", "rf_train", "svm_train", "predict",
    "make_classifier", "model_to_json", "model_from_json",
]
