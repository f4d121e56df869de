import numpy as np
from sklearn.utils.validation import check_array

from ..exceptions import ShapeError, TrainingError


def check_training_data(X, y):
    """Validate a training set; returns (X, encoded y, sorted class labels)."""
    X = check_array(X, dtype=float, ensure_min_samples=0, ensure_min_features=1)
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != len(X):
        raise ShapeError(f"y must be 1-D with {len(X)} entries, got shape {y.shape}")
    if len(X) == 0:
        raise TrainingError("cannot train on an empty set")
    classes, y_idx = np.unique(y, return_inverse=True)
    return np.ascontiguousarray(X), y_idx.astype(np.int64), classes


def check_predict_input(X, n_features):
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return np.empty((0, n_features))
    X = check_array(X, dtype=float)
    if X.shape[1] != n_features:
        raise ShapeError(f"model expects {n_features} features, got {X.shape[1]}")
    return np.ascontiguousarray(X)
