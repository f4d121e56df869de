"""Min-max normalization fitted on training data only."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ShapeError


class MinMaxScaler(TransformerMixin, BaseEstimator):
    """Map each column to ``(x - min) / (max - min)`` using the fit data.

    Constant columns map to 0.  Transformed values outside the fit range are
    not clipped.
    """

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ShapeError("fit matrix must be 2-D and non-empty")
        self.data_min_ = X.min(axis=0)
        self.data_max_ = X.max(axis=0)
        self.data_range_ = self.data_max_ - self.data_min_
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "data_min_")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ShapeError(f"expected {self.n_features_in_} columns, got shape {X.shape}")
        safe = np.where(self.data_range_ > 0, self.data_range_, 1.0)
        out = (X - self.data_min_) / safe
        out[:, self.data_range_ == 0] = 0.0
        return out


def minmax_fit(train) -> MinMaxScaler:
    return MinMaxScaler().fit(train)


def minmax_apply(scaler: MinMaxScaler, matrix) -> np.ndarray:
    return scaler.transform(matrix)
