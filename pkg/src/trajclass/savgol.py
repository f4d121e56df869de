"""Savitzky-Golay smoothing and the three noise-removal placements.

The filter replaces every sample by the value of a least-squares polynomial
fitted over a window of neighbouring samples.  Samples closer than half a
window to either end use the nearest full window, evaluated off-center, so
no padding is ever invented.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import FilterError, ParameterError, UsageError

WINDOW_CHOICES = tuple(range(1, 30, 2))
POLYORDER_RANGE = (1, 10)


class NoisePlacement(str, Enum):
    NONE = "none"
    ON_RAW_LOCATION = "raw"
    ON_FEATURES = "features"


def repair_polyorder(window_length: int, polyorder: int) -> int:
    """Clamp ``polyorder`` below ``window_length`` (window 3, order 7 -> order 2)."""
    return min(int(polyorder), int(window_length) - 1)


@dataclass(frozen=True)
class SavGolParams:
    window_length: int = 1
    polyorder: int = 1

    def __post_init__(self):
        if self.window_length not in WINDOW_CHOICES:
            raise ParameterError(f"window_length must be odd in [1, 29], got {self.window_length}")
        if not 0 <= self.polyorder <= POLYORDER_RANGE[1]:
            raise ParameterError(f"polyorder must be in [0, 10], got {self.polyorder}")

    @classmethod
    def repaired(cls, window_length, polyorder) -> "SavGolParams":
        return cls(int(window_length), repair_polyorder(window_length, polyorder))

    @property
    def effective_polyorder(self) -> int:
        return repair_polyorder(self.window_length, self.polyorder)


@lru_cache(maxsize=4096)
def _weights(window_length: int, polyorder: int, eval_offset: int) -> np.ndarray:
    half = (window_length - 1) // 2
    # positions scaled to [-1, 1] keep the Vandermonde system well conditioned
    scale = max(half, 1)
    pos = np.arange(-half, half + 1) / scale
    A = np.vander(pos, polyorder + 1, increasing=True)
    target = (eval_offset / scale) ** np.arange(polyorder + 1)
    # minimum-norm solution of A.T w = target gives the least-squares evaluation weights
    w = np.linalg.lstsq(A.T, target, rcond=None)[0]
    w.setflags(write=False)
    return w


def savgol_weights(window_length: int, polyorder: int, eval_offset: int = 0) -> np.ndarray:
    """Correlation weights evaluating the fitted polynomial at ``eval_offset``.

    ``eval_offset`` is measured from the window center, so ``w @ x[i-h:i+h+1]``
    smooths sample ``i`` when the offset is 0.
    """
    window_length, polyorder, eval_offset = int(window_length), int(polyorder), int(eval_offset)
    if window_length < 1 or window_length % 2 == 0:
        raise ParameterError(f"window_length must be a positive odd integer, got {window_length}")
    if polyorder < 0 or polyorder >= window_length:
        raise ParameterError(f"polyorder {polyorder} must be in [0, window_length)")
    if abs(eval_offset) > (window_length - 1) // 2:
        raise ParameterError(f"eval_offset {eval_offset} outside the window")
    return _weights(window_length, polyorder, eval_offset)


def savgol_filter(series, window_length: int, polyorder: int) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or len(x) == 0:
        raise FilterError("series must be a non-empty 1-D array")
    if not np.all(np.isfinite(x)):
        raise FilterError("series contains non-finite values")
    n = len(x)
    window = int(window_length)
    if window > n:
        window = n if n % 2 else n - 1
    order = repair_polyorder(window, polyorder)
    if window == 1:
        return x.copy()
    half = window // 2
    out = np.empty(n)
    out[half:n - half] = np.correlate(x, savgol_weights(window, order, 0), mode="valid")
    head, tail = x[:window], x[n - window:]
    for k in range(half):
        out[k] = savgol_weights(window, order, k - half) @ head
        out[n - half + k] = savgol_weights(window, order, k + 1) @ tail
    return out


def apply_placement(obj, placement, params: SavGolParams | None):
    """Smooth a trajectory or a set of feature streams according to ``placement``.

    ``none`` returns ``obj`` untouched.  ``raw`` expects a
    :class:`~trajclass.trajectory.Trajectory` and smooths both coordinate
    series; ``features`` expects :class:`~trajclass.features.FeatureStreams`
    and smooths each stream independently.
    """
    from .features import FeatureStreams
    from .trajectory import Trajectory

    placement = NoisePlacement(placement)
    if placement is NoisePlacement.NONE:
        return obj
    if params is None:
        raise UsageError(f"placement {placement.value!r} needs Savitzky-Golay parameters")
    w, p = params.window_length, params.polyorder
    if placement is NoisePlacement.ON_RAW_LOCATION:
        if not isinstance(obj, Trajectory):
            raise UsageError("raw-location smoothing expects a Trajectory")
        return obj.with_coords(savgol_filter(obj.c1, w, p), savgol_filter(obj.c2, w, p))
    if not isinstance(obj, FeatureStreams):
        raise UsageError("feature smoothing expects FeatureStreams")
    return FeatureStreams(savgol_filter(obj.v, w, p), savgol_filter(obj.dv, w, p),
                          savgol_filter(obj.da, w, p))


class SavGolSmoother(TransformerMixin, BaseEstimator):
    """Row-wise Savitzky-Golay smoothing of a 2-D array (each row one series)."""

    def __init__(self, window_length=5, polyorder=2):
        self.window_length = window_length
        self.polyorder = polyorder

    def fit(self, X, y=None):
        SavGolParams.repaired(self.window_length, self.polyorder)
        return self

    def transform(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.vstack([savgol_filter(row, self.window_length, self.polyorder) for row in X])
