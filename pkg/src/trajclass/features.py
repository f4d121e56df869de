"""Segmentation and feature extraction.

A trajectory is cut into ``M`` contiguous segments.  Each segment yields
three point-feature streams (velocity, change of velocity, change of angle)
which are summarized by 10 statistics each, giving a 30-value instance.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import FeatureError, InsufficientPointsError, SegmentationError, ShapeError
from .savgol import NoisePlacement, SavGolParams, apply_placement
from .trajectory import EARTH_RADIUS_M, CoordinateSystem, Trajectory

STREAMS = ("v", "dv", "da")
STATISTICS = ("min", "max", "mean", "median", "std", "p10", "p25", "p50", "p75", "p90")
FEATURE_NAMES = tuple(f"{s}_{stat}" for s in STREAMS for stat in STATISTICS)
N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True, eq=False)
class Segment:
    """Contiguous slice of a trajectory; ``index`` is 1-based."""

    c1: np.ndarray
    c2: np.ndarray
    t: np.ndarray
    system: CoordinateSystem
    parent_id: str
    index: int

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True, eq=False)
class FeatureStreams:
    v: np.ndarray
    dv: np.ndarray
    da: np.ndarray

    def __len__(self):
        return len(self.v)


@dataclass(frozen=True, eq=False)
class FeatureInstance:
    values: np.ndarray
    label: object
    parent_id: str


def segment_sizes(R: int, M: int) -> list[int]:
    base, extra = divmod(R, M)
    return [base + 1] * extra + [base] * (M - extra)


def segment(traj: Trajectory, M: int) -> list[Segment]:
    """Split ``traj`` into ``M`` ordered, non-overlapping segments.

    The first ``R mod M`` segments hold one point more than the rest.
    """
    M = int(M)
    R = len(traj)
    if M < 1:
        raise SegmentationError(f"M must be >= 1, got {M}")
    if M > R:
        raise SegmentationError(f"cannot cut {R} points into {M} segments")
    bounds = np.concatenate([[0], np.cumsum(segment_sizes(R, M))])
    return [Segment(traj.c1[a:b], traj.c2[a:b], traj.t[a:b], traj.system, traj.id, m + 1)
            for m, (a, b) in enumerate(zip(bounds[:-1], bounds[1:]))]


def haversine(lat1, lon1, lat2, lon2, radius=EARTH_RADIUS_M):
    """Great-circle distance in meters between points given in degrees."""
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlam = np.radians(np.asarray(lon2) - np.asarray(lon1))
    h = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2) ** 2
    return 2 * radius * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def _step_distance_and_angle(c1, c2, system, signed_angle):
    if system is CoordinateSystem.GEODETIC:
        lat, lon = c1, c2
        dist = haversine(lat[:-1], lon[:-1], lat[1:], lon[1:])
        # legs measured along the axes through (lat, 0) and (0, lon)
        lat_leg = haversine(lat[:-1], 0.0, lat[1:], 0.0)
        lon_leg = haversine(0.0, lon[:-1], 0.0, lon[1:])
        if signed_angle:
            lat_leg = lat_leg * np.sign(np.diff(lat))
            lon_leg = lon_leg * np.sign(np.diff(lon))
        return dist, np.arctan2(lat_leg, lon_leg)
    dx, dy = np.diff(c1), np.diff(c2)
    return np.hypot(dx, dy), np.arctan2(dy, dx)


def point_features(seg, signed_angle: bool = False) -> FeatureStreams:
    """Velocity, change of velocity and change of angle for every record.

    The value computed from records ``(r, r+1)`` is stored at ``r+1``; the
    first record of every stream is 0.  Geodetic angles use unsigned axis
    legs and therefore lie in [0, pi/2] unless ``signed_angle`` is set.
    """
    n = len(seg.t)
    if n < 2:
        raise InsufficientPointsError(f"need at least 2 records, got {n}")
    dt = np.diff(seg.t)
    if np.any(dt <= 0):
        raise FeatureError("timestamps must be strictly increasing (zero time step)")
    dist, angle = _step_distance_and_angle(np.asarray(seg.c1), np.asarray(seg.c2), seg.system, signed_angle)
    v = np.concatenate([[0.0], dist / dt])
    a = np.concatenate([[0.0], angle])
    dv = np.concatenate([[0.0], np.diff(v)])
    da = np.concatenate([[0.0], np.diff(a)])
    return FeatureStreams(v, dv, da)


def _summary(block: np.ndarray) -> np.ndarray:
    """The 10 statistics along the last axis of ``block``, stacked last."""
    pct = np.moveaxis(np.percentile(block, [10, 25, 50, 75, 90], axis=-1), 0, -1)
    head = [block.min(-1), block.max(-1), block.mean(-1), np.median(block, axis=-1), block.std(-1)]
    return np.concatenate([np.stack(head, axis=-1), pct], axis=-1)


def _stream_block(streams: FeatureStreams) -> np.ndarray:
    block = np.vstack([np.asarray(getattr(streams, name), dtype=float) for name in STREAMS])
    if block.shape[1] == 0:
        raise FeatureError("feature streams are empty")
    if not np.all(np.isfinite(block)):
        bad = [n for n, row in zip(STREAMS, block) if not np.all(np.isfinite(row))]
        raise FeatureError(f"stream {bad[0]} contains non-finite values")
    return block


def summarize_streams(streams_list: Sequence[FeatureStreams]) -> np.ndarray:
    """Instance vectors of many segments at once, shape (len(streams_list), 30).

    Segments of equal length are summarized in one vectorized call.
    """
    blocks = [_stream_block(s) for s in streams_list]
    out = np.empty((len(blocks), N_FEATURES))
    by_length: dict[int, list[int]] = {}
    for i, block in enumerate(blocks):
        by_length.setdefault(block.shape[1], []).append(i)
    for rows in by_length.values():
        stats = _summary(np.stack([blocks[i] for i in rows]))
        out[rows] = stats.reshape(len(rows), N_FEATURES)
    return out


def instance_vector(streams: FeatureStreams, label=None, parent_id="") -> FeatureInstance:
    """Summarize the three streams into the 30 values named by ``FEATURE_NAMES``."""
    return FeatureInstance(summarize_streams([streams])[0], label, parent_id)


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """Instance matrix with per-row labels and parent trajectory ids."""

    X: np.ndarray
    y: np.ndarray
    groups: np.ndarray

    def __len__(self):
        return len(self.y)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([*FEATURE_NAMES, "label", "parent_id"])
        for row, label, gid in zip(self.X.tolist(), self.y.tolist(), self.groups.tolist()):
            writer.writerow([*map(repr, row), label, gid])
        return buf.getvalue()


def featurize(trajectories: Sequence[Trajectory], split: int = 1, placement=NoisePlacement.NONE,
              savgol: SavGolParams | None = None, signed_angle: bool = False) -> FeatureSet:
    """Turn trajectories into segment instances (one row per segment)."""
    placement = NoisePlacement(placement)
    rows, labels, groups = [], [], []
    for traj in trajectories:
        if placement is NoisePlacement.ON_RAW_LOCATION:
            traj = apply_placement(traj, placement, savgol)
        label = traj.label.value if traj.label is not None else ""
        streams = []
        for seg in segment(traj, split):
            st = point_features(seg, signed_angle=signed_angle)
            if placement is NoisePlacement.ON_FEATURES:
                st = apply_placement(st, placement, savgol)
            streams.append(st)
        rows.append(summarize_streams(streams))
        labels.extend([label] * len(streams))
        groups.extend([traj.id] * len(streams))
    X = np.vstack(rows) if rows else np.empty((0, N_FEATURES))
    return FeatureSet(X, np.asarray(labels, dtype=object), np.asarray(groups, dtype=object))


class TrajectoryFeaturizer(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping a list of trajectories to the instance matrix."""

    def __init__(self, split=1, placement="none", window_length=1, polyorder=1, signed_angle=False):
        self.split = split
        self.placement = placement
        self.window_length = window_length
        self.polyorder = polyorder
        self.signed_angle = signed_angle

    def _savgol(self):
        if NoisePlacement(self.placement) is NoisePlacement.NONE:
            return None
        return SavGolParams.repaired(self.window_length, self.polyorder)

    def fit(self, trajectories, y=None):
        self._savgol()
        self.n_features_out_ = N_FEATURES
        return self

    def featurize(self, trajectories) -> FeatureSet:
        return featurize(trajectories, self.split, self.placement, self._savgol(), self.signed_angle)

    def transform(self, trajectories):
        return self.featurize(trajectories).X

    def get_feature_names_out(self, input_features=None):
        return np.asarray(FEATURE_NAMES, dtype=object)
