"""Trajectory data types, CSV/manifest IO and a synthetic pattern generator.

Two coordinate systems are supported: geodetic points carry latitude and
longitude in degrees, planar points carry x and y in meters.  Timestamps are
seconds.

The generator walks one of four ideal paths (Straight, Circling, SShape,
UShape) at constant speed, samples it at a fixed rate and perturbs each
sample with isotropic Gaussian noise.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path as FsPath
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import GeometryError, OrderingError, ParseError, SizeError

EARTH_RADIUS_M = 6_371_000.0
DEFAULT_REFERENCE = (52.0, 4.0)
MANIFEST_VERSION = 1


class CoordinateSystem(str, Enum):
    GEODETIC = "geodetic"
    PLANAR = "planar"

    @property
    def columns(self) -> tuple[str, str, str]:
        if self is CoordinateSystem.GEODETIC:
            return ("lat", "lon", "t")
        return ("x", "y", "t")


class Pattern(str, Enum):
    STRAIGHT = "Straight"
    CIRCLING = "Circling"
    SSHAPE = "SShape"
    USHAPE = "UShape"


PATTERNS = tuple(Pattern)
DEFAULT_COUNTS = {Pattern.STRAIGHT: 19, Pattern.CIRCLING: 25, Pattern.SSHAPE: 30, Pattern.USHAPE: 30}


@dataclass(frozen=True)
class TrajPoint:
    c1: float
    c2: float
    t: float


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


class Trajectory:
    """Immutable, time-ordered sequence of 2-D positions.

    Coordinates are stored column-wise in read-only float arrays ``c1``,
    ``c2`` and ``t``.
    """

    __slots__ = ("c1", "c2", "t", "system", "label", "id")

    def __init__(self, c1, c2, t, system=CoordinateSystem.PLANAR, label=None, id=""):
        c1, c2, t = _readonly(c1), _readonly(c2), _readonly(t)
        if not (c1.ndim == c2.ndim == t.ndim == 1) or not (len(c1) == len(c2) == len(t)):
            raise SizeError("c1, c2 and t must be 1-D arrays of equal length")
        if len(t) < 2:
            raise SizeError(f"a trajectory needs at least 2 points, got {len(t)}")
        if not np.all(np.isfinite(t)):
            raise OrderingError("timestamps must be finite")
        if np.any(np.diff(t) <= 0):
            raise OrderingError("timestamps must be strictly increasing")
        system = CoordinateSystem(system)
        if system is CoordinateSystem.GEODETIC:
            if np.any(np.abs(c1) > 90) or np.any(np.abs(c2) > 180):
                raise GeometryError("geodetic coordinates out of range")
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "c2", c2)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "system", system)
        object.__setattr__(self, "label", None if label is None else Pattern(label))
        object.__setattr__(self, "id", str(id))

    def __setattr__(self, name, value):
        raise AttributeError("Trajectory is immutable")

    def __reduce__(self):  # pickling (worker processes) goes through __init__ again
        return (Trajectory, (self.c1, self.c2, self.t, self.system, self.label, self.id))

    @classmethod
    def from_points(cls, points: Sequence[TrajPoint], system, label=None, id=""):
        return cls([p.c1 for p in points], [p.c2 for p in points], [p.t for p in points],
                   system=system, label=label, id=id)

    @property
    def points(self) -> list[TrajPoint]:
        return [TrajPoint(float(a), float(b), float(c)) for a, b, c in zip(self.c1, self.c2, self.t)]

    def with_coords(self, c1, c2) -> "Trajectory":
        return Trajectory(c1, c2, self.t, self.system, self.label, self.id)

    def __len__(self):
        return len(self.t)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.system == other.system and self.label == other.label and self.id == other.id
                and np.array_equal(self.c1, other.c1) and np.array_equal(self.c2, other.c2)
                and np.array_equal(self.t, other.t))

    __hash__ = None

    def __repr__(self):
        label = self.label.value if self.label else None
        return f"Trajectory(id={self.id!r}, label={label!r}, system={self.system.value}, R={len(self)})"


# --------------------------------------------------------------------------- CSV


def parse_trajectory_csv(data, system, label=None, id="") -> Trajectory:
    """Parse a UTF-8 CSV document into a :class:`Trajectory`.

    The header must name the columns of ``system`` (``lat,lon,t`` or
    ``x,y,t``) in any order; extra columns are ignored.  Rows are kept in
    file order.
    """
    system = CoordinateSystem(system)
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not valid UTF-8: {exc}") from None
    reader = csv.reader(io.StringIO(data))
    try:
        header = next(reader)
    except StopIteration:
        raise SizeError("empty CSV document") from None
    header = [h.strip() for h in header]
    try:
        cols = [header.index(name) for name in system.columns]
    except ValueError:
        raise ParseError(f"header must contain columns {','.join(system.columns)}, got {','.join(header)}",
                         line=1) from None
    rows = []
    for row in reader:
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            rows.append([float(row[j]) for j in cols])
        except (ValueError, IndexError):
            raise ParseError(f"malformed row {row!r}", line=reader.line_num) from None
    if len(rows) < 2:
        raise SizeError(f"a trajectory needs at least 2 rows, got {len(rows)}")
    arr = np.asarray(rows)
    bad = np.nonzero(np.diff(arr[:, 2]) <= 0)[0]
    if len(bad):
        raise OrderingError(f"timestamps not strictly increasing at line {bad[0] + 3}")
    return Trajectory(arr[:, 0], arr[:, 1], arr[:, 2], system=system, label=label, id=id)


def trajectory_to_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(traj.system.columns)
    for a, b, c in zip(traj.c1.tolist(), traj.c2.tolist(), traj.t.tolist()):
        writer.writerow((repr(a), repr(b), repr(c)))
    return buf.getvalue()


def write_dataset(trajectories: Iterable[Trajectory], directory) -> FsPath:
    """Write one CSV per trajectory plus ``manifest.json``; returns the manifest path."""
    directory = FsPath(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for traj in trajectories:
        name = f"{traj.id}.csv"
        with open(directory / name, "w", encoding="utf-8", newline="") as fh:
            fh.write(trajectory_to_csv(traj))
        entries.append({"id": traj.id, "label": traj.label.value if traj.label else None,
                        "system": traj.system.value, "path": name})
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps({"version": MANIFEST_VERSION, "trajectories": entries}, indent=2) + "\n",
                        encoding="utf-8")
    return manifest


def read_manifest(path) -> list[Trajectory]:
    path = FsPath(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", line=exc.lineno, location=f"{exc.lineno}:{exc.colno}") from None
    entries = doc.get("trajectories") if isinstance(doc, dict) else doc
    if not isinstance(entries, list):
        raise ParseError(f"{path}: manifest must list trajectories")
    out = []
    for i, entry in enumerate(entries):
        try:
            csv_path = path.parent / entry["path"]
            system, label, tid = entry["system"], entry.get("label"), entry["id"]
        except (KeyError, TypeError):
            raise ParseError(f"{path}: entry {i} needs id, system and path") from None
        out.append(parse_trajectory_csv(csv_path.read_bytes(), system, label=label, id=tid))
    return out


# ---------------------------------------------------------------- noise models


@dataclass(frozen=True)
class NoiseModel:
    position_sigma: float = 0.0
    sample_rate: float = 1.0
    dropout_prob: float = 0.0

    def __post_init__(self):
        if not self.position_sigma >= 0:
            raise ValueError("position_sigma must be >= 0")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be > 0")
        if not 0 <= self.dropout_prob < 1:
            raise ValueError("dropout_prob must be in [0, 1)")


GNSS_LIKE = NoiseModel(position_sigma=2.5, sample_rate=1.0)
UWB_LIKE = NoiseModel(position_sigma=0.125, sample_rate=5.91)
TECH_PRESETS = {
    "gnss-like": (GNSS_LIKE, CoordinateSystem.GEODETIC),
    "uwb-like": (UWB_LIKE, CoordinateSystem.PLANAR),
}


# ------------------------------------------------------------------- geometry


@dataclass(frozen=True)
class _Line:
    start: tuple[float, float]
    end: tuple[float, float]

    @property
    def length(self):
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])

    def at(self, s):
        u = s / self.length
        return (self.start[0] + u * (self.end[0] - self.start[0]),
                self.start[1] + u * (self.end[1] - self.start[1]))

    def distance(self, x, y):
        ax, ay = self.start
        dx, dy = self.end[0] - ax, self.end[1] - ay
        u = np.clip(((x - ax) * dx + (y - ay) * dy) / (dx * dx + dy * dy), 0.0, 1.0)
        return np.hypot(x - (ax + u * dx), y - (ay + u * dy))


@dataclass(frozen=True)
class _Arc:
    center: tuple[float, float]
    radius: float
    theta0: float
    sweep: float  # signed, radians

    @property
    def length(self):
        return abs(self.sweep) * self.radius

    def at(self, s):
        theta = self.theta0 + math.copysign(1.0, self.sweep) * s / self.radius
        return (self.center[0] + self.radius * np.cos(theta), self.center[1] + self.radius * np.sin(theta))

    def distance(self, x, y):
        cx, cy = self.center
        rel = np.arctan2(y - cy, x - cx) - self.theta0
        # angular position measured along the sweep direction, in [0, 2pi)
        along = np.mod(rel * math.copysign(1.0, self.sweep), 2 * math.pi)
        on_arc = np.abs(np.hypot(x - cx, y - cy) - self.radius)
        if abs(self.sweep) >= 2 * math.pi - 1e-12:
            return on_arc
        p0 = self.at(0.0)
        p1 = self.at(self.length)
        ends = np.minimum(np.hypot(x - p0[0], y - p0[1]), np.hypot(x - p1[0], y - p1[1]))
        return np.where(along <= abs(self.sweep), on_arc, ends)


class PatternPath:
    """Ideal path of a movement pattern, parameterized by arc length.

    ``closed`` paths (the circle) are traversed in loops; open paths are
    walked back and forth.
    """

    def __init__(self, pieces, closed=False):
        self.pieces = tuple(pieces)
        self.closed = closed
        self._cum = np.concatenate([[0.0], np.cumsum([p.length for p in self.pieces])])

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    def footprint(self) -> tuple[float, float]:
        s = np.linspace(0.0, self.length, 4001)
        x, y = self.position(s)
        return float(x.max() - x.min()), float(y.max() - y.min())

    def position(self, s):
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        idx = np.clip(np.searchsorted(self._cum, s, side="right") - 1, 0, len(self.pieces) - 1)
        x = np.empty_like(s)
        y = np.empty_like(s)
        for k, piece in enumerate(self.pieces):
            mask = idx == k
            if np.any(mask):
                x[mask], y[mask] = piece.at(s[mask] - self._cum[k])
        return x, y

    def walk(self, distance):
        """Position after walking ``distance`` meters from the path start."""
        distance = np.asarray(distance, dtype=float)
        if self.closed:
            return self.position(np.mod(distance, self.length))
        u = np.mod(distance, 2 * self.length)
        return self.position(np.where(u <= self.length, u, 2 * self.length - u))

    def distance(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.min([p.distance(x, y) for p in self.pieces], axis=0)


def pattern_path(kind, *, line_length=8.0, circle_radius=4.0, straight_length=5.0,
                 u_radius=2.0, s_radius=1.5) -> PatternPath:
    """Ideal path of ``kind``, centered on the origin.

    Defaults keep every footprint inside a 10 m x 10 m arena.
    """
    kind = Pattern(kind)
    pi = math.pi
    if kind is Pattern.STRAIGHT:
        half = line_length / 2
        return PatternPath([_Line((-half, 0.0), (half, 0.0))])
    if kind is Pattern.CIRCLING:
        return PatternPath([_Arc((0.0, 0.0), circle_radius, -pi / 2, 2 * pi)], closed=True)
    L = straight_length
    if kind is Pattern.USHAPE:
        r = u_radius
        # footprint x in [0, L + r], y in [0, 2r]
        ox, oy = -(L + r) / 2, -r
        return PatternPath([
            _Line((ox, oy), (ox + L, oy)),
            _Arc((ox + L, oy + r), r, -pi / 2, pi),
            _Line((ox + L, oy + 2 * r), (ox, oy + 2 * r)),
        ])
    r = s_radius
    # footprint x in [-r, L + r], y in [0, 4r]
    ox, oy = -L / 2, -2 * r
    return PatternPath([
        _Line((ox, oy), (ox + L, oy)),
        _Arc((ox + L, oy + r), r, -pi / 2, pi),
        _Line((ox + L, oy + 2 * r), (ox, oy + 2 * r)),
        _Arc((ox, oy + 3 * r), r, -pi / 2, -pi),
        _Line((ox, oy + 4 * r), (ox + L, oy + 4 * r)),
    ])


def meters_per_degree(lat: float) -> tuple[float, float]:
    """(meters per degree latitude, meters per degree longitude) at ``lat``."""
    k = EARTH_RADIUS_M * math.pi / 180.0
    return k, k * math.cos(math.radians(lat))


def planar_to_geodetic(x, y, reference=DEFAULT_REFERENCE):
    lat0, lon0 = reference
    m_lat, m_lon = meters_per_degree(lat0)
    return lat0 + np.asarray(y) / m_lat, lon0 + np.asarray(x) / m_lon


def sample_count(duration: float, rate: float) -> int:
    return int(math.ceil(duration * rate - 1e-9))


def generate_pattern(kind, duration=300.0, speed=1.4, arena=10.0, noise=NoiseModel(), seed=0, *,
                     system=CoordinateSystem.PLANAR, reference=DEFAULT_REFERENCE, id="",
                     path: PatternPath | None = None) -> Trajectory:
    """Synthesize one noisy trajectory walking the ideal path of ``kind``.

    The walker starts at a random point of the path and moves at constant
    ``speed``.  Samples are taken every ``1 / noise.sample_rate`` seconds,
    dropped independently with ``noise.dropout_prob`` and displaced by
    Gaussian noise of ``noise.position_sigma`` meters per axis.
    """
    kind = Pattern(kind)
    if not duration > 0 or not speed > 0:
        raise ValueError("duration and speed must be positive")
    path = path or pattern_path(kind)
    width, height = path.footprint()
    if max(width, height) > arena + 1e-9:
        raise GeometryError(f"{kind.value} footprint {width:.2f} x {height:.2f} m exceeds arena side {arena} m")
    rng = np.random.default_rng(seed)
    n = sample_count(duration, noise.sample_rate)
    phase = rng.uniform(0.0, path.length if path.closed else 2 * path.length)
    keep = rng.random(n) >= noise.dropout_prob
    if keep.sum() < 2:
        keep[:2] = True
    t = np.arange(n)[keep] / noise.sample_rate
    x, y = path.walk(phase + speed * t)
    offsets = rng.normal(0.0, noise.position_sigma, size=(len(t), 2))
    x = x + offsets[:, 0]
    y = y + offsets[:, 1]
    system = CoordinateSystem(system)
    if system is CoordinateSystem.GEODETIC:
        lat, lon = planar_to_geodetic(x, y, reference)
        return Trajectory(lat, lon, t, system, label=kind, id=id)
    return Trajectory(x, y, t, system, label=kind, id=id)


def _normalize_counts(counts) -> dict[Pattern, int]:
    if counts is None:
        return dict(DEFAULT_COUNTS)
    if isinstance(counts, Mapping):
        out = {p: 0 for p in PATTERNS}
        for key, value in counts.items():
            out[Pattern(key)] = int(value)
    else:
        counts = list(counts)
        if len(counts) != len(PATTERNS):
            raise ValueError("counts must list Straight, Circling, SShape, UShape")
        out = dict(zip(PATTERNS, (int(c) for c in counts)))
    if any(c < 0 for c in out.values()):
        raise ValueError("counts must be non-negative")
    return out


def trajectory_seed(master_seed: int, kind: Pattern, index: int) -> int:
    code = PATTERNS.index(Pattern(kind))
    return int(np.random.SeedSequence([int(master_seed), code, int(index)]).generate_state(1)[0])


def generate_dataset(counts=None, tech_preset="gnss-like", seed=0, *, duration=300.0, speed=1.4,
                     arena=10.0, reference=DEFAULT_REFERENCE) -> list[Trajectory]:
    """Labeled synthetic dataset; defaults reproduce the 19/25/30/30 composition.

    Each trajectory's seed depends only on (seed, label, index), so any
    subset can be regenerated on its own.
    """
    noise, system = TECH_PRESETS[tech_preset]
    out = []
    for kind, count in _normalize_counts(counts).items():
        for i in range(count):
            out.append(generate_pattern(kind, duration, speed, arena, noise, trajectory_seed(seed, kind, i),
                                        system=system, reference=reference,
                                        id=f"{kind.value.lower()}-{i:03d}"))
    return out
