import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trajclass.exceptions import GeometryError, OrderingError, ParseError, SizeError
from trajclass.trajectory import (
    GNSS_LIKE, UWB_LIKE, CoordinateSystem, NoiseModel, Pattern, Trajectory, TrajPoint, generate_dataset,
    generate_pattern, meters_per_degree, parse_trajectory_csv, pattern_path, read_manifest, trajectory_to_csv,
    write_dataset,
)


def test_parse_minimal_planar():
    traj = parse_trajectory_csv(b"x,y,t\n0,0,0\n3,4,1", "planar")
    assert len(traj) == 2
    assert traj.system is CoordinateSystem.PLANAR
    assert traj.points[1] == TrajPoint(3.0, 4.0, 1.0)


def test_parse_rejects_equal_timestamps():
    with pytest.raises(OrderingError):
        parse_trajectory_csv(b"lat,lon,t\n0,0,0\n0,0,0", "geodetic")


def test_parse_rejects_decreasing_timestamps_instead_of_sorting():
    with pytest.raises(OrderingError):
        parse_trajectory_csv(b"x,y,t\n0,0,2\n1,1,1\n2,2,3", "planar")


def test_parse_single_row_is_size_error():
    with pytest.raises(SizeError):
        parse_trajectory_csv(b"x,y,t\n0,0,0\n", "planar")


def test_parse_reports_line_of_bad_field():
    with pytest.raises(ParseError) as info:
        parse_trajectory_csv(b"x,y,t\n0,0,0\n1,abc,1\n", "planar")
    assert info.value.line == 3


def test_parse_wrong_header():
    with pytest.raises(ParseError):
        parse_trajectory_csv(b"lat,lon,t\n0,0,0\n1,1,1\n", "planar")


def test_parse_300_row_geodetic_file():
    rows = "\n".join(f"{52 + i * 1e-6},{4 + i * 1e-6},{i}" for i in range(300))
    traj = parse_trajectory_csv(("lat,lon,t\n" + rows + "\n").encode(), "geodetic")
    assert len(traj) == 300
    assert traj.t[-1] - traj.t[0] == 299


def test_geodetic_range_checked():
    with pytest.raises(GeometryError):
        Trajectory([91, 0], [0, 0], [0, 1], "geodetic")


def test_trajectory_is_immutable():
    traj = Trajectory([0, 1], [0, 1], [0, 1])
    with pytest.raises(AttributeError):
        traj.id = "x"
    with pytest.raises(ValueError):
        traj.c1[0] = 5.0


finite = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(finite, finite, st.floats(0.001, 100.0)), min_size=2, max_size=40))
def test_csv_round_trip_is_exact(rows):
    t = np.cumsum([r[2] for r in rows])
    traj = Trajectory([r[0] for r in rows], [r[1] for r in rows], t, "planar")
    back = parse_trajectory_csv(trajectory_to_csv(traj).encode(), "planar")
    assert back.points == traj.points


def test_csv_uses_lf_and_header():
    text = trajectory_to_csv(Trajectory([0, 1], [0, 1], [0, 1], "geodetic"))
    assert text.startswith("lat,lon,t\n")
    assert "\r" not in text


def test_noise_model_invariants():
    for bad in (dict(position_sigma=-1), dict(sample_rate=0), dict(dropout_prob=1.0)):
        with pytest.raises(ValueError):
            NoiseModel(**bad)


def test_presets():
    assert (GNSS_LIKE.position_sigma, GNSS_LIKE.sample_rate) == (2.5, 1.0)
    assert (UWB_LIKE.position_sigma, UWB_LIKE.sample_rate) == (0.125, 5.91)


def _distance_to_path(traj, kind):
    path = pattern_path(kind)
    return np.array([path.distance(x, y) for x, y in zip(traj.c1, traj.c2)])


@pytest.mark.parametrize("kind", list(Pattern))
def test_noise_free_points_lie_on_ideal_path(kind):
    traj = generate_pattern(kind, 300, 1.4, 10.0, NoiseModel(0.0, 1.0), seed=3)
    assert len(traj) == 300
    assert _distance_to_path(traj, kind).max() < 1e-9


def test_straight_points_collinear():
    traj = generate_pattern("Straight", 300, 1.4, 10.0, NoiseModel(0.0, 1.0), seed=1)
    p = np.column_stack([traj.c1, traj.c2])
    direction = p.max(0) - p.min(0)
    cross = (p[:, 0] - p[0, 0]) * direction[1] - (p[:, 1] - p[0, 1]) * direction[0]
    assert np.abs(cross).max() / np.hypot(*direction) < 1e-9


def test_circling_points_at_constant_radius():
    path = pattern_path("Circling")
    traj = generate_pattern("Circling", 300, 1.4, 10.0, NoiseModel(0.0, 1.0), seed=2)
    center = path.pieces[0].center
    r = np.hypot(traj.c1 - center[0], traj.c2 - center[1])
    assert np.abs(r - path.pieces[0].radius).max() < 1e-9


def test_constant_speed_along_path():
    traj = generate_pattern("Straight", 20, 1.4, 10.0, NoiseModel(0.0, 1.0), seed=0)
    steps = np.hypot(np.diff(traj.c1), np.diff(traj.c2))
    # a step that crosses a turnaround is shorter than the walked distance
    assert np.isclose(np.median(steps), 1.4)
    assert steps.max() <= 1.4 + 1e-9


def test_uwb_point_count():
    traj = generate_pattern("UShape", 300, 1.4, 10.0, UWB_LIKE, seed=0)
    assert len(traj) == math.ceil(300 * 5.91) == 1773


def test_arena_too_small():
    with pytest.raises(GeometryError):
        generate_pattern("Circling", 10, 1.4, 5.0, NoiseModel(), seed=0)


def test_gaussian_noise_folded_mean():
    # perpendicular offset from a straight line is |N(0, sigma^2)|, mean sigma * sqrt(2/pi)
    sigma = 0.05
    traj = generate_pattern("Straight", 20000, 1.4, 10.0, NoiseModel(sigma, 1.0), seed=11)
    d = _distance_to_path(traj, "Straight")
    assert len(d) >= 10_000
    assert abs(d.mean() - sigma * math.sqrt(2 / math.pi)) < 0.1 * sigma * math.sqrt(2 / math.pi)


def test_dropout_count_within_three_sigma():
    n, q = 3000, 0.3
    traj = generate_pattern("Circling", n, 1.4, 10.0, NoiseModel(0.1, 1.0, q), seed=5)
    assert abs(len(traj) - n * (1 - q)) <= 3 * math.sqrt(n * q * (1 - q))


def test_generation_is_deterministic():
    a = generate_pattern("SShape", 60, 1.4, 10.0, GNSS_LIKE, seed=9, system="geodetic")
    b = generate_pattern("SShape", 60, 1.4, 10.0, GNSS_LIKE, seed=9, system="geodetic")
    assert a == b


def test_geodetic_mapping_factors():
    m_lat, m_lon = meters_per_degree(52.0)
    assert m_lat == pytest.approx(6_371_000 * math.pi / 180)
    assert m_lon == pytest.approx(m_lat * math.cos(math.radians(52.0)))


def test_default_dataset_composition():
    data = generate_dataset(duration=5)
    assert len(data) == 104
    counts = {p: sum(t.label is p for t in data) for p in Pattern}
    assert counts == {Pattern.STRAIGHT: 19, Pattern.CIRCLING: 25, Pattern.SSHAPE: 30, Pattern.USHAPE: 30}
    assert len({t.id for t in data}) == 104


def test_single_straight():
    data = generate_dataset((1, 0, 0, 0), duration=5)
    assert [t.label for t in data] == [Pattern.STRAIGHT]


def test_dataset_bit_identical_and_subset_reproducible():
    a = generate_dataset(seed=4, duration=10)
    b = generate_dataset(seed=4, duration=10)
    assert all(x == y for x, y in zip(a, b))
    sub = generate_dataset((0, 3, 0, 0), seed=4, duration=10)
    circling = [t for t in a if t.label is Pattern.CIRCLING][:3]
    assert all(x == y for x, y in zip(sub, circling))


def test_manifest_round_trip(tmp_path):
    data = generate_dataset((2, 1, 1, 1), "uwb-like", seed=1, duration=5)
    manifest = write_dataset(data, tmp_path)
    doc = json.loads(manifest.read_text())
    assert {tuple(sorted(e)) for e in doc["trajectories"]} == {("id", "label", "path", "system")}
    back = read_manifest(manifest)
    assert all(x == y for x, y in zip(back, data))


def test_pickle_round_trip():
    import pickle
    traj = generate_dataset((1, 0, 0, 0), seed=2, duration=20)[0]
    assert pickle.loads(pickle.dumps(traj)) == traj
