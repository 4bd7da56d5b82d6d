import math

import numpy as np
import pytest

from shapekit.core import PIN_COUNT, DisplayProfile, PinFrame
from shapekit.errors import GeometryError, RangeError
from shapekit.synth import (
    SCENARIO_KINDS,
    CameraModel,
    TrajectoryScenario,
    read_pgm,
    render_frame,
    truth_at,
    write_pgm,
)


def test_scenario_kind_gate():
    with pytest.raises(ValueError):
        TrajectoryScenario(kind="spiral")
    assert set(SCENARIO_KINDS) == {"wave", "sequential", "uniform", "random_walk", "constant"}


def test_truth_rejects_time_outside_duration(profile_m):
    sc = TrajectoryScenario(kind="wave", duration_ms=1000.0)
    with pytest.raises(RangeError):
        truth_at(sc, -0.1, profile_m)
    with pytest.raises(RangeError):
        truth_at(sc, 1000.1, profile_m)
    truth_at(sc, 0.0, profile_m)
    truth_at(sc, 1000.0, profile_m)


def test_wave_starts_at_rest_and_stays_in_range(profile_m):
    sc = TrajectoryScenario(kind="wave", duration_ms=5000.0, amplitude_mm=5.0)
    rest = truth_at(sc, 0.0, profile_m)
    assert all(h == 0.0 for h in rest.heights_mm)
    for t in np.linspace(0.0, 5000.0, 151):
        f = truth_at(sc, float(t), profile_m)
        assert all(0.0 <= h <= profile_m.stroke_mm for h in f.heights_mm)


def test_wave_columns_share_phase_across_rows(profile_m):
    sc = TrajectoryScenario(kind="wave", duration_ms=5000.0)
    f = truth_at(sc, 3456.0, profile_m)
    for col in range(5):
        column = [f.height_at(row, col) for row in range(5)]
        assert max(column) - min(column) == 0.0


def test_wave_travels_across_columns(profile_m):
    # After the ramp-in the crest position must move with time.
    sc = TrajectoryScenario(kind="wave", duration_ms=10000.0, period_ms=2000.0)
    crest_cols = []
    for t in (4000.0, 4400.0, 4800.0):
        f = truth_at(sc, t, profile_m)
        crest_cols.append(max(range(5), key=lambda c: f.height_at(0, c)))
    assert len(set(crest_cols)) > 1


def test_uniform_peak_at_half_period(profile_m):
    sc = TrajectoryScenario(kind="uniform", duration_ms=4000.0, amplitude_mm=6.0, period_ms=2000.0)
    start = truth_at(sc, 0.0, profile_m)
    peak = truth_at(sc, 1000.0, profile_m)
    back = truth_at(sc, 2000.0, profile_m)
    assert all(h == 0.0 for h in start.heights_mm)
    assert all(abs(h - 6.0) < 1e-9 for h in peak.heights_mm)
    assert all(abs(h) < 1e-9 for h in back.heights_mm)
    assert len(set(peak.heights_mm)) == 1  # all pins together


def test_sequential_raises_one_pin_at_a_time(profile_m):
    sc = TrajectoryScenario(kind="sequential", duration_ms=5000.0, step_ms=100.0, amplitude_mm=5.0)
    for t, expected in ((0.0, 0), (150.0, 1), (2400.0, 24), (2500.0, 0)):
        f = truth_at(sc, t, profile_m)
        raised = [i for i, h in enumerate(f.heights_mm) if h > 0]
        assert raised == [expected]
        assert f.heights_mm[expected] == 5.0


def test_random_walk_determinism_and_range(profile_m):
    sc = TrajectoryScenario(kind="random_walk", duration_ms=3000.0, amplitude_mm=5.0, seed=7)
    a = [truth_at(sc, t, profile_m).heights_mm for t in (0.0, 500.0, 1500.0, 3000.0)]
    b = [truth_at(sc, t, profile_m).heights_mm for t in (0.0, 500.0, 1500.0, 3000.0)]
    assert a == b
    assert all(0.0 <= h <= 5.0 for frame in a for h in frame)
    other = TrajectoryScenario(kind="random_walk", duration_ms=3000.0, amplitude_mm=5.0, seed=8)
    assert truth_at(other, 1500.0, profile_m).heights_mm != a[2]


def test_random_walk_moves(profile_m):
    sc = TrajectoryScenario(kind="random_walk", duration_ms=3000.0, seed=1)
    assert truth_at(sc, 3000.0, profile_m).heights_mm != truth_at(sc, 0.0, profile_m).heights_mm


def test_constant_scenario(profile_m):
    sc = TrajectoryScenario(kind="constant", duration_ms=1000.0, level_mm=3.25)
    f = truth_at(sc, 500.0, profile_m)
    assert all(h == 3.25 for h in f.heights_mm)


def test_amplitude_clamped_to_stroke(profile_m):
    sc = TrajectoryScenario(kind="uniform", duration_ms=2000.0, amplitude_mm=50.0, period_ms=2000.0)
    peak = truth_at(sc, 1000.0, profile_m)
    assert all(h <= profile_m.stroke_mm + 1e-12 for h in peak.heights_mm)


def test_camera_model_validation():
    with pytest.raises(ValueError):
        CameraModel(width_px=10)
    with pytest.raises(ValueError):
        CameraModel(marker_level=250)
    with pytest.raises(ValueError):
        CameraModel(noise_sigma_px=-1.0)
    cam = CameraModel()
    assert cam.lane_width_px == 640 / 25
    x0, x1 = cam.lane_bounds(0)
    assert x0 == 0 and x1 == 26
    assert cam.lane_bounds(24)[1] == 640


def test_validate_travel(profile_m):
    CameraModel().validate_travel(profile_m)
    with pytest.raises(GeometryError):
        CameraModel(height_px=120).validate_travel(profile_m)


def test_render_is_deterministic(cam, profile_m):
    sc = TrajectoryScenario(kind="wave", duration_ms=3000.0)
    truth = truth_at(sc, 1234.5, profile_m)
    a = render_frame(truth, cam)
    b = render_frame(truth, cam)
    assert a.dtype == np.uint8 and a.shape == (480, 640)
    assert np.array_equal(a, b)


def test_render_noise_determinism_keyed_on_seed_and_time(profile_m):
    noisy = CameraModel(noise_sigma_px=0.5, seed=3)
    truth = PinFrame(t_ms=100.0, heights_mm=(2.0,) * PIN_COUNT)
    a = render_frame(truth, noisy)
    b = render_frame(truth, noisy)
    assert np.array_equal(a, b)
    # different time -> different jitter
    truth2 = PinFrame(t_ms=100.1, heights_mm=(2.0,) * PIN_COUNT)
    assert not np.array_equal(a, render_frame(truth2, noisy))
    # different seed -> different jitter
    assert not np.array_equal(a, render_frame(truth, CameraModel(noise_sigma_px=0.5, seed=4)))
    # zero sigma -> no jitter even with a seed set
    clean = CameraModel(noise_sigma_px=0.0, seed=3)
    assert np.array_equal(render_frame(truth, clean), render_frame(truth2, clean))


def test_render_centroid_matches_commanded_centre(cam, profile_m):
    """Independent oracle: the darkness-weighted centre of mass of each
    lane's blob must sit within a quarter pixel of the commanded centre."""
    heights = tuple((i % 5) * 2.0 for i in range(PIN_COUNT))  # 0, 2, ..., 8 mm
    truth = PinFrame(t_ms=0.0, heights_mm=heights)
    img = render_frame(truth, cam)
    # darkness above the flat background is the ink the renderer deposited
    weights = np.maximum(0.0, cam.background_level - img.astype(np.float64))
    ys = np.arange(img.shape[0], dtype=np.float64)[:, None]
    worst = 0.0
    for lane in range(PIN_COUNT):
        x0, x1 = cam.lane_bounds(lane)
        strip = weights[:, x0:x1]
        cy = float((strip * ys).sum() / strip.sum())
        expected = cam.rest_y_px + heights[lane] / cam.mm_per_px
        worst = max(worst, abs(cy - expected))
    assert worst <= 0.25, f"worst centroid offset {worst:.3f} px"


def test_render_marker_down_convention(cam, profile_m):
    """Positive extension moves the marker DOWN (larger y)."""
    rest = render_frame(PinFrame.zero(), cam)
    up = render_frame(PinFrame(t_ms=0.0, heights_mm=(5.0,) * PIN_COUNT), cam)
    y_rest = np.where((rest < 200).any(axis=1))[0].mean()
    y_up = np.where((up < 200).any(axis=1))[0].mean()
    assert y_up > y_rest + 40  # 5 mm at 0.1 mm/px = 50 px


def test_render_rejects_marker_outside_image():
    cam = CameraModel(rest_y_px=470.0)
    with pytest.raises(GeometryError):
        render_frame(PinFrame(t_ms=0.0, heights_mm=(5.0,) * PIN_COUNT), cam)


def test_pgm_round_trip(tmp_path, cam, profile_m):
    sc = TrajectoryScenario(kind="wave", duration_ms=1000.0)
    img = render_frame(truth_at(sc, 600.0, profile_m), cam)
    path = tmp_path / "frame.pgm"
    write_pgm(path, img)
    back = read_pgm(path)
    assert np.array_equal(img, back)


def test_pgm_rejects_wrong_dtype(tmp_path):
    with pytest.raises(ValueError):
        write_pgm(tmp_path / "x.pgm", np.zeros((4, 4), dtype=np.float32))
