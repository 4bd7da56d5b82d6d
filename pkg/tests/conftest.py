import numpy as np
import pytest

from shapekit.core import DisplayProfile, PatternRecording
from shapekit.synth import CameraModel, TrajectoryScenario, truth_at

FRAME_INTERVAL_MS = 1000.0 / 30.0


@pytest.fixture
def profile_m() -> DisplayProfile:
    return DisplayProfile.from_id("M")

@pytest.fixture
def profile_l() -> DisplayProfile:
    return DisplayProfile.from_id("L")


@pytest.fixture
def cam() -> CameraModel:
    return CameraModel()


def make_recording(frames, profile=None, rate=30.0, name="test") -> PatternRecording:
    return PatternRecording(
        name=name,
        created_utc="2026-01-01T00:00:00+00:00",
        display_profile=profile or DisplayProfile.from_id("M"),
        frames=tuple(tuple(float(h) for h in f) for f in frames),
        frame_rate_hz=rate,
    )


def wave_frames(count=90, profile=None, duration_ms=3000.0, amplitude=5.0, period=2000.0):
    """Ground-truth wave heights on the 30 Hz grid."""
    profile = profile or DisplayProfile.from_id("M")
    sc = TrajectoryScenario(
        kind="wave", duration_ms=duration_ms, amplitude_mm=amplitude, period_ms=period
    )
    return [
        truth_at(sc, min(i * FRAME_INTERVAL_MS, duration_ms), profile).heights_mm
        for i in range(count)
    ]


def random_recording(rng: np.random.Generator, profile=None, max_frames=40) -> PatternRecording:
    profile = profile or DisplayProfile.from_id("M")
    count = int(rng.integers(1, max_frames + 1))
    frames = rng.uniform(0.0, profile.stroke_mm, size=(count, 25))
    return make_recording(frames, profile=profile, name=f"rand-{rng.integers(1e9)}")


@pytest.fixture
def wave_recording() -> PatternRecording:
    return make_recording(wave_frames(90), name="wave")
