"""Domain types and unit conventions shared by every other module.

Conventions frozen here and relied on everywhere else:

* The pin array is 5x5, addressed row-major with row 0 at the top of the
  tracking camera view. ``linear_index`` / ``grid_position`` are the only
  place the ordering is spelled out.
* All lengths are millimetres, all times are milliseconds. Conversions to
  pixels, bytes or PWM ticks happen at the edges (tracker, device).
* Heights are pin extension above rest, always within [0, stroke].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

GRID_ROWS = 5
GRID_COLS = 5
PIN_COUNT = GRID_ROWS * GRID_COLS

DEFAULT_FRAME_RATE_HZ = 30.0
DEFAULT_STROKE_MM = 10.0

PATTERN_FORMAT_VERSION = "shapekit-pattern/1"

# Per-display geometry and spring stiffness: id -> (pin pitch mm, spring N/mm).
# The small and medium displays share the soft spring; the large display uses
# the stiffer one.
_PROFILE_TABLE = {
    "S": (5.0, 0.1),
    "M": (10.0, 0.1),
    "L": (15.0, 0.3),
}


def linear_index(row: int, col: int) -> int:
    """Map a (row, col) grid cell to its row-major linear index 0..24."""
    if not (0 <= row < GRID_ROWS and 0 <= col < GRID_COLS):
        raise IndexError(f"grid cell ({row}, {col}) outside 5x5 array")
    return row * GRID_COLS + col


def grid_position(index: int) -> tuple[int, int]:
    """Inverse of :func:`linear_index`."""
    if not (0 <= index < PIN_COUNT):
        raise IndexError(f"linear index {index} outside 0..{PIN_COUNT - 1}")
    return divmod(index, GRID_COLS)


@dataclass(frozen=True)
class DisplayProfile:
    """Geometry and spring constant of one display side."""

    id: str
    pin_pitch_mm: float
    stroke_mm: float = DEFAULT_STROKE_MM
    spring_n_per_mm: float = 0.1

    def __post_init__(self):
        if self.pin_pitch_mm <= 0 or self.stroke_mm <= 0 or self.spring_n_per_mm <= 0:
            raise ValueError("profile dimensions and stiffness must be strictly positive")

    @classmethod
    def from_id(cls, profile_id: str, stroke_mm: float = DEFAULT_STROKE_MM) -> "DisplayProfile":
        """Build the standard S/M/L profile. Stroke is a parameter because it
        is a property of the pins, not of the display scale."""
        try:
            pitch, k = _PROFILE_TABLE[profile_id]
        except KeyError:
            raise ValueError(f"unknown display profile {profile_id!r}, expected one of S, M, L")
        return cls(id=profile_id, pin_pitch_mm=pitch, stroke_mm=stroke_mm, spring_n_per_mm=k)


def clamp_height(h_mm: float, profile: DisplayProfile) -> float:
    """Clamp a pin height into the physically reachable [0, stroke] range."""
    if h_mm < 0.0:
        return 0.0
    if h_mm > profile.stroke_mm:
        return profile.stroke_mm
    return h_mm


@dataclass(frozen=True)
class PinFrame:
    """One timestamped snapshot of all 25 pin heights, row-major, in mm.

    ``missing_lanes`` flags lanes whose marker was not detected this frame
    and whose height is a last-known-value fallback.
    """

    t_ms: float
    heights_mm: tuple[float, ...]
    missing_lanes: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.heights_mm) != PIN_COUNT:
            raise ValueError(f"PinFrame needs {PIN_COUNT} heights, got {len(self.heights_mm)}")

    @classmethod
    def zero(cls, t_ms: float = 0.0) -> "PinFrame":
        return cls(t_ms=t_ms, heights_mm=(0.0,) * PIN_COUNT)

    def height_at(self, row: int, col: int) -> float:
        return self.heights_mm[linear_index(row, col)]


@dataclass(frozen=True)
class TuningParams:
    """Global playback tuning: height gain and motion speed factor."""

    height_gain: float = 1.0
    speed_factor: float = 1.0

    def __post_init__(self):
        if self.height_gain < 0:
            raise ValueError("height_gain must be >= 0")
        if self.speed_factor <= 0:
            raise ValueError("speed_factor must be > 0")


@dataclass(frozen=True)
class PatternRecording:
    """A named, fixed-rate sequence of pin frames; the persisted artifact.

    Frame timestamps are nominal grid times: frame i is at i / frame_rate_hz.
    Capture jitter is discarded when a recording is built so that playback
    runs on a uniform clock.
    """

    name: str
    created_utc: str
    display_profile: DisplayProfile
    frames: tuple[tuple[float, ...], ...]
    frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ
    annotations: dict[str, str] = field(default_factory=dict)
    format_version: str = PATTERN_FORMAT_VERSION
    grid_rows: int = GRID_ROWS
    grid_cols: int = GRID_COLS

    def __post_init__(self):
        if self.frame_rate_hz <= 0:
            raise ValueError("frame_rate_hz must be > 0")
        for i, frame in enumerate(self.frames):
            if len(frame) != PIN_COUNT:
                raise ValueError(f"frame {i} has {len(frame)} entries, expected {PIN_COUNT}")
            for h in frame:
                if not (-1e-9 <= h <= self.display_profile.stroke_mm + 1e-9):
                    raise ValueError(
                        f"frame {i} height {h} outside [0, {self.display_profile.stroke_mm}]"
                    )

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @property
    def frame_interval_ms(self) -> float:
        return 1000.0 / self.frame_rate_hz

    @property
    def duration_ms(self) -> float:
        """Time from the first frame to the last frame."""
        if not self.frames:
            return 0.0
        return (len(self.frames) - 1) * self.frame_interval_ms

    def frame_time_ms(self, i: int) -> float:
        return i * self.frame_interval_ms

    def pin_frames(self):
        """Iterate frames as timestamped PinFrames on the nominal grid."""
        for i, heights in enumerate(self.frames):
            yield PinFrame(t_ms=self.frame_time_ms(i), heights_mm=heights)


def frames_from_floats(rows) -> tuple[tuple[float, ...], ...]:
    """Normalize any nested iterable of numbers into the tuple-of-tuples
    layout PatternRecording stores."""
    return tuple(tuple(float(h) for h in row) for row in rows)


def nearly_equal(a: float, b: float, tol: float = 1e-9) -> bool:
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)
