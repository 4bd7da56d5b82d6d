"""Deterministic synthetic camera.

Renders grey frames of the 25-lane cable window from ground-truth pin
trajectories. Every pixel is a pure function of (scenario, camera, time), so
rendered frames double as a closed-loop oracle for the tracker: render a
known truth, track it, compare.

Geometry convention (mirrored by the tracker): positive pin extension pulls
the cable toward the output side, which moves the marker DOWN in the image.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from shapekit.core import GRID_COLS, PIN_COUNT, DisplayProfile, PinFrame, clamp_height
from shapekit.errors import GeometryError, RangeError

SCENARIO_KINDS = ("wave", "sequential", "uniform", "random_walk", "constant")


@dataclass(frozen=True)
class CameraModel:
    """Synthetic camera intrinsics: one vertical lane per cable, one round
    dark marker per lane, travel axis straight down."""

    width_px: int = 640
    height_px: int = 480
    marker_radius_px: float = 4.0
    mm_per_px: float = 0.1
    rest_y_px: float = 60.0
    noise_sigma_px: float = 0.0
    background_level: int = 200
    marker_level: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.width_px < PIN_COUNT:
            raise ValueError("image too narrow for 25 lanes")
        if not (0 <= self.marker_level < self.background_level <= 255):
            raise ValueError("marker_level must be darker than background_level")
        if self.mm_per_px <= 0 or self.marker_radius_px < 1:
            raise ValueError("mm_per_px and marker_radius_px must be positive")
        if self.noise_sigma_px < 0:
            raise ValueError("noise_sigma_px must be >= 0")

    @property
    def lane_width_px(self) -> float:
        return self.width_px / PIN_COUNT

    def lane_center_x(self, lane: int) -> float:
        return (lane + 0.5) * self.lane_width_px

    def lane_bounds(self, lane: int) -> tuple[int, int]:
        """Half-open pixel column range [x0, x1) of one lane strip."""
        x0 = int(round(lane * self.lane_width_px))
        x1 = int(round((lane + 1) * self.lane_width_px))
        return x0, x1

    def validate_travel(self, profile: DisplayProfile) -> None:
        """Check that a full-stroke marker stays inside the image."""
        y_max = self.rest_y_px + profile.stroke_mm / self.mm_per_px + self.marker_radius_px + 1
        if y_max >= self.height_px or self.rest_y_px - self.marker_radius_px - 1 < 0:
            raise GeometryError(
                f"full stroke travel ({profile.stroke_mm} mm at {self.mm_per_px} mm/px) "
                f"does not fit in a {self.height_px} px tall image"
            )


@dataclass(frozen=True)
class TrajectoryScenario:
    """Ground-truth pin trajectory generator.

    kinds:
      wave        - traveling sinusoid across the columns with a one-period
                    ramp-in so motion starts from rest
      sequential  - pins raised one at a time, floor(t / step_ms) picks the
                    linear index (wrapping), ``order`` remaps it
      uniform     - all pins rise and fall together, peak at half period
      random_walk - per-pin reflected Gaussian walk, sampled-and-held on an
                    internal grid, deterministic per seed
      constant    - every pin parked at level_mm
    """

    kind: str = "wave"
    duration_ms: float = 10_000.0
    amplitude_mm: float = 5.0
    period_ms: float = 2_000.0
    step_ms: float = 100.0
    level_mm: float = 0.0
    walk_sigma_mm: float = 0.35
    walk_dt_ms: float = 1000.0 / 30.0
    order: tuple[int, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}, expected one of {SCENARIO_KINDS}")
        if self.duration_ms <= 0 or self.period_ms <= 0 or self.step_ms <= 0:
            raise ValueError("duration, period and step must be positive")
        if self.amplitude_mm < 0 or self.walk_sigma_mm < 0 or self.walk_dt_ms <= 0:
            raise ValueError("amplitude, walk sigma and walk dt must be non-negative")


@functools.lru_cache(maxsize=16)
def _walk_table(scenario: TrajectoryScenario, hi_mm: float) -> np.ndarray:
    """Precompute the random-walk height table, (steps+1) x 25, in [0, hi]."""
    steps = int(math.floor(scenario.duration_ms / scenario.walk_dt_ms + 1e-9)) + 1
    rng = np.random.default_rng([scenario.seed, 0x57414C4B])
    table = np.zeros((steps, PIN_COUNT))
    h = np.zeros(PIN_COUNT)
    for k in range(1, steps):
        h = h + rng.normal(0.0, scenario.walk_sigma_mm, PIN_COUNT)
        h = np.abs(h)  # reflect at 0
        over = h > hi_mm
        h[over] = 2 * hi_mm - h[over]  # reflect at the top
        h = np.clip(h, 0.0, hi_mm)
        table[k] = h
    return table


def truth_at(scenario: TrajectoryScenario, t_ms: float, profile: DisplayProfile) -> PinFrame:
    """Ground-truth pin heights at time t, clamped to the profile stroke."""
    if not (0.0 <= t_ms <= scenario.duration_ms):
        raise RangeError(f"t = {t_ms} ms outside scenario duration [0, {scenario.duration_ms}]")

    amp = min(scenario.amplitude_mm, profile.stroke_mm)
    heights = [0.0] * PIN_COUNT

    if scenario.kind == "constant":
        level = clamp_height(scenario.level_mm, profile)
        heights = [level] * PIN_COUNT
    elif scenario.kind == "uniform":
        h = amp * 0.5 * (1.0 - math.cos(2.0 * math.pi * t_ms / scenario.period_ms))
        heights = [h] * PIN_COUNT
    elif scenario.kind == "wave":
        envelope = min(1.0, t_ms / scenario.period_ms)
        phase_t = 2.0 * math.pi * t_ms / scenario.period_ms
        for i in range(PIN_COUNT):
            col = i % GRID_COLS
            phase = phase_t - 2.0 * math.pi * col / GRID_COLS
            heights[i] = envelope * amp * 0.5 * (1.0 - math.cos(phase))
    elif scenario.kind == "sequential":
        idx = int(math.floor(t_ms / scenario.step_ms)) % PIN_COUNT
        if scenario.order is not None:
            idx = scenario.order[idx % len(scenario.order)]
        heights[idx] = amp
    elif scenario.kind == "random_walk":
        table = _walk_table(scenario, amp)
        k = min(int(math.floor(t_ms / scenario.walk_dt_ms + 1e-9)), len(table) - 1)
        heights = [float(v) for v in table[k]]

    heights = [clamp_height(h, profile) for h in heights]
    return PinFrame(t_ms=t_ms, heights_mm=tuple(heights))


def _jitter_for(cam: CameraModel, t_ms: float) -> np.ndarray:
    """Per-marker (dy, dx) centre jitter; a pure function of (seed, t)."""
    if cam.noise_sigma_px <= 0:
        return np.zeros((PIN_COUNT, 2))
    t_key = int(round(t_ms * 1000.0))  # microsecond-resolution stream key
    rng = np.random.default_rng([cam.seed, t_key])
    return rng.normal(0.0, cam.noise_sigma_px, (PIN_COUNT, 2))


def render_frame(truth: PinFrame, cam: CameraModel) -> np.ndarray:
    """Render a grey frame with one dark marker per lane.

    Markers are filled circles with a 1 px linear anti-alias skirt, so the
    darkness-weighted centre of mass of each blob sits at the commanded
    centre to well under a tenth of a pixel.
    """
    img = np.full((cam.height_px, cam.width_px), cam.background_level, dtype=np.uint8)
    jitter = _jitter_for(cam, truth.t_ms)
    r = cam.marker_radius_px
    span = cam.background_level - cam.marker_level

    for lane in range(PIN_COUNT):
        cx = cam.lane_center_x(lane) + jitter[lane, 1]
        cy = cam.rest_y_px + truth.heights_mm[lane] / cam.mm_per_px + jitter[lane, 0]
        if not (r + 0.5 <= cx < cam.width_px - r - 0.5 and r + 0.5 <= cy < cam.height_px - r - 0.5):
            raise GeometryError(
                f"lane {lane} marker centre ({cx:.1f}, {cy:.1f}) px leaves the image"
            )
        x0 = int(math.floor(cx - r - 1))
        x1 = int(math.ceil(cx + r + 1)) + 1
        y0 = int(math.floor(cy - r - 1))
        y1 = int(math.ceil(cy + r + 1)) + 1
        ys, xs = np.ogrid[y0:y1, x0:x1]
        dist = np.hypot(ys - cy, xs - cx)
        coverage = np.clip(r + 0.5 - dist, 0.0, 1.0)
        values = np.round(cam.background_level - span * coverage).astype(np.uint8)
        patch = img[y0:y1, x0:x1]
        np.minimum(patch, values, out=patch)

    return img


def write_pgm(path, img: np.ndarray) -> None:
    """Dump an 8-bit grey image as binary PGM (P5), row-major."""
    if img.dtype != np.uint8 or img.ndim != 2:
        raise ValueError("expected a 2-D uint8 image")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5) image written by :func:`write_pgm`."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM file")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":  # comment line
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(v) for v in fields)
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM supported")
    return np.frombuffer(data[pos : pos + w * h], dtype=np.uint8).reshape(h, w).copy()
