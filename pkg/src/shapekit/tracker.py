"""Marker tracking: grey frames in, pin heights out.

The pipeline is: threshold the frame, find dark blobs, assign each blob to
its fixed vertical lane, take the largest valid blob per lane and compute
its darkness-weighted centroid. Heights are displacements of those
centroids below the calibrated rest rows, scaled by the per-lane mm/px
factor and clamped into [0, stroke].

Lane assignment is static (the window fixture physically fixes cable
order), so no frame-to-frame data association is needed. Markers above the
rest row clamp to zero: the output side cannot be pulled past rest, so such
readings are jitter by definition.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import cv2
import numpy as np

from shapekit.clocks import Clock
from shapekit.core import PIN_COUNT, DisplayProfile, PinFrame
from shapekit.errors import (
    CalibrationFailed,
    DegenerateScale,
    FormatError,
    LaneMissing,
    NotFound,
    SinkError,
)
from shapekit.synth import CameraModel, TrajectoryScenario, render_frame, truth_at

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrackerConfig:
    """Detection parameters plus the static lane geometry."""

    lane_bounds_px: tuple[tuple[int, int], ...]
    threshold_mode: str = "otsu"  # "otsu" or "fixed"
    threshold_level: int = 115
    min_blob_area_px: int = 8
    max_blob_area_px: int = 2000
    default_mm_per_px: float = 0.1
    target_rate_hz: float = 30.0

    def __post_init__(self):
        if self.threshold_mode not in ("otsu", "fixed"):
            raise ValueError("threshold_mode must be 'otsu' or 'fixed'")
        if not (0 < self.min_blob_area_px < self.max_blob_area_px):
            raise ValueError("need 0 < min_blob_area_px < max_blob_area_px")
        if len(self.lane_bounds_px) != PIN_COUNT:
            raise ValueError(f"need {PIN_COUNT} lanes")
        prev_end = 0
        for x0, x1 in self.lane_bounds_px:
            if x0 < prev_end or x1 <= x0:
                raise ValueError("lanes must be non-overlapping, left to right")
            prev_end = x1
        if self.default_mm_per_px <= 0 or self.target_rate_hz <= 0:
            raise ValueError("default_mm_per_px and target_rate_hz must be positive")

    @classmethod
    def from_camera(cls, cam: CameraModel, **overrides) -> "TrackerConfig":
        lanes = tuple(cam.lane_bounds(i) for i in range(PIN_COUNT))
        overrides.setdefault("default_mm_per_px", cam.mm_per_px)
        return cls(lane_bounds_px=lanes, **overrides)

    def lane_of_x(self, x: float) -> int | None:
        for i, (x0, x1) in enumerate(self.lane_bounds_px):
            if x0 <= x < x1:
                return i
        return None


@dataclass(frozen=True)
class TrackerCalibration:
    """Baseline marker rows and per-lane scales captured at rest."""

    rest_y_px: tuple[float, ...]
    mm_per_px: tuple[float, ...]
    captured_utc: str

    def __post_init__(self):
        if len(self.rest_y_px) != PIN_COUNT or len(self.mm_per_px) != PIN_COUNT:
            raise ValueError(f"calibration needs {PIN_COUNT} lanes")
        if any(s <= 0 for s in self.mm_per_px):
            raise ValueError("mm_per_px must be positive in every lane")


def _threshold_mask(image: np.ndarray, config: TrackerConfig) -> np.ndarray:
    if config.threshold_mode == "otsu":
        _, mask = cv2.threshold(image, 0, 255, cv2.THRESH_BINARY_INV + cv2.THRESH_OTSU)
    else:
        _, mask = cv2.threshold(image, config.threshold_level, 255, cv2.THRESH_BINARY_INV)
    return mask


def _detect_lanes(image: np.ndarray, config: TrackerConfig) -> list[tuple[float, float] | None]:
    """One centroid per lane, or None where no valid blob exists."""
    mask = _threshold_mask(image, config)
    n, labels, stats, coarse = cv2.connectedComponentsWithStats(mask, connectivity=8)

    best: list[tuple[int, int] | None] = [None] * PIN_COUNT  # (area, label)
    candidates = [0] * PIN_COUNT
    for lbl in range(1, n):
        area = int(stats[lbl, cv2.CC_STAT_AREA])
        if not (config.min_blob_area_px <= area <= config.max_blob_area_px):
            continue
        lane = config.lane_of_x(float(coarse[lbl, 0]))
        if lane is None:
            continue
        candidates[lane] += 1
        if best[lane] is None or area > best[lane][0]:
            best[lane] = (area, lbl)

    for lane, count in enumerate(candidates):
        if count > 1:
            log.warning("lane %d: %d candidate blobs, keeping the largest", lane, count)

    out: list[tuple[float, float] | None] = [None] * PIN_COUNT
    for lane, entry in enumerate(best):
        if entry is None:
            continue
        lbl = entry[1]
        x0 = stats[lbl, cv2.CC_STAT_LEFT]
        y0 = stats[lbl, cv2.CC_STAT_TOP]
        x1 = x0 + stats[lbl, cv2.CC_STAT_WIDTH]
        y1 = y0 + stats[lbl, cv2.CC_STAT_HEIGHT]
        sub = labels[y0:y1, x0:x1] == lbl
        w = (255.0 - image[y0:y1, x0:x1]) * sub
        total = w.sum()
        ys, xs = np.mgrid[y0:y1, x0:x1]
        out[lane] = (float((xs * w).sum() / total), float((ys * w).sum() / total))
    return out


def detect_markers(image: np.ndarray, config: TrackerConfig) -> list[tuple[float, float]]:
    """Darkness-weighted centroid of the largest valid blob in each lane.

    Raises LaneMissing for the first lane with no valid blob.
    """
    found = _detect_lanes(image, config)
    for lane, c in enumerate(found):
        if c is None:
            raise LaneMissing(lane)
    return found  # type: ignore[return-value]


def calibrate_baseline(image: np.ndarray, config: TrackerConfig) -> TrackerCalibration:
    """Capture rest-state marker rows from a frame with all pins at rest.

    The caller guarantees the rest condition; this routine only records what
    it sees. Scales are seeded from the config default for every lane and
    can be refined with :func:`calibrate_scale`.
    """
    found = _detect_lanes(image, config)
    missing = [lane for lane, c in enumerate(found) if c is None]
    if missing:
        raise CalibrationFailed(missing)
    return TrackerCalibration(
        rest_y_px=tuple(c[1] for c in found),  # type: ignore[index]
        mm_per_px=(config.default_mm_per_px,) * PIN_COUNT,
        captured_utc=datetime.now(timezone.utc).isoformat(),
    )


def calibrate_scale(
    rest_image: np.ndarray,
    full_depress_image: np.ndarray,
    stroke_mm: float,
    config: TrackerConfig,
) -> TrackerCalibration:
    """Derive per-lane mm/px from a rest frame and a full-stroke frame."""
    rest = detect_markers(rest_image, config)
    full = detect_markers(full_depress_image, config)
    scales = []
    for lane in range(PIN_COUNT):
        dy = abs(full[lane][1] - rest[lane][1])
        if dy < 2.0:
            raise DegenerateScale(lane, dy)
        scales.append(stroke_mm / dy)
    return TrackerCalibration(
        rest_y_px=tuple(c[1] for c in rest),
        mm_per_px=tuple(scales),
        captured_utc=datetime.now(timezone.utc).isoformat(),
    )


def raw_displacements_mm(
    image: np.ndarray, calibration: TrackerCalibration, config: TrackerConfig
) -> list[float | None]:
    """Unclamped per-lane displacements in mm; None where a lane is missing."""
    found = _detect_lanes(image, config)
    out: list[float | None] = [None] * PIN_COUNT
    for lane, c in enumerate(found):
        if c is not None:
            out[lane] = (c[1] - calibration.rest_y_px[lane]) * calibration.mm_per_px[lane]
    return out


def track_frame(
    image: np.ndarray,
    calibration: TrackerCalibration,
    config: TrackerConfig,
    profile: DisplayProfile,
    t_ms: float = 0.0,
    last_heights: tuple[float, ...] | None = None,
) -> PinFrame:
    """Convert one frame into pin heights relative to the baseline.

    A missing lane falls back to its last-known height when one is supplied
    (streaming mode) and is flagged in the frame; without a fallback it
    raises LaneMissing.
    """
    raw = raw_displacements_mm(image, calibration, config)
    heights = []
    missing = []
    for lane, d in enumerate(raw):
        if d is None:
            if last_heights is None:
                raise LaneMissing(lane)
            heights.append(last_heights[lane])
            missing.append(lane)
        else:
            heights.append(min(max(d, 0.0), profile.stroke_mm))
    return PinFrame(t_ms=t_ms, heights_mm=tuple(heights), missing_lanes=tuple(missing))


# --------------------------------------------------------------------------
# Frame sources


class ScenarioFrameSource:
    """Renders a trajectory scenario at the nominal frame rate.

    Yields (t_ms, image) with t on the exact frame grid; frame count is
    duration * rate. The calibration image is a render of the rest state,
    mirroring the operator holding still during sync.
    """

    def __init__(
        self,
        scenario: TrajectoryScenario,
        cam: CameraModel,
        profile: DisplayProfile,
        rate_hz: float = 30.0,
    ):
        cam.validate_travel(profile)
        self.scenario = scenario
        self.cam = cam
        self.profile = profile
        self.rate_hz = rate_hz
        self.frame_count = int(round(scenario.duration_ms * rate_hz / 1000.0))

    def calibration_image(self) -> np.ndarray:
        return render_frame(PinFrame.zero(), self.cam)

    def truth(self, t_ms: float) -> PinFrame:
        return truth_at(self.scenario, t_ms, self.profile)

    def __iter__(self):
        interval = 1000.0 / self.rate_hz
        for i in range(self.frame_count):
            t = i * interval
            yield t, render_frame(self.truth(t), self.cam)


class DirectoryFrameSource:
    """Replays still images (PGM/PNG) from a directory in name order."""

    SUFFIXES = (".pgm", ".png")

    def __init__(self, root: str | Path, rate_hz: float = 30.0):
        self.root = Path(root)
        if not self.root.is_dir():
            raise NotFound(f"frame directory {self.root} does not exist")
        self.paths = sorted(
            p for p in self.root.iterdir() if p.suffix.lower() in self.SUFFIXES
        )
        if not self.paths:
            raise NotFound(f"no .pgm/.png frames in {self.root}")
        self.rate_hz = rate_hz
        self.frame_count = len(self.paths)

    def _read(self, path: Path) -> np.ndarray:
        img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
        if img is None:
            raise FormatError(str(path), f"could not read image {path}")
        return img

    def calibration_image(self) -> np.ndarray:
        return self._read(self.paths[0])

    def __iter__(self):
        interval = 1000.0 / self.rate_hz
        for i, path in enumerate(self.paths):
            yield i * interval, self._read(path)


class CameraFrameSource:
    """Live capture by device index. Optional capability: import-time cheap,
    open-time may fail with SinkError on headless machines."""

    def __init__(self, device_index: int, rate_hz: float = 30.0):
        self.rate_hz = rate_hz
        self._cap = cv2.VideoCapture(device_index)
        if not self._cap.isOpened():
            raise SinkError(f"camera device {device_index} could not be opened")
        self._cap.set(cv2.CAP_PROP_FPS, rate_hz)

    def calibration_image(self) -> np.ndarray:
        ok, frame = self._cap.read()
        if not ok:
            raise SinkError("camera produced no frame for calibration")
        return cv2.cvtColor(frame, cv2.COLOR_BGR2GRAY)

    def __iter__(self):
        import time

        t0 = time.monotonic()
        while True:
            ok, frame = self._cap.read()
            if not ok:
                return
            yield (time.monotonic() - t0) * 1000.0, cv2.cvtColor(frame, cv2.COLOR_BGR2GRAY)

    def close(self):
        self._cap.release()


# --------------------------------------------------------------------------
# Streaming pipeline


@dataclass
class PipelineReport:
    frames_emitted: int = 0
    frames_dropped: int = 0
    lanes_recovered: int = 0  # frames that needed a last-known-height fallback


def run_pipeline(
    source,
    calibration: TrackerCalibration,
    config: TrackerConfig,
    profile: DisplayProfile,
    sink,
    clock: Clock | None = None,
) -> PipelineReport:
    """Track every source frame and hand the PinFrames to ``sink``.

    Live semantics are latest-wins: when a clock is supplied and the sink is
    slower than the frame interval, frames whose timestamp is already stale
    are skipped and counted instead of queued. Without a clock the pipeline
    runs in lockstep and processes everything (offline mode). Source
    exhaustion ends the stream cleanly.
    """
    report = PipelineReport()
    interval = 1000.0 / config.target_rate_hz
    last_heights: tuple[float, ...] | None = None

    for t_ms, image in source:
        if clock is not None and t_ms < clock.now_ms() - interval:
            report.frames_dropped += 1
            continue
        if clock is not None:
            clock.wait_until(t_ms)
        frame = track_frame(image, calibration, config, profile, t_ms, last_heights)
        if frame.missing_lanes:
            report.lanes_recovered += 1
            log.warning("frame at %.1f ms: lanes %s missing, holding last height",
                        t_ms, list(frame.missing_lanes))
        last_heights = frame.heights_mm
        sink(frame)
        report.frames_emitted += 1
    return report


class Subscription:
    """Latest-wins mailbox handed out by Broadcast."""

    def __init__(self):
        self._cond = threading.Condition()
        self._latest: PinFrame | None = None
        self._fresh = False
        self.drops = 0

    def _offer(self, frame: PinFrame):
        with self._cond:
            if self._fresh:
                self.drops += 1
            self._latest = frame
            self._fresh = True
            self._cond.notify_all()

    def poll(self) -> PinFrame | None:
        """Take the latest unseen frame, or None."""
        with self._cond:
            if not self._fresh:
                return None
            self._fresh = False
            return self._latest

    def wait(self, timeout_s: float) -> PinFrame | None:
        with self._cond:
            if not self._fresh:
                self._cond.wait(timeout_s)
            if not self._fresh:
                return None
            self._fresh = False
            return self._latest


class Broadcast:
    """Fan-out of PinFrames to any number of latest-wins subscribers."""

    def __init__(self):
        self._subs: list[Subscription] = []
        self._lock = threading.Lock()

    def subscribe(self) -> Subscription:
        sub = Subscription()
        with self._lock:
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription):
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    @property
    def subscriber_count(self) -> int:
        with self._lock:
            return len(self._subs)

    def publish(self, frame: PinFrame):
        with self._lock:
            subs = list(self._subs)
        for sub in subs:
            sub._offer(frame)
