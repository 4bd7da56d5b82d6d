"""Recording sessions and the on-disk pattern library.

Files are UTF-8 JSON, one pattern per file, named <id>.skp.json. The schema
is exactly the PatternRecording fields; floats survive a save/load round
trip bit-exactly because JSON carries full double precision.

Recorded timestamps are snapped to the nominal frame grid on stop: playback
wants a uniform clock and capture jitter carries no information about the
touch itself. Gaps in the capture stream are filled by repeating the
previous frame and the fill count is noted in annotations["drops"].
"""

from __future__ import annotations

import json
import secrets
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from shapekit.core import (
    GRID_COLS,
    GRID_ROWS,
    PATTERN_FORMAT_VERSION,
    PIN_COUNT,
    DisplayProfile,
    PatternRecording,
    PinFrame,
    frames_from_floats,
)
from shapekit.errors import EmptyRecording, FormatError, NotFound, StateError

IDLE = "Idle"
SYNCING = "Syncing"
TRACKING = "Tracking"
RECORDING = "Recording"

STATES = (IDLE, SYNCING, TRACKING, RECORDING)

LEGAL_TRANSITIONS = {
    (IDLE, SYNCING),
    (SYNCING, TRACKING),
    (TRACKING, RECORDING),
    (RECORDING, TRACKING),
}


class RecordingSession:
    """Capture-side state machine: Idle -> Syncing -> Tracking <-> Recording.

    push() buffers frames only while Recording; in every other state frames
    pass through untouched (live view is someone else's job).
    """

    def __init__(self):
        self._state = IDLE
        self.calibration = None
        self.started_at: float | None = None
        self._buffer: list[PinFrame] = []

    @property
    def state(self) -> str:
        return self._state

    @property
    def buffered_frames(self) -> int:
        return len(self._buffer)

    def _transition(self, source: str, target: str):
        # Each action owns exactly one edge, so the source check alone
        # rejects every illegal cell of the 4x4 transition table.
        if self._state != source:
            raise StateError(
                f"illegal transition {self._state} -> {target}; "
                f"legal targets from {self._state}: "
                f"{sorted(b for a, b in LEGAL_TRANSITIONS if a == self._state) or 'none'}"
            )
        self._state = target

    def begin_sync(self):
        self._transition(IDLE, SYNCING)

    def attach_calibration(self, calibration):
        self._transition(SYNCING, TRACKING)
        self.calibration = calibration

    def start_recording(self):
        self._transition(TRACKING, RECORDING)
        self._buffer = []
        self.started_at = None

    def push(self, frame: PinFrame):
        if self._state == RECORDING:
            if self.started_at is None:
                self.started_at = frame.t_ms
            self._buffer.append(frame)

    def stop_recording(
        self,
        name: str,
        profile: DisplayProfile,
        frame_rate_hz: float = 30.0,
        annotations: dict[str, str] | None = None,
    ) -> PatternRecording:
        """Snap the buffer onto the frame grid and build a recording.

        Stopping with an empty buffer returns the session to Tracking but
        raises EmptyRecording (nothing to save).
        """
        self._transition(RECORDING, TRACKING)
        buffer, self._buffer = self._buffer, []
        if not buffer:
            raise EmptyRecording("no frames arrived between start and stop")
        return build_recording(buffer, name, profile, frame_rate_hz, annotations)


def build_recording(
    frames: list[PinFrame],
    name: str,
    profile: DisplayProfile,
    frame_rate_hz: float = 30.0,
    annotations: dict[str, str] | None = None,
) -> PatternRecording:
    """Resample captured frames onto the exact frame grid.

    Grid slot i (at first_t + i/rate) takes the nearest captured frame;
    slots that reuse an earlier frame than the previous slot count as drop
    fills.
    """
    if not frames:
        raise EmptyRecording("cannot build a recording from zero frames")
    interval = 1000.0 / frame_rate_hz
    t0 = frames[0].t_ms
    span = frames[-1].t_ms - t0
    count = int(span / interval + 0.5) + 1

    times = [f.t_ms for f in frames]
    resampled = []
    fills = 0
    src = 0
    for i in range(count):
        target = t0 + i * interval
        while src + 1 < len(times) and abs(times[src + 1] - target) <= abs(times[src] - target):
            src += 1
        if i > 0 and resampled and src == last_src:
            fills += 1
        resampled.append(frames[src].heights_mm)
        last_src = src

    notes = dict(annotations or {})
    if fills:
        notes["drops"] = str(fills)
    return PatternRecording(
        name=name,
        created_utc=datetime.now(timezone.utc).isoformat(),
        display_profile=profile,
        frames=tuple(resampled),
        frame_rate_hz=frame_rate_hz,
        annotations=notes,
    )


# --------------------------------------------------------------------------
# Serialization


def recording_to_dict(rec: PatternRecording) -> dict:
    return {
        "format_version": rec.format_version,
        "name": rec.name,
        "created_utc": rec.created_utc,
        "grid_rows": rec.grid_rows,
        "grid_cols": rec.grid_cols,
        "display_profile": {
            "id": rec.display_profile.id,
            "pin_pitch_mm": rec.display_profile.pin_pitch_mm,
            "stroke_mm": rec.display_profile.stroke_mm,
            "spring_n_per_mm": rec.display_profile.spring_n_per_mm,
        },
        "frame_rate_hz": rec.frame_rate_hz,
        "frames": [list(f) for f in rec.frames],
        "annotations": dict(rec.annotations),
    }


def recording_from_dict(doc: dict) -> PatternRecording:
    if not isinstance(doc, dict):
        raise FormatError("document", "pattern file is not a JSON object")
    version = doc.get("format_version")
    if version != PATTERN_FORMAT_VERSION:
        raise FormatError("version", f"unsupported format_version {version!r}")
    try:
        profile_doc = doc["display_profile"]
        profile = DisplayProfile(
            id=str(profile_doc["id"]),
            pin_pitch_mm=float(profile_doc["pin_pitch_mm"]),
            stroke_mm=float(profile_doc["stroke_mm"]),
            spring_n_per_mm=float(profile_doc["spring_n_per_mm"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError("display_profile", f"bad display_profile: {e}") from e

    if doc.get("grid_rows") != GRID_ROWS or doc.get("grid_cols") != GRID_COLS:
        raise FormatError("grid", "grid dimensions must be 5x5")

    frames_doc = doc.get("frames")
    if not isinstance(frames_doc, list) or not frames_doc:
        raise FormatError("frames", "frames must be a non-empty list")
    for i, f in enumerate(frames_doc):
        if not isinstance(f, list) or len(f) != PIN_COUNT:
            raise FormatError("frames", f"frame {i} must have {PIN_COUNT} entries")

    try:
        rate = float(doc["frame_rate_hz"])
        rec = PatternRecording(
            name=str(doc["name"]),
            created_utc=str(doc["created_utc"]),
            display_profile=profile,
            frames=frames_from_floats(frames_doc),
            frame_rate_hz=rate,
            annotations={str(k): str(v) for k, v in dict(doc.get("annotations") or {}).items()},
        )
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError("field", f"invalid recording field: {e}") from e
    return rec


def save_recording_file(rec: PatternRecording, path: str | Path) -> None:
    Path(path).write_text(json.dumps(recording_to_dict(rec), indent=1), encoding="utf-8")


def load_recording_file(path: str | Path) -> PatternRecording:
    p = Path(path)
    if not p.is_file():
        raise NotFound(f"pattern file {p} does not exist")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError("json", f"{p}: {e}") from e
    return recording_from_dict(doc)


def export_csv(rec: PatternRecording) -> str:
    """Delimited dump: header t_ms,p0..p24, one row per frame, mm values."""
    return frames_csv(rec.pin_frames())


def frames_csv(frames) -> str:
    """Same schema for any timestamped frame sequence (e.g. a sim trace)."""
    lines = ["t_ms," + ",".join(f"p{i}" for i in range(PIN_COUNT))]
    for frame in frames:
        lines.append(_num(frame.t_ms) + "," + ",".join(_num(h) for h in frame.heights_mm))
    return "\n".join(lines) + "\n"


def _num(v: float) -> str:
    """Shortest float text that round-trips (0.1 stays '0.1')."""
    return repr(float(v))


# --------------------------------------------------------------------------
# Library


@dataclass(frozen=True)
class LibraryEntry:
    id: str
    name: str
    created_utc: str
    frame_count: int
    profile_id: str


class PatternLibrary:
    """Directory of .skp.json files with a cached index."""

    SUFFIX = ".skp.json"

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._index: dict[str, LibraryEntry] = {}
        self.rescan()

    def _path(self, pattern_id: str) -> Path:
        return self.root / f"{pattern_id}{self.SUFFIX}"

    def rescan(self) -> None:
        self._index = {}
        for path in sorted(self.root.glob(f"*{self.SUFFIX}")):
            pattern_id = path.name[: -len(self.SUFFIX)]
            try:
                rec = load_recording_file(path)
            except FormatError:
                continue  # foreign or corrupt file: not part of the library
            self._index[pattern_id] = _entry(pattern_id, rec)

    def new_id(self) -> str:
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
        while True:
            pattern_id = f"{stamp}-{secrets.token_hex(3)}"
            if pattern_id not in self._index:
                return pattern_id

    def save(self, rec: PatternRecording) -> str:
        pattern_id = self.new_id()
        save_recording_file(rec, self._path(pattern_id))
        self._index[pattern_id] = _entry(pattern_id, rec)
        return pattern_id

    def load(self, pattern_id: str) -> PatternRecording:
        if pattern_id not in self._index:
            raise NotFound(f"pattern {pattern_id!r} not in library")
        return load_recording_file(self._path(pattern_id))

    def delete(self, pattern_id: str) -> None:
        if pattern_id not in self._index:
            raise NotFound(f"pattern {pattern_id!r} not in library")
        self._path(pattern_id).unlink()
        del self._index[pattern_id]

    def index(self) -> list[LibraryEntry]:
        return sorted(self._index.values(), key=lambda e: e.id)

    def __contains__(self, pattern_id: str) -> bool:
        return pattern_id in self._index

    def __len__(self) -> int:
        return len(self._index)


def _entry(pattern_id: str, rec: PatternRecording) -> LibraryEntry:
    return LibraryEntry(
        id=pattern_id,
        name=rec.name,
        created_utc=rec.created_utc,
        frame_count=rec.frame_count,
        profile_id=rec.display_profile.id,
    )
