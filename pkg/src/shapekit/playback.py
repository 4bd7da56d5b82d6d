"""Tuning transforms and clocked replay into a device sink.

Height and speed tuning are pure functions on recordings. Speed change
resamples onto the recording's own frame grid (device sinks run at a fixed
cadence), with linear interpolation between source frames; exact-integer
source positions pass the original frame through untouched so that
factor 1.0 is a bit-exact identity.

Replay schedules each frame at the absolute deadline t0 + i/rate rather
than sleeping a relative interval per frame, so timing error never
accumulates. Stop is a cross-context signal checked at every frame
boundary.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, replace

from shapekit.clocks import Clock
from shapekit.core import PatternRecording, PinFrame, TuningParams, clamp_height
from shapekit.device import DeviceSink, frame_from_heights
from shapekit.errors import ParamError, ShapeKitError, SinkError, StateError

READY = "Ready"
PLAYING = "Playing"
STOPPED = "Stopped"
FINISHED = "Finished"


def tune_height(recording: PatternRecording, gain: float) -> PatternRecording:
    """Scale every height by gain, clamped to [0, stroke]."""
    if gain < 0:
        raise ParamError(f"gain must be >= 0, got {gain}")
    profile = recording.display_profile
    frames = tuple(
        tuple(clamp_height(h * gain, profile) for h in frame) for frame in recording.frames
    )
    return replace(recording, frames=frames)


def tune_speed(recording: PatternRecording, factor: float) -> PatternRecording:
    """Change motion speed by resampling onto the same frame-rate grid.

    Output frame j reads source position j*factor; fractional positions
    interpolate linearly, integer positions copy the source frame. First
    and last frames are always preserved exactly.
    """
    if factor <= 0:
        raise ParamError(f"speed factor must be > 0, got {factor}")
    src = recording.frames
    n = len(src)
    if n <= 1:
        return recording
    # Output count: rounding the stretched span up keeps the last frame.
    out_count = math.ceil((n - 1) / factor - 1e-9) + 1
    frames = []
    for j in range(out_count):
        if j == out_count - 1:
            frames.append(src[-1])
            continue
        pos = j * factor
        i0 = int(pos)
        w = pos - i0
        if w == 0.0:
            frames.append(src[i0])
        else:
            a, b = src[i0], src[i0 + 1]
            frames.append(tuple(a[k] + w * (b[k] - a[k]) for k in range(len(a))))
    return replace(recording, frames=tuple(frames))


def apply_tuning(recording: PatternRecording, tuning: TuningParams) -> PatternRecording:
    """Speed first, then gain: the height clamp runs last so the result is
    always within stroke."""
    out = tune_speed(recording, tuning.speed_factor)
    return tune_height(out, tuning.height_gain)


@dataclass
class PlaybackReport:
    frames_sent: int
    max_lateness_ms: float
    loops_completed: int
    state: str
    aborted: bool = False
    cause: str | None = None


class PlaybackJob:
    """One replay of a recording into a sink, stoppable from any thread."""

    def __init__(
        self,
        recording: PatternRecording,
        sink: DeviceSink,
        tuning: TuningParams | None = None,
        loop: bool = False,
    ):
        self.recording = recording
        self.sink = sink
        self.tuning = tuning or TuningParams()
        self.loop = loop
        self.state = READY
        self._stop = threading.Event()

    def stop(self) -> None:
        self._stop.set()

    @property
    def stop_requested(self) -> bool:
        return self._stop.is_set()


def play(job: PlaybackJob, clock: Clock, on_frame=None) -> PlaybackReport:
    """Drive the job to completion against the given clock.

    Each frame i has the absolute deadline t0 + i * interval. on_frame, if
    given, receives the commanded PinFrame after each sink write (the live
    view hook). Sink failure aborts with the cause recorded.
    """
    if job.state != READY:
        raise StateError(f"job is {job.state}, expected {READY}")
    if not job.sink.is_open:
        raise SinkError("sink is closed")
    if not job.sink.try_acquire(job):
        raise StateError("sink is owned by another playing job")

    tuned = apply_tuning(job.recording, job.tuning)
    interval = tuned.frame_interval_ms
    profile = tuned.display_profile
    job.state = PLAYING

    sent = 0
    loops = 0
    max_late = 0.0
    aborted = False
    cause = None
    try:
        t0 = clock.now_ms()
        while True:
            for heights in tuned.frames:
                if job.stop_requested:
                    job.state = STOPPED
                    break
                deadline = t0 + sent * interval
                clock.wait_until(deadline)
                late = clock.now_ms() - deadline
                if late > max_late:
                    max_late = late
                try:
                    job.sink.write(frame_from_heights(heights, profile, seq=sent), interval)
                except ShapeKitError as e:
                    job.state = STOPPED
                    aborted = True
                    cause = f"{e.token()}: {e}"
                    break
                sent += 1
                if on_frame is not None:
                    on_frame(PinFrame(t_ms=deadline - t0, heights_mm=heights))
            else:
                loops += 1
                if not job.loop:
                    job.state = FINISHED
                    break
                continue
            break  # inner loop broke: stopped or aborted
    finally:
        job.sink.release(job)

    return PlaybackReport(
        frames_sent=sent,
        max_lateness_ms=max_late,
        loops_completed=loops,
        state=job.state,
        aborted=aborted,
        cause=cause,
    )
