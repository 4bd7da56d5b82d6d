"""Force estimation from pin heights.

Static force is Hooke's law per pin: the display's springs compress
linearly, so F = k * h with k from the display profile.

Contact force compares two takes of the same crafted pattern, one with the
output pins touching skin ("attached") and one free-running ("detached").
Under the equal-input-effort assumption (the crafter pushes identically in
both takes), skin resistance shows up as the attached pin falling short of
the detached one, and the shortfall maps through the spring constant:

    F_contact[i](t) = k * max(0, x_detached[i](t) - x_attached[i](t))

This is an approximation by construction; every export labels it so.
Negative shortfalls (skin dragging the pin further out than the free run)
are clamped to zero and flagged per pin instead of erroring, because two
human takes never match exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from shapekit.core import PIN_COUNT, DisplayProfile, PatternRecording, PinFrame
from shapekit.errors import ParamError, ProfileError, TooShort

MAX_LAG_MS = 2000.0
MIN_ALIGN_FRAMES = 10
LOW_CONFIDENCE_PEAK = 0.5
CONTACT_MODEL_NOTE = "contact force is approximate: equal-input-effort model"


@dataclass(frozen=True)
class ForceFrame:
    """Per-pin forces at one instant; contact columns only exist for
    attached/detached analysis."""

    t_ms: float
    spring_force_n: tuple[float, ...]
    contact_force_n: tuple[float, ...] | None = None
    clamped_pins: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.spring_force_n) != PIN_COUNT:
            raise ParamError(f"expected {PIN_COUNT} spring forces")
        if self.contact_force_n is not None and len(self.contact_force_n) != PIN_COUNT:
            raise ParamError(f"expected {PIN_COUNT} contact forces")


def static_force(frame: PinFrame, profile: DisplayProfile) -> ForceFrame:
    k = profile.spring_n_per_mm
    return ForceFrame(
        t_ms=frame.t_ms,
        spring_force_n=tuple(k * h for h in frame.heights_mm),
    )


@dataclass(frozen=True)
class AlignResult:
    lag_ms: float
    lag_frames: int
    peak_correlation: float
    low_confidence: bool


def _check_comparable(a: PatternRecording, b: PatternRecording):
    if a.display_profile != b.display_profile:
        raise ProfileError(
            f"display profiles differ: {a.display_profile.id} vs {b.display_profile.id}"
        )
    if a.frame_rate_hz != b.frame_rate_hz:
        raise ParamError(f"frame rates differ: {a.frame_rate_hz} vs {b.frame_rate_hz}")


def align_recordings(a: PatternRecording, b: PatternRecording) -> AlignResult:
    """Find the frame shift of b relative to a by normalized cross
    correlation of the mean-height signals, searched over +/- 2 s.

    Positive lag means b is delayed: b[i + lag] lines up with a[i]. Ties
    break toward the smallest |lag|. A peak below 0.5 flags the result as
    low confidence rather than failing; uncorrelated takes still get a
    best-effort answer.
    """
    _check_comparable(a, b)
    if a.frame_count < MIN_ALIGN_FRAMES or b.frame_count < MIN_ALIGN_FRAMES:
        raise TooShort(f"alignment needs at least {MIN_ALIGN_FRAMES} frames per recording")

    sig_a = np.asarray(a.frames, dtype=np.float64).mean(axis=1)
    sig_b = np.asarray(b.frames, dtype=np.float64).mean(axis=1)
    interval = a.frame_interval_ms
    max_shift = int(round(MAX_LAG_MS / interval))

    best_lag = 0
    best_corr = -np.inf
    for lag in sorted(range(-max_shift, max_shift + 1), key=lambda k: (abs(k), k)):
        lo_a = max(0, -lag)
        hi_a = min(len(sig_a), len(sig_b) - lag)
        # An overlap this short proves nothing (2 points always correlate
        # at exactly +/-1); lag 0 always survives since both inputs passed
        # the length gate above.
        if hi_a - lo_a < MIN_ALIGN_FRAMES:
            continue
        seg_a = sig_a[lo_a:hi_a]
        seg_b = sig_b[lo_a + lag : hi_a + lag]
        da = seg_a - seg_a.mean()
        db = seg_b - seg_b.mean()
        denom = np.sqrt((da * da).sum() * (db * db).sum())
        corr = float((da * db).sum() / denom) if denom > 0 else 0.0
        # Lags are visited smallest |lag| first, so requiring a real margin
        # (not fp roundoff: self-similar signals tie at 1.0 +/- 1e-16 across
        # many lags) resolves ties toward the smallest |lag|.
        if corr > best_corr + 1e-12:
            best_corr = corr
            best_lag = lag

    if not np.isfinite(best_corr):
        best_corr = 0.0
    return AlignResult(
        lag_ms=best_lag * interval,
        lag_frames=best_lag,
        peak_correlation=best_corr,
        low_confidence=best_corr < LOW_CONFIDENCE_PEAK,
    )


def estimate_contact_force(
    detached: PatternRecording,
    attached: PatternRecording,
    profile: DisplayProfile,
) -> tuple[list[ForceFrame], AlignResult]:
    """Contact-force sequence over the aligned overlap of the two takes."""
    if detached.display_profile != profile or attached.display_profile != profile:
        raise ProfileError("recordings were made with a different display profile")
    alignment = align_recordings(detached, attached)
    lag = alignment.lag_frames

    k = profile.spring_n_per_mm
    frames: list[ForceFrame] = []
    lo = max(0, -lag)
    hi = min(detached.frame_count, attached.frame_count - lag)
    for i in range(lo, hi):
        xd = detached.frames[i]
        xa = attached.frames[i + lag]
        contact = []
        clamped = []
        for pin in range(PIN_COUNT):
            raw = k * (xd[pin] - xa[pin])
            if raw < -1e-12:
                clamped.append(pin)
                raw = 0.0
            contact.append(max(0.0, raw))
        frames.append(
            ForceFrame(
                t_ms=detached.frame_time_ms(i),
                spring_force_n=tuple(k * h for h in xa),
                contact_force_n=tuple(contact),
                clamped_pins=tuple(clamped),
            )
        )
    return frames, alignment


def export_force_csv(frames: list[ForceFrame]) -> str:
    """t_ms, f0..f24 spring force (N), then c0..c24 contact force when
    present. Contact data always carries the approximation notice."""
    has_contact = any(f.contact_force_n is not None for f in frames)
    lines = []
    if has_contact:
        lines.append(f"# {CONTACT_MODEL_NOTE}")
    header = "t_ms," + ",".join(f"f{i}" for i in range(PIN_COUNT))
    if has_contact:
        header += "," + ",".join(f"c{i}" for i in range(PIN_COUNT))
    lines.append(header)
    for f in frames:
        row = repr(float(f.t_ms)) + "," + ",".join(repr(float(v)) for v in f.spring_force_n)
        if has_contact:
            contact = f.contact_force_n or (0.0,) * PIN_COUNT
            row += "," + ",".join(repr(float(v)) for v in contact)
        lines.append(row)
    return "\n".join(lines) + "\n"
