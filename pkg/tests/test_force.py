import numpy as np
import pytest

from shapekit.core import PinFrame
from shapekit.errors import ParamError, ProfileError, TooShort
from shapekit.force import (
    CONTACT_MODEL_NOTE,
    ForceFrame,
    align_recordings,
    estimate_contact_force,
    export_force_csv,
    static_force,
)
from tests.conftest import make_recording, wave_frames

INTERVAL = 1000.0 / 30.0


def delayed(rec, shift: int):
    """Copy of rec delayed by `shift` frames (negative = advanced),
    padding with the rest frame at the cut end."""
    frames = rec.frames
    if shift >= 0:
        out = (frames[0],) * shift + frames
    else:
        out = frames[-shift:] + (frames[-1],) * (-shift)
    return make_recording(out, profile=rec.display_profile, name=rec.name)


class TestStaticForce:
    def test_spring_table_values(self, profile_m, profile_l):
        f = static_force(PinFrame(t_ms=0.0, heights_mm=(5.0,) * 25), profile_l)
        assert all(abs(v - 1.5) <= 1e-9 for v in f.spring_force_n)  # 0.3 N/mm * 5 mm
        f = static_force(PinFrame(t_ms=0.0, heights_mm=(10.0,) * 25), profile_m)
        assert all(abs(v - 1.0) <= 1e-9 for v in f.spring_force_n)  # 0.1 N/mm * 10 mm

    def test_rest_is_zero(self, profile_m):
        f = static_force(PinFrame.zero(), profile_m)
        assert f.spring_force_n == (0.0,) * 25
        assert f.contact_force_n is None

    def test_keeps_timestamp(self, profile_m):
        assert static_force(PinFrame.zero(t_ms=123.5), profile_m).t_ms == 123.5

    def test_linearity(self, profile_m):
        rng = np.random.default_rng(20)
        x = rng.uniform(0.0, 5.0, size=25)
        y = rng.uniform(0.0, 5.0, size=25)
        fx = static_force(PinFrame(t_ms=0, heights_mm=tuple(x)), profile_m).spring_force_n
        fy = static_force(PinFrame(t_ms=0, heights_mm=tuple(y)), profile_m).spring_force_n
        fsum = static_force(PinFrame(t_ms=0, heights_mm=tuple(x + y)), profile_m).spring_force_n
        fscaled = static_force(
            PinFrame(t_ms=0, heights_mm=tuple(1.7 * x)), profile_m
        ).spring_force_n
        assert all(abs(s - (a + b)) <= 1e-12 for s, a, b in zip(fsum, fx, fy))
        assert all(abs(s - 1.7 * a) <= 1e-12 for s, a in zip(fscaled, fx))

    def test_force_frame_validation(self):
        with pytest.raises(ParamError):
            ForceFrame(t_ms=0.0, spring_force_n=(0.0,) * 24)
        with pytest.raises(ParamError):
            ForceFrame(t_ms=0.0, spring_force_n=(0.0,) * 25, contact_force_n=(0.0,) * 3)


class TestAlignment:
    def test_identical_recordings(self):
        rec = make_recording(wave_frames(150, duration_ms=5000.0))
        result = align_recordings(rec, rec)
        assert result.lag_frames == 0 and result.lag_ms == 0.0
        assert result.peak_correlation > 0.999
        assert not result.low_confidence

    @pytest.mark.parametrize("shift", [1, 3, 10, 30, -1, -5, -30])
    def test_recovers_constructed_shift(self, shift):
        rec = make_recording(wave_frames(150, duration_ms=5000.0))
        result = align_recordings(rec, delayed(rec, shift))
        assert result.lag_frames == shift
        assert result.lag_ms == pytest.approx(shift * INTERVAL)
        assert not result.low_confidence

    def test_ten_frame_lag_is_333_ms(self):
        rec = make_recording(wave_frames(150, duration_ms=5000.0))
        result = align_recordings(rec, delayed(rec, 10))
        assert result.lag_ms == pytest.approx(1000.0 / 3.0)
        assert result.peak_correlation > 0.999

    def test_too_short(self):
        ok = make_recording(wave_frames(10))
        short = make_recording(wave_frames(9))
        with pytest.raises(TooShort):
            align_recordings(short, ok)
        with pytest.raises(TooShort):
            align_recordings(ok, short)
        assert align_recordings(ok, ok).lag_frames == 0

    def test_profile_and_rate_gates(self, profile_m, profile_l):
        a = make_recording(wave_frames(30), profile=profile_m)
        b = make_recording(wave_frames(30), profile=profile_l)
        with pytest.raises(ProfileError):
            align_recordings(a, b)
        c = make_recording(wave_frames(30), profile=profile_m, rate=60.0)
        with pytest.raises(ParamError):
            align_recordings(a, c)

    def test_uncorrelated_noise_flags_low_confidence(self):
        rng = np.random.default_rng(21)
        a = make_recording(rng.uniform(0, 10, size=(120, 25)))
        b = make_recording(rng.uniform(0, 10, size=(120, 25)))
        result = align_recordings(a, b)
        assert result.low_confidence
        assert result.peak_correlation < 0.5

    def test_featureless_recordings_tie_to_zero_lag(self):
        flat = make_recording([[4.0] * 25] * 40)
        result = align_recordings(flat, flat)
        assert result.lag_frames == 0
        assert result.low_confidence  # zero variance carries no evidence


class TestContactForce:
    def test_identical_takes_zero_contact(self):
        rec = make_recording(wave_frames(60))
        frames, alignment = estimate_contact_force(rec, rec, rec.display_profile)
        assert len(frames) == 60
        assert alignment.lag_frames == 0
        for f in frames:
            assert f.contact_force_n == (0.0,) * 25
            assert f.clamped_pins == ()

    def test_three_mm_shortfall_at_point_three(self, profile_l):
        detached = make_recording([[8.0] * 25] * 30, profile=profile_l)
        attached = make_recording([[5.0] * 25] * 30, profile=profile_l)
        frames, alignment = estimate_contact_force(detached, attached, profile_l)
        assert alignment.lag_frames == 0  # featureless: ties resolve to 0
        assert len(frames) == 30
        for f in frames:
            assert all(abs(c - 0.9) <= 1e-9 for c in f.contact_force_n)
            assert all(abs(s - 1.5) <= 1e-9 for s in f.spring_force_n)  # attached take
            assert f.clamped_pins == ()

    def test_overshoot_clamps_and_flags(self, profile_l):
        detached = make_recording([[5.0] * 25] * 30, profile=profile_l)
        attached = make_recording([[8.0] * 25] * 30, profile=profile_l)
        frames, _ = estimate_contact_force(detached, attached, profile_l)
        for f in frames:
            assert f.contact_force_n == (0.0,) * 25
            assert f.clamped_pins == tuple(range(25))

    def test_lagged_takes_overlap_shrinks(self, profile_m):
        rec = make_recording(wave_frames(150, duration_ms=5000.0))
        frames, alignment = estimate_contact_force(rec, delayed(rec, 10), profile_m)
        assert alignment.lag_frames == 10
        assert len(frames) == 150  # delayed copy is longer, full overlap
        frames, alignment = estimate_contact_force(delayed(rec, 10), rec, profile_m)
        assert alignment.lag_frames == -10
        assert len(frames) == 150
        # contact stays ~zero: same take, only shifted
        worst = max(c for fr in frames for c in fr.contact_force_n)
        assert worst <= 1e-9

    def test_profile_gate(self, profile_m, profile_l):
        rec = make_recording(wave_frames(30), profile=profile_m)
        with pytest.raises(ProfileError):
            estimate_contact_force(rec, rec, profile_l)

    def test_timestamps_come_from_detached_grid(self, profile_m):
        rec = make_recording(wave_frames(30))
        frames, _ = estimate_contact_force(rec, rec, profile_m)
        assert frames[0].t_ms == 0.0
        assert frames[1].t_ms == pytest.approx(INTERVAL)


class TestForceCsv:
    def test_static_only_schema(self, profile_m):
        frames = [static_force(PinFrame.zero(t_ms=i * INTERVAL), profile_m) for i in range(3)]
        text = export_force_csv(frames)
        lines = text.strip().split("\n")
        assert lines[0] == "t_ms," + ",".join(f"f{i}" for i in range(25))
        assert len(lines) == 4
        assert "#" not in text

    def test_contact_schema_carries_model_note(self, profile_l):
        detached = make_recording([[8.0] * 25] * 12, profile=profile_l)
        attached = make_recording([[5.0] * 25] * 12, profile=profile_l)
        frames, _ = estimate_contact_force(detached, attached, profile_l)
        lines = export_force_csv(frames).strip().split("\n")
        assert lines[0] == f"# {CONTACT_MODEL_NOTE}"
        assert lines[1].endswith(",c23,c24")
        assert lines[1].count(",") == 50
        row = lines[2].split(",")
        assert float(row[1]) == pytest.approx(1.5)  # spring, attached take
        assert float(row[26]) == pytest.approx(0.9)  # contact
