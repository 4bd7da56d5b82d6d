import argparse
import json

import numpy as np
import pytest

from shapekit.cli import Duration, main, parse_duration
from shapekit.store import load_recording_file
from tests.conftest import wave_frames


def run(argv):
    return main([str(a) for a in argv])


def simulate(tmp_path, name="src.skp.json", extra=()):
    path = tmp_path / name
    assert run(["simulate", "--scenario", "wave", "--duration", "90f", "-o", path, *extra]) == 0
    return path


class TestParseDuration:
    def test_units(self):
        assert parse_duration("90f") == Duration(frames=90)
        assert parse_duration("3s") == Duration(ms=3000.0)
        assert parse_duration("1500ms") == Duration(ms=1500.0)
        assert parse_duration("2.5s") == Duration(ms=2500.0)
        assert parse_duration(" 10S ") == Duration(ms=10000.0)

    @pytest.mark.parametrize("bad", ["90", "3sec", "", "f", "ms", "1.5f", "s3"])
    def test_suffix_required(self, bad):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_duration(bad)

    def test_conversions(self):
        assert Duration(frames=90).to_ms(30.0) == 3000.0
        assert Duration(frames=90).to_frames(30.0) == 90
        assert Duration(ms=1000.0).to_frames(30.0) == 30
        assert Duration(ms=1000.0).to_ms(30.0) == 1000.0


class TestUsageErrors:
    @pytest.mark.parametrize(
        "argv",
        [[], ["warp"], ["simulate"], ["play"], ["tune", "x.skp.json"], ["export", "x"]],
    )
    def test_usage_exits_two(self, argv):
        with pytest.raises(SystemExit) as e:
            run(argv)
        assert e.value.code == 2

    def test_runtime_error_exits_one_with_token(self, tmp_path, capsys):
        assert run(["play", tmp_path / "missing.skp.json", "--no-wait"]) == 1
        assert capsys.readouterr().err.startswith("NotFound:")


class TestSimulate:
    def test_wave_ninety_frames(self, tmp_path, capsys):
        path = simulate(tmp_path)
        out = capsys.readouterr().out
        assert "90 frames" in out
        rec = load_recording_file(path)
        assert rec.frame_count == 90
        assert rec.name == "src"  # stem minus .skp
        assert rec.annotations["generator"] == "scenario:wave"
        # direct generation matches the ground-truth oracle bit-exactly
        assert rec.frames == tuple(wave_frames(90))

    def test_duration_in_seconds(self, tmp_path):
        path = tmp_path / "u.skp.json"
        assert run(["simulate", "--scenario", "uniform", "--duration", "1s", "-o", path]) == 0
        assert load_recording_file(path).frame_count == 30

    def test_named_output(self, tmp_path):
        path = tmp_path / "x.skp.json"
        run(["simulate", "-o", path, "--name", "my pattern", "--duration", "30f"])
        assert load_recording_file(path).name == "my pattern"


class TestTrack:
    def test_synth_source_close_to_truth(self, tmp_path, capsys):
        path = tmp_path / "tracked.skp.json"
        assert run(["track", "--source", "synth:wave", "--duration", "90f", "-o", path]) == 0
        rec = load_recording_file(path)
        assert rec.frame_count == 90
        truth = wave_frames(90)
        worst = max(
            abs(h - t) for fr, tf in zip(rec.frames, truth) for h, t in zip(fr, tf)
        )
        assert worst <= 0.1  # noiseless pipeline recovers ground truth

    def test_dir_source_requires_baseline_flag(self, tmp_path, capsys):
        assert run(["track", "--source", f"dir:{tmp_path}", "-o", tmp_path / "o.json"]) == 1
        assert capsys.readouterr().err.startswith("ParamError:")

    def test_unknown_source_scheme(self, tmp_path, capsys):
        assert run(["track", "--source", "tarot:deck", "-o", tmp_path / "o.json"]) == 1
        assert capsys.readouterr().err.startswith("ParamError:")


class TestPlay:
    def test_sim_sink_full_run(self, tmp_path, capsys):
        path = simulate(tmp_path)
        assert run(["play", path, "--no-wait"]) == 0
        out = capsys.readouterr().out
        assert "frames_sent=90" in out
        assert "state=Finished" in out
        assert "max_lateness_ms=0.00" in out

    def test_report_renders_csv_and_figure(self, tmp_path):
        path = simulate(tmp_path)
        report = tmp_path / "report.csv"
        assert run(["play", path, "--no-wait", "--report", report]) == 0
        assert report.is_file()
        header = report.read_text().splitlines()[0]
        assert "mean_commanded_mm" in header
        assert "rms_error_mm" in header  # sim sink provides achieved positions
        figure = tmp_path / "report.png"
        assert figure.is_file() and figure.stat().st_size > 0

    def test_ideal_sink_report(self, tmp_path):
        path = simulate(tmp_path)
        report = tmp_path / "ideal.csv"
        assert run(["play", path, "--no-wait", "--sink", "ideal", "--report", report]) == 0
        assert report.is_file() and (tmp_path / "ideal.png").is_file()

    def test_tuned_play_frame_count(self, tmp_path, capsys):
        path = simulate(tmp_path)
        assert run(["play", path, "--no-wait", "--speed", "2.0"]) == 0
        assert "frames_sent=46" in capsys.readouterr().out


class TestTune:
    def test_identity_round_trip(self, tmp_path):
        src = simulate(tmp_path)
        dst = tmp_path / "same.skp.json"
        assert run(["tune", src, "--gain", "1", "--speed", "1", "-o", dst]) == 0
        assert load_recording_file(dst) == load_recording_file(src)

    def test_speed_two(self, tmp_path, capsys):
        src = simulate(tmp_path)
        dst = tmp_path / "fast.skp.json"
        assert run(["tune", src, "--speed", "2.0", "-o", dst]) == 0
        assert "46 frames" in capsys.readouterr().out
        assert load_recording_file(dst).frame_count == 46

    def test_bad_gain_exits_one(self, tmp_path, capsys):
        src = simulate(tmp_path)
        assert run(["tune", src, "--gain", "-1", "-o", tmp_path / "x.json"]) == 1
        assert capsys.readouterr().err.startswith("ParamError:")


class TestExport:
    def test_csv_shape(self, tmp_path):
        src = simulate(tmp_path)
        out = tmp_path / "dump.csv"
        assert run(["export", src, "--csv", out]) == 0
        lines = out.read_text(encoding="utf-8").strip().split("\n")
        assert len(lines) == 91
        assert lines[0] == "t_ms," + ",".join(f"p{i}" for i in range(25))


class TestForce:
    def test_two_takes_csv_and_figure(self, tmp_path, capsys):
        detached = simulate(tmp_path, "detached.skp.json")
        attached = tmp_path / "attached.skp.json"
        assert run(["tune", detached, "--gain", "0.6", "-o", attached]) == 0
        out = tmp_path / "force.csv"
        assert (
            run(["force", "--detached", detached, "--attached", attached, "-o", out]) == 0
        )
        captured = capsys.readouterr()
        assert "lag_ms=0.0" in captured.out
        assert captured.err == ""  # confidently aligned: no warning
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("# contact force is approximate")
        assert (tmp_path / "force.png").is_file()

    def test_uncorrelated_takes_warn(self, tmp_path, capsys):
        rng = np.random.default_rng(30)
        for name in ("a", "b"):
            frames = [
                [float(v) for v in row] for row in rng.uniform(0, 10, size=(120, 25))
            ]
            doc = json.loads((simulate(tmp_path, f"{name}.skp.json")).read_text())
            doc["frames"] = frames
            (tmp_path / f"{name}.skp.json").write_text(json.dumps(doc))
        capsys.readouterr()
        assert (
            run(
                [
                    "force",
                    "--detached",
                    tmp_path / "a.skp.json",
                    "--attached",
                    tmp_path / "b.skp.json",
                    "-o",
                    tmp_path / "f.csv",
                ]
            )
            == 0
        )
        assert "low-confidence" in capsys.readouterr().err
