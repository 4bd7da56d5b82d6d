"""Command-line front door.

Every command is a thin composition of library calls; no logic lives only
here. Errors print to stderr as "<ErrorToken>: message" with exit code 1;
usage problems exit 2 (argparse); success exits 0.

Durations are suffixed to avoid unit ambiguity: "90f" frames, "3s"
seconds, "1500ms" milliseconds.
"""

from __future__ import annotations

import argparse
import signal
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from shapekit.clocks import RealClock, SimClock
from shapekit.core import (
    DEFAULT_FRAME_RATE_HZ,
    DisplayProfile,
    PatternRecording,
    PinFrame,
    TuningParams,
)
from shapekit.errors import ParamError, ShapeKitError
from shapekit.synth import SCENARIO_KINDS, CameraModel, TrajectoryScenario, truth_at


@dataclass(frozen=True)
class Duration:
    """A CLI duration: either a frame count or a time span."""

    frames: int | None = None
    ms: float | None = None

    def to_ms(self, rate_hz: float) -> float:
        if self.ms is not None:
            return self.ms
        return self.frames * 1000.0 / rate_hz

    def to_frames(self, rate_hz: float) -> int:
        if self.frames is not None:
            return self.frames
        return int(round(self.ms * rate_hz / 1000.0))


def parse_duration(text: str) -> Duration:
    t = text.strip().lower()
    try:
        if t.endswith("ms"):
            return Duration(ms=float(t[:-2]))
        if t.endswith("s"):
            return Duration(ms=float(t[:-1]) * 1000.0)
        if t.endswith("f"):
            return Duration(frames=int(t[:-1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(
        f"bad duration {text!r}: use a number with suffix f, s, or ms (e.g. 90f, 3s, 1500ms)"
    )


def _scenario_kind(name: str) -> str:
    kind = "random_walk" if name == "random" else name
    if kind not in SCENARIO_KINDS:
        raise ParamError(f"unknown scenario {name!r}")
    return kind


def _build_scenario(args, duration_ms: float) -> TrajectoryScenario:
    return TrajectoryScenario(
        kind=_scenario_kind(args.scenario),
        duration_ms=duration_ms,
        amplitude_mm=args.amplitude,
        period_ms=args.period,
        seed=args.seed,
    )


def _now_utc() -> str:
    return datetime.now(timezone.utc).isoformat()


# --------------------------------------------------------------------------
# Commands


def cmd_simulate(args) -> int:
    from shapekit.store import save_recording_file

    profile = DisplayProfile.from_id(args.profile)
    rate = args.rate
    frames = args.duration.to_frames(rate)
    if frames < 1:
        raise ParamError("duration must cover at least one frame")
    # i * interval, not i*1000/rate: matches frame_time_ms bit-exactly
    interval = 1000.0 / rate
    scenario = _build_scenario(args, duration_ms=frames * interval)
    heights = tuple(truth_at(scenario, i * interval, profile).heights_mm for i in range(frames))
    rec = PatternRecording(
        name=args.name or Path(args.output).stem.removesuffix(".skp"),
        created_utc=_now_utc(),
        display_profile=profile,
        frames=heights,
        frame_rate_hz=rate,
        annotations={"generator": f"scenario:{scenario.kind}"},
    )
    save_recording_file(rec, args.output)
    print(f"wrote {args.output}: {rec.frame_count} frames at {rate:g} Hz")
    return 0


def cmd_track(args) -> int:
    from shapekit.store import build_recording, save_recording_file
    from shapekit.tracker import (
        DirectoryFrameSource,
        ScenarioFrameSource,
        TrackerConfig,
        calibrate_baseline,
        run_pipeline,
    )

    profile = DisplayProfile.from_id(args.profile)
    rate = args.rate
    scheme, _, rest = args.source.partition(":")
    if scheme == "synth":
        duration_ms = args.duration.to_ms(rate)
        scenario = TrajectoryScenario(
            kind=_scenario_kind(rest or "wave"),
            duration_ms=duration_ms,
            amplitude_mm=args.amplitude,
            period_ms=args.period,
            seed=args.seed,
        )
        cam = CameraModel(noise_sigma_px=args.noise, seed=args.seed)
        source = ScenarioFrameSource(scenario, cam, profile, rate_hz=rate)
        config = TrackerConfig.from_camera(cam)
        baseline_image = source.calibration_image()
        frames_iter = iter(source)
    elif scheme == "dir":
        if not rest:
            raise ParamError("dir source needs a path: dir:<path>")
        if not args.calibrate_first:
            raise ParamError("directory sources need --calibrate-first (frame 0 is the baseline)")
        source = DirectoryFrameSource(rest, rate_hz=rate)
        config = TrackerConfig.from_camera(CameraModel())
        baseline_image = source.calibration_image()
        all_frames = list(source)
        frames_iter = iter(all_frames[1:])  # frame 0 was consumed as baseline
    else:
        raise ParamError(f"unknown source {args.source!r}; use synth:<scenario> or dir:<path>")

    calibration = calibrate_baseline(baseline_image, config)
    captured: list[PinFrame] = []
    report = run_pipeline(frames_iter, calibration, config, profile, captured.append)
    if not captured:
        raise ParamError("source produced no trackable frames")
    rec = build_recording(
        captured,
        name=args.name or Path(args.output).stem.removesuffix(".skp"),
        profile=profile,
        frame_rate_hz=rate,
        annotations={"source": args.source},
    )
    save_recording_file(rec, args.output)
    print(
        f"wrote {args.output}: {rec.frame_count} frames "
        f"(tracked {report.frames_emitted}, holds {report.lanes_recovered})"
    )
    return 0


def cmd_play(args) -> int:
    from shapekit.device import SimulatedDisplaySink, IdealRecorderSink, open_sink
    from shapekit.device import position_byte_to_height
    from shapekit.playback import PlaybackJob, apply_tuning, play
    from shapekit.store import load_recording_file

    rec = load_recording_file(args.file)
    tuning = _tuning(args)
    sink = open_sink(args.sink, rec.display_profile)
    job = PlaybackJob(rec, sink, tuning, loop=args.loop)

    previous = signal.signal(signal.SIGINT, lambda *_: job.stop())
    try:
        clock = SimClock() if args.no_wait else RealClock()
        report = play(job, clock)
    finally:
        signal.signal(signal.SIGINT, previous)
        sink.close()

    print(
        f"frames_sent={report.frames_sent} max_lateness_ms={report.max_lateness_ms:.2f} "
        f"loops={report.loops_completed} state={report.state}"
    )
    if report.aborted:
        print(f"aborted: {report.cause}", file=sys.stderr)
        return 1

    if args.report:
        from shapekit.reports import write_playback_report

        tuned = apply_tuning(rec, tuning)
        if isinstance(sink, SimulatedDisplaySink):
            achieved = sink.trace
        elif isinstance(sink, IdealRecorderSink):
            achieved = [
                PinFrame(
                    t_ms=i * tuned.frame_interval_ms,
                    heights_mm=tuple(
                        position_byte_to_height(p, tuned.display_profile)
                        for p in f.positions
                    ),
                )
                for i, f in enumerate(sink.trace)
            ]
        else:
            achieved = None
        csv_path, figure_path = write_playback_report(args.report, tuned, achieved)
        print(f"report: {csv_path} and {figure_path}")
    return 0


def cmd_tune(args) -> int:
    from shapekit.playback import apply_tuning
    from shapekit.store import load_recording_file, save_recording_file

    rec = load_recording_file(args.file)
    out = apply_tuning(rec, _tuning(args))
    save_recording_file(out, args.output)
    print(f"wrote {args.output}: {out.frame_count} frames")
    return 0


def cmd_export(args) -> int:
    from shapekit.store import export_csv, load_recording_file

    rec = load_recording_file(args.file)
    Path(args.csv).write_text(export_csv(rec), encoding="utf-8")
    print(f"wrote {args.csv}: {rec.frame_count + 1} lines")
    return 0


def cmd_force(args) -> int:
    from shapekit.force import estimate_contact_force, export_force_csv
    from shapekit.reports import write_force_report
    from shapekit.store import load_recording_file

    detached = load_recording_file(args.detached)
    attached = load_recording_file(args.attached)
    frames, alignment = estimate_contact_force(detached, attached, detached.display_profile)
    csv_path, figure_path = write_force_report(args.output, export_force_csv(frames), frames)
    print(
        f"wrote {csv_path} and {figure_path}: {len(frames)} frames, "
        f"lag_ms={alignment.lag_ms:.1f} peak={alignment.peak_correlation:.3f}"
    )
    if alignment.low_confidence:
        print("warning: low-confidence alignment (peak correlation < 0.5)", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from shapekit.service import create_app

    app = create_app(args.library, DisplayProfile.from_id(args.profile))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _tuning(args) -> TuningParams:
    try:
        return TuningParams(height_gain=args.gain, speed_factor=args.speed)
    except ValueError as e:
        raise ParamError(str(e)) from e


# --------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapekit",
        description="Record, tune, play back, and analyze 5x5 pin-display touch patterns.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scenario_flags(p):
        p.add_argument("--amplitude", type=float, default=5.0, help="scenario amplitude (mm)")
        p.add_argument("--period", type=float, default=2000.0, help="scenario period (ms)")
        p.add_argument("--seed", type=int, default=0, help="deterministic seed")

    def add_tuning_flags(p):
        p.add_argument("--gain", type=float, default=1.0, help="height gain (>= 0)")
        p.add_argument("--speed", type=float, default=1.0, help="speed factor (> 0)")

    p = sub.add_parser("simulate", help="generate a ground-truth recording directly")
    p.add_argument("--scenario", default="wave",
                   choices=["wave", "sequential", "uniform", "random", "constant"])
    p.add_argument("--duration", type=parse_duration, default=Duration(ms=3000.0),
                   help="e.g. 90f, 3s, 1500ms")
    p.add_argument("-o", "--output", required=True, help="output pattern file (.skp.json)")
    p.add_argument("--profile", default="M", choices=["S", "M", "L"])
    p.add_argument("--rate", type=float, default=DEFAULT_FRAME_RATE_HZ)
    p.add_argument("--name", default=None)
    add_scenario_flags(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("track", help="run the camera pipeline into a pattern file")
    p.add_argument("--source", required=True, help="synth:<scenario> or dir:<path>")
    p.add_argument("--calibrate-first", action="store_true",
                   help="use the first frame as the rest baseline")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--duration", type=parse_duration, default=Duration(ms=3000.0))
    p.add_argument("--noise", type=float, default=0.0, help="synthetic noise sigma (px)")
    p.add_argument("--profile", default="M", choices=["S", "M", "L"])
    p.add_argument("--rate", type=float, default=DEFAULT_FRAME_RATE_HZ)
    p.add_argument("--name", default=None)
    add_scenario_flags(p)
    p.set_defaults(fn=cmd_track)

    p = sub.add_parser("play", help="replay a pattern into a device sink")
    p.add_argument("file")
    add_tuning_flags(p)
    p.add_argument("--sink", default="sim", help="sim, ideal, or serial:<path>")
    p.add_argument("--loop", action="store_true")
    p.add_argument("--report", default=None, metavar="CSV",
                   help="write a playback report CSV plus a PNG figure")
    p.add_argument("--no-wait", action="store_true",
                   help="run against a simulated clock (as fast as possible)")
    p.set_defaults(fn=cmd_play)

    p = sub.add_parser("tune", help="apply gain/speed tuning to a pattern file")
    p.add_argument("file")
    add_tuning_flags(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_tune)

    p = sub.add_parser("export", help="dump a pattern as CSV")
    p.add_argument("file")
    p.add_argument("--csv", required=True)
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("force", help="estimate contact force from two takes")
    p.add_argument("--detached", required=True, help="free-running take (.skp.json)")
    p.add_argument("--attached", required=True, help="skin-contact take (.skp.json)")
    p.add_argument("-o", "--output", required=True, help="output CSV (figure written alongside)")
    p.set_defaults(fn=cmd_force)

    p = sub.add_parser("serve", help="run the HTTP/WebSocket service")
    p.add_argument("--port", type=int, default=7341)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--library", default="patterns", help="pattern library directory")
    p.add_argument("--profile", default="M", choices=["S", "M", "L"])
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ShapeKitError as e:
        print(f"{e.token()}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
