"""HTTP + WebSocket API around one capture session, the pattern library,
and playback.

Single-session server: one capture pipeline and at most one playback job
at a time, because the physical toolkit is a single instrument. Selecting
a source starts a fresh session epoch (state Idle, calibration void);
the per-epoch state machine is exactly the RecordingSession table.

Synthetic sources run in one of two modes. realtime=true streams frames
from a background thread at the nominal rate for live viewing; realtime
false ("burst") tracks the entire scenario synchronously inside
/record/start, which makes scripted captures deterministic and fast.

All heights are mm everywhere, matching the pattern files, so clients
never convert units.
"""

from __future__ import annotations

import asyncio
import threading
import time
from contextlib import asynccontextmanager
from typing import Any

from fastapi import FastAPI, WebSocket
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from shapekit import __version__
from shapekit.clocks import RealClock, SimClock
from shapekit.core import DisplayProfile, TuningParams
from shapekit.device import open_sink
from shapekit.errors import (
    CalibrationFailed,
    EmptyRecording,
    FormatError,
    NotFound,
    ParamError,
    RangeError,
    ShapeKitError,
    SinkError,
    StateError,
)
from shapekit.playback import PlaybackJob, play
from shapekit.store import RECORDING, PatternLibrary, RecordingSession, recording_to_dict
from shapekit.synth import SCENARIO_KINDS, CameraModel, TrajectoryScenario
from shapekit.tracker import (
    Broadcast,
    DirectoryFrameSource,
    CameraFrameSource,
    ScenarioFrameSource,
    TrackerConfig,
    calibrate_baseline,
    track_frame,
)

DEFAULT_PORT = 7341


class SourceRequest(BaseModel):
    kind: str
    params: dict[str, Any] = Field(default_factory=dict)


class RecordStopRequest(BaseModel):
    name: str = Field(min_length=1)
    annotations: dict[str, str] = Field(default_factory=dict)


class PlaybackStartRequest(BaseModel):
    id: str
    gain: float = 1.0
    speed: float = 1.0
    sink: str = "sim"
    loop: bool = False
    realtime: bool = True


class _StreamWorker(threading.Thread):
    """Realtime tracking loop: renders/reads source frames at the nominal
    rate, cycling the source forever, and fans the tracked frames out."""

    def __init__(self, controller: "ServiceController"):
        super().__init__(daemon=True, name="shapekit-live-stream")
        self.controller = controller
        self.stop_flag = threading.Event()

    def run(self):
        c = self.controller
        clock = RealClock()
        interval = 1000.0 / c.source.rate_hz
        t0 = clock.now_ms()
        sent = 0
        last_heights = None
        while not self.stop_flag.is_set():
            for _, image in c.source:
                if self.stop_flag.is_set():
                    return
                t_ms = sent * interval
                clock.wait_until(t0 + t_ms)
                try:
                    frame = track_frame(
                        image, c.calibration, c.tracker_config, c.profile, t_ms, last_heights
                    )
                except ShapeKitError:
                    continue  # a bad frame must not kill the live loop
                last_heights = frame.heights_mm
                c.session.push(frame)
                c.broadcast.publish((frame, "tracking"))
                sent += 1


class ServiceController:
    """Owns the session, library, broadcast channel, and playback job.
    Command endpoints serialize through self.lock."""

    def __init__(self, library_root, profile: DisplayProfile | None = None):
        self.profile = profile or DisplayProfile.from_id("M")
        self.library = PatternLibrary(library_root)
        self.session = RecordingSession()
        self.broadcast = Broadcast()
        self.lock = threading.RLock()
        self.started = time.monotonic()

        self.source = None
        self.source_desc: dict[str, Any] | None = None
        self.realtime = False
        self.calibration = None
        self.tracker_config: TrackerConfig | None = None
        self._worker: _StreamWorker | None = None

        self._job: PlaybackJob | None = None
        self._job_thread: threading.Thread | None = None
        self._job_counter = 0
        self.job_summary: dict[str, Any] | None = None

    # -- source & session ---------------------------------------------------

    def set_source(self, req: SourceRequest) -> dict:
        with self.lock:
            if self.session.state == RECORDING:
                raise StateError("cannot change source while Recording; stop first")
            self._stop_worker()
            params = dict(req.params)
            if req.kind == "synth":
                kind = params.pop("scenario", "wave")
                if kind == "random":
                    kind = "random_walk"
                if kind not in SCENARIO_KINDS:
                    raise ParamError(f"unknown scenario {kind!r}; one of {SCENARIO_KINDS}")
                self.realtime = bool(params.pop("realtime", False))
                cam = CameraModel(
                    noise_sigma_px=float(params.pop("noise_sigma_px", 0.0)),
                    seed=int(params.pop("seed", 0)),
                )
                allowed = {"duration_ms", "amplitude_mm", "period_ms", "step_ms",
                           "level_mm", "walk_sigma_mm"}
                bad = set(params) - allowed
                if bad:
                    raise ParamError(f"unknown scenario params {sorted(bad)}")
                scenario = TrajectoryScenario(kind=kind, **{k: float(v) for k, v in params.items()})
                self.source = ScenarioFrameSource(scenario, cam, self.profile)
                self.tracker_config = TrackerConfig.from_camera(cam)
            elif req.kind == "dir":
                path = params.get("path")
                if not path:
                    raise ParamError("dir source needs params.path")
                self.realtime = bool(params.get("realtime", False))
                self.source = DirectoryFrameSource(path)
                self.tracker_config = TrackerConfig.from_camera(CameraModel())
            elif req.kind == "camera":
                self.realtime = True
                self.source = CameraFrameSource(int(params.get("index", 0)))
                self.tracker_config = TrackerConfig.from_camera(CameraModel())
            else:
                raise ParamError(f"unknown source kind {req.kind!r}; one of synth, dir, camera")
            self.source_desc = {"kind": req.kind, "params": req.params}
            self.session = RecordingSession()  # new epoch: calibration void
            self.calibration = None
            return self.api_state()

    def sync(self) -> dict:
        with self.lock:
            if self.source is None:
                raise StateError("no source selected; POST /session/source first")
            self.session.begin_sync()
            self.calibration = calibrate_baseline(
                self.source.calibration_image(), self.tracker_config
            )
            self.session.attach_calibration(self.calibration)
            if self.realtime and self._worker is None:
                self._worker = _StreamWorker(self)
                self._worker.start()
            return self.api_state()

    def record_start(self) -> dict:
        with self.lock:
            self.session.start_recording()
            if not self.realtime:
                self._burst_capture()
            return self.api_state()

    def _burst_capture(self):
        last_heights = None
        for t_ms, image in self.source:
            frame = track_frame(
                image, self.calibration, self.tracker_config, self.profile, t_ms, last_heights
            )
            last_heights = frame.heights_mm
            self.session.push(frame)
            self.broadcast.publish((frame, "tracking"))

    def record_stop(self, req: RecordStopRequest) -> dict:
        with self.lock:
            rec = self.session.stop_recording(
                req.name,
                self.profile,
                frame_rate_hz=self.source.rate_hz,
                annotations=req.annotations,
            )
            pattern_id = self.library.save(rec)
            return {"id": pattern_id, "frame_count": rec.frame_count, **self.api_state()}

    # -- playback -------------------------------------------------------------

    def playback_start(self, req: PlaybackStartRequest) -> dict:
        with self.lock:
            if self._job_thread is not None and self._job_thread.is_alive():
                raise StateError("a playback job is already running; stop it first")
            rec = self.library.load(req.id)
            try:
                tuning = TuningParams(height_gain=req.gain, speed_factor=req.speed)
            except ValueError as e:
                raise ParamError(str(e)) from e
            sink = open_sink(req.sink, rec.display_profile)
            job = PlaybackJob(rec, sink, tuning, loop=req.loop)
            self._job_counter += 1
            job_id = f"job-{self._job_counter}"
            clock = RealClock() if req.realtime else SimClock()
            summary = {
                "id": job_id,
                "pattern_id": req.id,
                "state": job.state,
                "frames_sent": 0,
                "loop": req.loop,
            }
            self.job_summary = summary

            def on_frame(frame):
                summary["frames_sent"] += 1
                self.broadcast.publish((frame, "playback"))

            def runner():
                try:
                    report = play(job, clock, on_frame=on_frame)
                    summary.update(
                        state=report.state,
                        frames_sent=report.frames_sent,
                        max_lateness_ms=report.max_lateness_ms,
                        loops_completed=report.loops_completed,
                        aborted=report.aborted,
                        cause=report.cause,
                    )
                except ShapeKitError as e:
                    summary.update(state="Stopped", aborted=True, cause=f"{e.token()}: {e}")
                finally:
                    sink.close()

            self._job = job
            self._job_thread = threading.Thread(
                target=runner, daemon=True, name="shapekit-playback"
            )
            self._job_thread.start()
            if not req.realtime:
                self._job_thread.join()  # burst playback finishes immediately
            return dict(summary)

    def playback_stop(self) -> dict:
        with self.lock:
            if self._job is None:
                raise StateError("no playback job to stop")
            self._job.stop()
            thread = self._job_thread
        if thread is not None:
            thread.join(timeout=5.0)
        with self.lock:
            return dict(self.job_summary or {})

    # -- misc -----------------------------------------------------------------

    def api_state(self) -> dict:
        return {
            "state": self.session.state,
            "calibrated": self.calibration is not None,
            "source": self.source_desc,
            "live_subscribers": self.broadcast.subscriber_count,
            "playback": dict(self.job_summary) if self.job_summary else None,
        }

    def _stop_worker(self):
        if self._worker is not None:
            self._worker.stop_flag.set()
            self._worker.join(timeout=2.0)
            self._worker = None

    def shutdown(self):
        self._stop_worker()
        if self._job is not None:
            self._job.stop()
        if self._job_thread is not None:
            self._job_thread.join(timeout=5.0)


def create_app(library_root, profile: DisplayProfile | None = None) -> FastAPI:
    controller = ServiceController(library_root, profile)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        controller.shutdown()

    app = FastAPI(title="shapekit", version=__version__, lifespan=lifespan)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.controller = controller

    @app.exception_handler(ShapeKitError)
    async def domain_error(request, exc: ShapeKitError):
        if isinstance(exc, (StateError, EmptyRecording)):
            status = 409
        elif isinstance(exc, NotFound):
            status = 404
        elif isinstance(
            exc, (ParamError, SinkError, RangeError, FormatError, CalibrationFailed)
        ):
            status = 422
        else:
            status = 500
        return JSONResponse(
            status_code=status, content={"error": exc.token(), "detail": str(exc)}
        )

    @app.post("/session/source")
    async def session_source(req: SourceRequest):
        return controller.set_source(req)

    @app.post("/session/sync")
    async def session_sync():
        return controller.sync()

    @app.post("/session/record/start")
    async def record_start():
        return controller.record_start()

    @app.post("/session/record/stop")
    async def record_stop(req: RecordStopRequest):
        return controller.record_stop(req)

    @app.get("/session")
    async def session_state():
        return controller.api_state()

    @app.get("/patterns")
    async def patterns():
        return {
            "patterns": [
                {
                    "id": e.id,
                    "name": e.name,
                    "created_utc": e.created_utc,
                    "frame_count": e.frame_count,
                    "profile_id": e.profile_id,
                }
                for e in controller.library.index()
            ]
        }

    @app.get("/patterns/{pattern_id}")
    async def pattern_detail(pattern_id: str):
        rec = controller.library.load(pattern_id)
        return {"id": pattern_id, **recording_to_dict(rec)}

    @app.delete("/patterns/{pattern_id}")
    async def pattern_delete(pattern_id: str):
        controller.library.delete(pattern_id)
        return {"deleted": pattern_id}

    @app.post("/playback/start")
    async def playback_start(req: PlaybackStartRequest):
        return controller.playback_start(req)

    @app.post("/playback/stop")
    async def playback_stop():
        return controller.playback_stop()

    @app.get("/health")
    async def health():
        return {
            "status": "ok",
            "version": __version__,
            "uptime_s": time.monotonic() - controller.started,
            "patterns": len(controller.library),
        }

    @app.websocket("/live")
    async def live(ws: WebSocket):
        """One-way frame stream: {t_ms, heights_mm, source}, latest wins,
        at most 30 messages/s per client. Any client message closes it."""
        await ws.accept()
        sub = controller.broadcast.subscribe()
        recv = asyncio.ensure_future(ws.receive())
        min_spacing = 1.0 / 30.0
        last_send = 0.0
        try:
            while not recv.done():
                item = sub.poll()
                if item is None:
                    await asyncio.sleep(0.005)
                    continue
                now = time.monotonic()
                if now - last_send < min_spacing:
                    await asyncio.sleep(min_spacing - (now - last_send))
                    latest = sub.poll()  # coalesce to the newest frame
                    if latest is not None:
                        item = latest
                frame, source = item
                await ws.send_json(
                    {
                        "t_ms": frame.t_ms,
                        "heights_mm": list(frame.heights_mm),
                        "source": source,
                    }
                )
                last_send = time.monotonic()
        except Exception:
            pass  # client went away mid-send
        finally:
            recv.cancel()
            controller.broadcast.unsubscribe(sub)

    return app
