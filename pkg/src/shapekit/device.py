"""Device sinks: wire protocol, servo mapping, and the simulated display.

Wire frame layout (29 bytes):

    offset 0   magic 0xA5
    offset 1   frame type 0x01
    offset 2   sequence counter, rolls over at 256
    offset 3   25 position bytes, row-major, 0..255 spanning [0, stroke]
    offset 28  CRC-8 (poly 0x07, init 0x00, MSB first) over bytes 1..27

The magic byte is deliberately outside the CRC so a receiver can resync on
a lossy line by scanning for 0xA5 and letting the checksum arbitrate.

The simulated display models one physical limit only: pin speed. Each pin
is a first-order rate limiter, x += clamp(target - x, -v*dt, +v*dt), which
integrates exactly (no solver error). Torque and load stall are out of
scope; peak force is carried as metadata.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from shapekit.core import PIN_COUNT, DisplayProfile, PinFrame
from shapekit.errors import CrcError, ParamError, ProtocolError, RangeError, SinkError

MAGIC = 0xA5
FRAME_TYPE = 0x01
FRAME_LEN = 29

PWM_MIN_US = 500.0
PWM_MAX_US = 2500.0
PWM_PERIOD_US = 20000.0  # 50 Hz
PWM_RESOLUTION = 4096  # 12-bit


def _build_crc_table(poly: int) -> tuple[int, ...]:
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = ((crc << 1) ^ poly) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
        table.append(crc)
    return tuple(table)


_CRC_TABLE = _build_crc_table(0x07)


def crc8(data: bytes) -> int:
    """CRC-8, polynomial 0x07, init 0x00, MSB first, no reflection."""
    crc = 0x00
    for b in data:
        crc = _CRC_TABLE[crc ^ b]
    return crc


@dataclass(frozen=True)
class DeviceFrame:
    """One display command: sequence counter plus 25 raw position bytes."""

    seq: int
    positions: tuple[int, ...]

    def __post_init__(self):
        if not 0 <= self.seq <= 255:
            raise ProtocolError(f"seq {self.seq} outside 0..255")
        if len(self.positions) != PIN_COUNT:
            raise ProtocolError(f"expected {PIN_COUNT} positions, got {len(self.positions)}")
        for p in self.positions:
            if not 0 <= p <= 255:
                raise ProtocolError(f"position byte {p} outside 0..255")


def encode_frame(frame: DeviceFrame) -> bytes:
    body = bytes([FRAME_TYPE, frame.seq, *frame.positions])
    return bytes([MAGIC]) + body + bytes([crc8(body)])


def decode_frame(data: bytes) -> DeviceFrame:
    if len(data) != FRAME_LEN:
        raise ProtocolError(f"frame must be {FRAME_LEN} bytes, got {len(data)}")
    if data[0] != MAGIC:
        raise ProtocolError(f"bad magic 0x{data[0]:02X}")
    if data[1] != FRAME_TYPE:
        raise ProtocolError(f"unknown frame type 0x{data[1]:02X}")
    expected = crc8(data[1:28])
    if data[28] != expected:
        raise CrcError(f"crc 0x{data[28]:02X} != computed 0x{expected:02X}")
    return DeviceFrame(seq=data[2], positions=tuple(data[3:28]))


class FrameDecoder:
    """Incremental decoder for a byte stream: resyncs by scanning for the
    magic byte and counts frames discarded to corruption."""

    def __init__(self):
        self._buf = bytearray()
        self.errors = 0

    def feed(self, data: bytes) -> list[DeviceFrame]:
        self._buf.extend(data)
        frames = []
        while True:
            start = self._buf.find(bytes([MAGIC]))
            if start < 0:
                self._buf.clear()
                break
            if start:
                del self._buf[:start]
            if len(self._buf) < FRAME_LEN:
                break
            try:
                frames.append(decode_frame(bytes(self._buf[:FRAME_LEN])))
                del self._buf[:FRAME_LEN]
            except (ProtocolError, CrcError):
                self.errors += 1
                del self._buf[:1]  # skip this magic, rescan
        return frames


def height_to_position_byte(h_mm: float, profile: DisplayProfile) -> int:
    if not 0.0 <= h_mm <= profile.stroke_mm:
        raise RangeError(f"height {h_mm} outside [0, {profile.stroke_mm}]")
    return round(255.0 * h_mm / profile.stroke_mm)


def position_byte_to_height(p: int, profile: DisplayProfile) -> float:
    if not 0 <= p <= 255:
        raise RangeError(f"position byte {p} outside 0..255")
    return p / 255.0 * profile.stroke_mm


def position_byte_to_pwm_ticks(p: int) -> int:
    """12-bit on-time for a 50 Hz servo driver; 0..255 spans 500..2500 us."""
    if not 0 <= p <= 255:
        raise RangeError(f"position byte {p} outside 0..255")
    pulse_us = PWM_MIN_US + (p / 255.0) * (PWM_MAX_US - PWM_MIN_US)
    return round(pulse_us * PWM_RESOLUTION / PWM_PERIOD_US)


def frame_from_heights(heights_mm, profile: DisplayProfile, seq: int) -> DeviceFrame:
    return DeviceFrame(
        seq=seq & 0xFF,
        positions=tuple(height_to_position_byte(h, profile) for h in heights_mm),
    )


# --------------------------------------------------------------------------
# Servo physics


@dataclass(frozen=True)
class ServoModel:
    """Speed-limited linear servo.

    max_speed is kept as the exact ratio 9 mm / 0.108 s rather than a
    rounded decimal so that integrating for 108 ms lands on 9 mm to within
    accumulation rounding only.
    """

    max_speed_mm_s: float = 9.0 / 0.108
    stroke_mm: float = 10.0
    update_rate_hz: float = 50.0
    peak_force_n: float = 16.43  # informational; load stall is not modelled

    def __post_init__(self):
        if self.max_speed_mm_s <= 0:
            raise ParamError("max_speed_mm_s must be > 0")


class SimulatedDisplay:
    """25 rate-limited pins advanced only by explicit steps."""

    def __init__(self, profile: DisplayProfile, servo: ServoModel | None = None):
        self.profile = profile
        self.servo = servo or ServoModel(stroke_mm=profile.stroke_mm)
        self.positions_mm = [0.0] * PIN_COUNT
        self.elapsed_ms = 0.0
        self.trace: list[PinFrame] = []

    def step(self, frame: DeviceFrame, dt_ms: float) -> PinFrame:
        if dt_ms <= 0:
            raise ParamError(f"dt_ms must be > 0, got {dt_ms}")
        limit = self.servo.max_speed_mm_s * dt_ms / 1000.0
        for i, p in enumerate(frame.positions):
            target = position_byte_to_height(p, self.profile)
            delta = target - self.positions_mm[i]
            if delta > limit:
                delta = limit
            elif delta < -limit:
                delta = -limit
            self.positions_mm[i] += delta
        self.elapsed_ms += dt_ms
        achieved = PinFrame(t_ms=self.elapsed_ms, heights_mm=tuple(self.positions_mm))
        self.trace.append(achieved)
        return achieved


def sim_step(display: SimulatedDisplay, frame: DeviceFrame, dt_ms: float) -> PinFrame:
    return display.step(frame, dt_ms)


# --------------------------------------------------------------------------
# Sinks


class DeviceSink:
    """Destination for device frames. At most one playing job may own a
    sink at a time; owners cooperate through try_acquire/release."""

    def __init__(self):
        self._owner: object | None = None
        self._open = True

    @property
    def is_open(self) -> bool:
        return self._open

    def try_acquire(self, owner: object) -> bool:
        if self._owner is not None and self._owner is not owner:
            return False
        self._owner = owner
        return True

    def release(self, owner: object) -> None:
        if self._owner is owner:
            self._owner = None

    def write(self, frame: DeviceFrame, dt_ms: float) -> None:
        raise NotImplementedError

    def close(self) -> None:
        self._open = False


class IdealRecorderSink(DeviceSink):
    """Lossless pass-through: keeps every frame exactly as written."""

    def __init__(self):
        super().__init__()
        self.trace: list[DeviceFrame] = []

    def write(self, frame: DeviceFrame, dt_ms: float) -> None:
        if not self._open:
            raise SinkError("sink is closed")
        self.trace.append(frame)


class SimulatedDisplaySink(DeviceSink):
    """Physics-limited display; exposes the achieved-position trace."""

    def __init__(self, profile: DisplayProfile, servo: ServoModel | None = None):
        super().__init__()
        self.display = SimulatedDisplay(profile, servo)

    @property
    def trace(self) -> list[PinFrame]:
        return self.display.trace

    def write(self, frame: DeviceFrame, dt_ms: float) -> None:
        if not self._open:
            raise SinkError("sink is closed")
        self.display.step(frame, dt_ms)

    def trace_csv(self) -> str:
        from shapekit.store import frames_csv

        return frames_csv(self.display.trace)


class SerialSink(DeviceSink):
    """Writes encoded frames to a serial device (or any writable path).

    When the target is a real tty it is configured 115200 8N1; plain files
    are accepted as-is, which is what the tests use.
    """

    def __init__(self, path: str, baud: int = 115200):
        super().__init__()
        self.path = path
        try:
            self._fd = os.open(path, os.O_WRONLY | os.O_NOCTTY)
        except OSError as e:
            raise SinkError(f"cannot open serial device {path}: {e}") from e
        if os.isatty(self._fd):
            self._configure_tty(baud)

    def _configure_tty(self, baud: int):
        import termios

        rate = getattr(termios, f"B{baud}", None)
        if rate is None:
            raise SinkError(f"unsupported baud rate {baud}")
        attrs = termios.tcgetattr(self._fd)
        attrs[0] = attrs[1] = attrs[3] = 0  # raw: no iflag/oflag/lflag
        attrs[2] = termios.CS8 | termios.CREAD | termios.CLOCAL  # 8N1
        attrs[4] = attrs[5] = rate
        termios.tcsetattr(self._fd, termios.TCSANOW, attrs)

    def write(self, frame: DeviceFrame, dt_ms: float) -> None:
        if not self._open:
            raise SinkError("sink is closed")
        try:
            os.write(self._fd, encode_frame(frame))
        except OSError as e:
            raise SinkError(f"serial write failed: {e}") from e

    def close(self) -> None:
        if self._open:
            os.close(self._fd)
        super().close()


def open_sink(kind: str, profile: DisplayProfile) -> DeviceSink:
    """Build a sink from its textual spec: "ideal", "sim", "serial:<path>"."""
    if kind in ("ideal", "ideal-recorder"):
        return IdealRecorderSink()
    if kind in ("sim", "simulated-display"):
        return SimulatedDisplaySink(profile)
    if kind.startswith("serial:"):
        path = kind.partition(":")[2]
        if not path:
            raise SinkError("serial sink needs a device path, e.g. serial:/dev/ttyUSB0")
        return SerialSink(path)
    raise ParamError(f"unknown sink kind {kind!r}; expected ideal, sim, or serial:<path>")
