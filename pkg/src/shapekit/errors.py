"""Exception types shared across the toolkit.

Every error the library raises deliberately derives from ShapeKitError so
callers (CLI, service) can map them to exit codes / HTTP statuses in one
place. The class name doubles as the machine-readable error token.
"""


class ShapeKitError(Exception):
    """Base class for all toolkit errors."""

    def token(self) -> str:
        return type(self).__name__


class RangeError(ShapeKitError):
    """A value is outside its documented physical range."""


class GeometryError(ShapeKitError):
    """A projected marker would fall outside the camera image."""


class LaneMissing(ShapeKitError):
    """No valid marker blob was found in a lane."""

    def __init__(self, lane: int, message: str | None = None):
        self.lane = lane
        super().__init__(message or f"no valid marker blob in lane {lane}")


class CalibrationFailed(ShapeKitError):
    """Baseline capture could not locate markers in one or more lanes."""

    def __init__(self, lanes: list[int]):
        self.lanes = list(lanes)
        super().__init__(f"calibration failed, markers missing in lanes {self.lanes}")


class DegenerateScale(ShapeKitError):
    """Rest and full-stroke marker positions are too close to derive a scale."""

    def __init__(self, lane: int, delta_px: float):
        self.lane = lane
        self.delta_px = delta_px
        super().__init__(
            f"lane {lane}: |delta y| = {delta_px:.2f} px is too small to calibrate a scale"
        )


class StateError(ShapeKitError):
    """An operation was attempted in a session state that does not allow it."""


class EmptyRecording(ShapeKitError):
    """Recording was stopped before any frame arrived."""


class NotFound(ShapeKitError):
    """A pattern id or file does not exist."""


class FormatError(ShapeKitError):
    """A pattern file is malformed.

    ``part`` is "version" for an unsupported format_version and otherwise
    names the offending field.
    """

    def __init__(self, part: str, message: str | None = None):
        self.part = part
        super().__init__(message or f"malformed pattern file ({part})")


class ParamError(ShapeKitError):
    """A tuning or scenario parameter is out of its legal range."""


class ProtocolError(ShapeKitError):
    """A wire frame does not start with the expected magic/type bytes."""


class CrcError(ShapeKitError):
    """A wire frame failed its CRC check."""


class SinkError(ShapeKitError):
    """A device sink could not be opened or failed while writing."""


class TooShort(ShapeKitError):
    """A recording is too short for the requested analysis."""


class ProfileError(ShapeKitError):
    """Two recordings are incompatible (different profile or frame rate)."""
