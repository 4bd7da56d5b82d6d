"""shapekit: camera-tracked pin display toolkit.

Capture marker motion into 5x5 pin-height streams, record and tune touch
patterns, estimate contact force, and drive simulated or serial-attached
servo pin displays.
"""

from shapekit.core import (
    DisplayProfile,
    PatternRecording,
    PinFrame,
    TuningParams,
    clamp_height,
    grid_position,
    linear_index,
)

__version__ = "0.1.0"

__all__ = [
    "DisplayProfile",
    "PatternRecording",
    "PinFrame",
    "TuningParams",
    "clamp_height",
    "grid_position",
    "linear_index",
    "__version__",
]
