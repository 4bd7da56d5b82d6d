"""Real and simulated clocks.

Everything that paces work (pipeline, playback) takes a clock so tests can
run in virtual time with zero lateness and no sleeps.
"""

from __future__ import annotations

import time


class Clock:
    def now_ms(self) -> float:
        raise NotImplementedError

    def wait_until(self, t_ms: float) -> None:
        raise NotImplementedError


class RealClock(Clock):
    """Wall-clock time, origin at construction."""

    def __init__(self):
        self._t0 = time.monotonic()

    def now_ms(self) -> float:
        return (time.monotonic() - self._t0) * 1000.0

    def wait_until(self, t_ms: float) -> None:
        delay = (t_ms - self.now_ms()) / 1000.0
        if delay > 0:
            time.sleep(delay)


class SimClock(Clock):
    """Manually advanced clock; wait_until jumps straight to the deadline."""

    def __init__(self, start_ms: float = 0.0):
        self._now = start_ms

    def now_ms(self) -> float:
        return self._now

    def wait_until(self, t_ms: float) -> None:
        if t_ms > self._now:
            self._now = t_ms

    def advance(self, dt_ms: float) -> None:
        self._now += dt_ms
