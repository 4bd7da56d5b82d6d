"""Report files for the CLI: delimited data plus rendered figures.

Every report writer emits a CSV and a PNG figure next to it (same stem).
Rendering uses the Agg backend explicitly so reports work on headless
machines.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from shapekit.core import PatternRecording, PinFrame
from shapekit.force import ForceFrame


def _figure_path(csv_path: str | Path) -> Path:
    return Path(csv_path).with_suffix(".png")


def write_playback_report(
    csv_path: str | Path,
    commanded: PatternRecording,
    achieved: list[PinFrame] | None,
) -> tuple[Path, Path]:
    """Per-frame playback report: commanded vs achieved heights.

    With a trace-bearing sink the rows carry per-frame RMS and max error
    across the 25 pins; without one (serial), only the commanded side.
    Returns (csv file, figure file).
    """
    csv_path = Path(csv_path)
    cmd = np.asarray(commanded.frames, dtype=np.float64)
    times = np.arange(len(cmd)) * commanded.frame_interval_ms

    have_trace = achieved is not None and len(achieved) > 0
    if have_trace:
        ach = np.asarray([f.heights_mm for f in achieved], dtype=np.float64)
        n = min(len(cmd), len(ach))
        err = ach[:n] - cmd[:n]
        rms = np.sqrt((err * err).mean(axis=1))
        worst = np.abs(err).max(axis=1)

    lines = []
    header = "t_ms,mean_commanded_mm"
    if have_trace:
        header += ",mean_achieved_mm,rms_error_mm,max_error_mm"
    lines.append(header)
    for i in range(len(cmd)):
        row = f"{times[i]!r},{cmd[i].mean()!r}"
        if have_trace and i < n:
            row += f",{ach[i].mean()!r},{float(rms[i])!r},{float(worst[i])!r}"
        lines.append(row)
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    fig, axes = plt.subplots(2 if have_trace else 1, 1, figsize=(8, 6), squeeze=False)
    ax = axes[0][0]
    ax.plot(times, cmd.mean(axis=1), label="commanded mean")
    if have_trace:
        ax.plot(times[:n], ach[:n].mean(axis=1), label="achieved mean", linestyle="--")
    ax.set_xlabel("t (ms)")
    ax.set_ylabel("height (mm)")
    ax.set_title(f"playback: {commanded.name}")
    ax.legend(loc="best")
    if have_trace:
        ax2 = axes[1][0]
        ax2.plot(times[:n], rms, label="RMS error")
        ax2.plot(times[:n], worst, label="max error", alpha=0.6)
        ax2.set_xlabel("t (ms)")
        ax2.set_ylabel("error (mm)")
        ax2.legend(loc="best")
    fig.tight_layout()
    figure_path = _figure_path(csv_path)
    fig.savefig(figure_path, dpi=100)
    plt.close(fig)
    return csv_path, figure_path


def write_force_report(csv_path: str | Path, csv_text: str, frames: list[ForceFrame]) -> tuple[Path, Path]:
    """Write the force CSV produced by the force module plus a figure of
    mean spring and contact force over time."""
    csv_path = Path(csv_path)
    csv_path.write_text(csv_text, encoding="utf-8")

    times = np.array([f.t_ms for f in frames])
    spring = np.array([f.spring_force_n for f in frames], dtype=np.float64)
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(times, spring.mean(axis=1), label="mean spring force")
    if frames and frames[0].contact_force_n is not None:
        contact = np.array([f.contact_force_n for f in frames], dtype=np.float64)
        ax.plot(times, contact.mean(axis=1), label="mean contact force (approximate)")
    ax.set_xlabel("t (ms)")
    ax.set_ylabel("force (N)")
    ax.set_title("force estimate")
    ax.legend(loc="best")
    fig.tight_layout()
    figure_path = _figure_path(csv_path)
    fig.savefig(figure_path, dpi=100)
    plt.close(fig)
    return csv_path, figure_path
