"""Angular velocity of the gaze trace, with plausibility masking.

The velocity magnitude is sqrt(vx^2 + vy^2) where vx, vy are central
differences of the degree-valued traces (one-sided at segment edges).
Detection velocity is computed from the gap-segmented raw gaze: the
110 ms smoothing window used for dispersion analyses smears every
saccade by half a window per side, which would wreck event timing and
inflate durations past the plausibility bound.  The smoothed traces are
kept alongside for amplitude readout.

Samples above 1000 deg/s are physiologically impossible: they are dropped
from event scanning (splitting the scan segments) and from threshold
estimation.  Samples below the recording-wide median velocity are excluded
from threshold estimation only; the scanned signal keeps them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GazeRecording, Segment
from .preprocess import mask_runs, segment, smooth_gaze

MAX_PLAUSIBLE_DPS = 1000.0


class SegmentTooShort(ValueError):
    """Central differences need at least 3 samples in a segment."""


@dataclass(frozen=True)
class VelocityTrace:
    """Angular speed per sample plus the masks downstream stages need.

    v_dps is NaN where undefined (missing gaze or segment too short);
    plaus_mask flags samples usable for threshold estimation; scan_segments
    are the maximal runs the event detector may scan (defined and plausible).
    x_deg/y_deg are the smoothed traces the velocities came from, kept for
    amplitude measurements.
    """

    v_dps: np.ndarray
    plaus_mask: np.ndarray
    scan_segments: list[Segment]
    x_deg: np.ndarray
    y_deg: np.ndarray
    fs_hz: float
    median_dps: float


def segment_speed(x_deg: np.ndarray, y_deg: np.ndarray, fs_hz: float) -> np.ndarray:
    """Angular speed of one gap-free segment (deg/s), one-sided at the ends."""
    x = np.asarray(x_deg, dtype=float)
    y = np.asarray(y_deg, dtype=float)
    if len(x) < 3:
        raise SegmentTooShort(f"need >= 3 samples, got {len(x)}")
    vx = np.gradient(x) * fs_hz
    vy = np.gradient(y) * fs_hz
    return np.hypot(vx, vy)


def angular_velocity(recording: GazeRecording,
                     x_smooth: np.ndarray | None = None,
                     y_smooth: np.ndarray | None = None) -> VelocityTrace:
    """Velocity trace of a whole recording, computed per gaze segment.

    Velocities come from the raw (gap-segmented) gaze; the smoothed traces
    are only carried along for amplitude measurements.  Pass pre-smoothed
    traces to avoid re-running the filter.  Segments with fewer than 3
    samples stay undefined.
    """
    if x_smooth is None or y_smooth is None:
        x_smooth, y_smooth = smooth_gaze(recording)
    n = recording.n_samples
    v = np.full(n, np.nan)
    for seg in segment(recording):
        if len(seg) < 3:
            continue
        sl = slice(seg.start_idx, seg.end_idx)
        v[sl] = segment_speed(recording.x_deg[sl], recording.y_deg[sl],
                              recording.fs_hz)

    defined = ~np.isnan(v)
    if defined.any():
        median = float(np.median(v[defined]))
    else:
        median = float("nan")
    plaus = defined.copy()
    plaus[defined] &= v[defined] <= MAX_PLAUSIBLE_DPS
    plaus[defined] &= ~(v[defined] < median)

    scannable = defined.copy()
    scannable[defined] &= v[defined] <= MAX_PLAUSIBLE_DPS
    return VelocityTrace(v_dps=v, plaus_mask=plaus,
                         scan_segments=mask_runs(scannable),
                         x_deg=x_smooth, y_deg=y_smooth,
                         fs_hz=recording.fs_hz, median_dps=median)
