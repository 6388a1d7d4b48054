"""Blink detection from pupil-diameter dropout runs and the blink features.

A blink is a maximal run of missing pupil samples lasting 100-400 ms.
Missing runs longer than 200 samples at 100 Hz (2 s; scaled for other
rates) are tracking artifacts: they produce no blinks and their time is
subtracted from the denominator of per-minute rates.  Runs in between
(or below 100 ms) are ignored.  Detection runs on the left pupil stream,
falling back to the right one when the left is entirely missing.
"""

from __future__ import annotations

import numpy as np

from .model import BlinkEvent, GazeRecording
from .preprocess import mask_runs

MIN_BLINK_MS = 100.0
MAX_BLINK_MS = 400.0
ARTIFACT_RUN_SAMPLES_AT_100HZ = 200


class NonPositiveDuration(ValueError):
    """Analyzed duration (recording minus artifacts) must be positive."""


def detect_blinks(pupil_missing: np.ndarray, fs_hz: float,
                  ) -> tuple[list[BlinkEvent], list[tuple[int, int]]]:
    """Classify missing-sample runs of one pupil stream.

    Returns the blink events and the artifact intervals (start, end-exclusive
    index pairs).  Only the mask matters; pupil values are never read.
    """
    artifact_samples = ARTIFACT_RUN_SAMPLES_AT_100HZ * fs_hz / 100.0
    blinks: list[BlinkEvent] = []
    artifacts: list[tuple[int, int]] = []
    for run in mask_runs(np.asarray(pupil_missing, dtype=bool)):
        length = len(run)
        if length > artifact_samples:
            artifacts.append((run.start_idx, run.end_idx))
            continue
        duration_ms = length * 1000.0 / fs_hz
        if MIN_BLINK_MS <= duration_ms <= MAX_BLINK_MS:
            blinks.append(BlinkEvent(onset_idx=run.start_idx,
                                     offset_idx=run.end_idx,
                                     duration_ms=duration_ms))
    return blinks, artifacts


def detect_blinks_in_recording(recording: GazeRecording,
                               ) -> tuple[list[BlinkEvent], list[tuple[int, int]]]:
    """Run blink detection on the left pupil, or the right if left is empty."""
    mask = recording.pupil_left_missing
    if mask.all():
        mask = recording.pupil_right_missing
    return detect_blinks(mask, recording.fs_hz)


def blink_sample_mask(blinks: list[BlinkEvent], n_samples: int) -> np.ndarray:
    """Boolean mask marking every sample inside a blink event."""
    mask = np.zeros(n_samples, dtype=bool)
    for blink in blinks:
        mask[blink.onset_idx:blink.offset_idx] = True
    return mask


def analyzed_duration_s(recording: GazeRecording,
                        artifacts: list[tuple[int, int]]) -> float:
    """Recording duration minus total artifact time, in seconds."""
    artifact_s = sum(end - start for start, end in artifacts) / recording.fs_hz
    return recording.duration_s - artifact_s


def blink_features(blinks: list[BlinkEvent],
                   analyzed_duration: float) -> dict[str, float | None]:
    """The 5 blink-group features; duration stats missing without blinks."""
    if analyzed_duration <= 0:
        raise NonPositiveDuration(f"analyzed duration {analyzed_duration} s")
    durations = np.asarray([b.duration_ms for b in blinks], dtype=float)
    if len(durations) == 0:
        mean = sd = median = None
    else:
        mean = float(np.mean(durations))
        sd = float(np.std(durations, ddof=1)) if len(durations) >= 2 else None
        median = float(np.median(durations))
    return {
        "mean_blink_dur_ms": mean,
        "sd_blink_dur_ms": sd,
        "median_blink_dur_ms": median,
        "blink_rate": float(len(blinks)),
        "blinks_per_min": len(blinks) / (analyzed_duration / 60.0),
    }
