"""End-to-end feature extraction for one recording."""

from __future__ import annotations

from dataclasses import dataclass

from .blinks import (NonPositiveDuration, analyzed_duration_s, blink_features,
                     blink_sample_mask, detect_blinks_in_recording)
from .dispersion import PRL_GRID, PRL_MASS, dispersion_features
from .kinematics import angular_velocity
from .model import FEATURE_ORDER, FeatureVector, GazeRecording
from .preprocess import DEFAULT_ORDER, DEFAULT_WINDOW, smooth_gaze
from .saccades import (INIT_THRESHOLD_DPS, MIN_ESTIMATION_SAMPLES,
                       MULTIPLIER_GRID, DegenerateVelocity, TooFewSamples,
                       extract_fixations, optimize_multiplier, saccade_features)

_SACCADE_KEYS = FEATURE_ORDER[:13]
_BLINK_KEYS = FEATURE_ORDER[26:]


@dataclass(frozen=True)
class PipelineParams:
    savgol_window: int = DEFAULT_WINDOW
    savgol_order: int = DEFAULT_ORDER
    multiplier_grid: tuple[float, ...] = MULTIPLIER_GRID
    init_threshold_dps: float = INIT_THRESHOLD_DPS
    min_estimation_samples: int = MIN_ESTIMATION_SAMPLES
    prl_mass: float = PRL_MASS
    prl_grid: int = PRL_GRID


def extract_features(recording: GazeRecording,
                     params: PipelineParams = PipelineParams()) -> FeatureVector:
    """Smooth, detect events, and assemble the 31-feature vector.

    Stages that cannot run (degenerate velocity pool, no analyzable blink
    time) leave their features missing instead of failing the recording.
    """
    x_s, y_s = smooth_gaze(recording, params.savgol_window, params.savgol_order)
    vel = angular_velocity(recording, x_s, y_s)

    detection = None
    try:
        detection, _ = optimize_multiplier(
            vel, recording.fs_hz, params.multiplier_grid,
            params.init_threshold_dps, params.min_estimation_samples)
    except (TooFewSamples, DegenerateVelocity):
        pass

    blinks, artifacts = detect_blinks_in_recording(recording)

    if detection is not None:
        mask = blink_sample_mask(blinks, recording.n_samples)
        fixations = extract_fixations(detection, mask, recording.fs_hz)
        values = dict(saccade_features(detection, fixations))
    else:
        fixations = []
        values = dict.fromkeys(_SACCADE_KEYS)

    values.update(dispersion_features(recording, fixations,
                                      prl_mass=params.prl_mass,
                                      prl_grid=params.prl_grid,
                                      x_smooth=x_s, y_smooth=y_s))
    try:
        values.update(blink_features(blinks, analyzed_duration_s(recording, artifacts)))
    except NonPositiveDuration:
        values.update(dict.fromkeys(_BLINK_KEYS))

    ordered = {name: values[name] for name in FEATURE_ORDER}
    return FeatureVector(subject_id=recording.subject_id,
                         condition=recording.condition, values=ordered)
