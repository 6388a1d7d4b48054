"""Ground-truth synthetic recordings for verifying the detection pipeline.

Saccades are raised-cosine position steps: for amplitude A and duration T
the angular speed profile is ``A*pi/(2T) * sin(pi*(t-t0)/T)``, so the peak
velocity and duration recorded as ground truth are exact by construction.
Fixations are noisy holds (optionally drifting), blinks are missing runs in
the pupil streams, and artifact gaps are long missing runs in both gaze and
pupils.  Everything is a pure function of (spec, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from .model import CONDITION_ORDER, Condition, GazeRecording, ScreenGeometry

EDGE_MARGIN_FRACTION = 0.15  # keep targets away from the field-of-view edge
SCHEDULE_RETRIES = 100


class InfeasibleSpec(ValueError):
    """Requested events cannot be placed without overlap within the retry budget."""


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters for one recording."""

    seed: int = 0
    duration_s: float = 60.0
    fs_hz: float = 100.0
    saccade_rate_hz: float = 1.5
    amplitude_range_deg: tuple[float, float] = (2.0, 6.0)
    duration_ms_range: tuple[float, float] | None = None  # None: main sequence
    main_sequence_scale: float = 75.0
    main_sequence_exponent: float = 0.6
    peak_velocity_cap_dps: float = 500.0
    fixation_noise_sd_deg: float = 0.3
    noise_ar1_rho: float = 0.9  # tracker noise is strongly autocorrelated
    fixation_drift_dps: float = 0.0
    blink_rate_per_min: float = 15.0
    blink_duration_ms_range: tuple[float, float] = (150.0, 350.0)
    artifact_gap_rate_per_min: float = 0.0
    artifact_gap_s_range: tuple[float, float] = (2.5, 4.0)
    cluster_centers_deg: tuple[tuple[float, float], ...] | None = None
    pupil_base_mm: float = 3.5

    def __post_init__(self):
        for name in ("saccade_rate_hz", "blink_rate_per_min",
                     "artifact_gap_rate_per_min", "fixation_noise_sd_deg"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        lo, hi = self.amplitude_range_deg
        if not (0.0 < lo <= hi <= 60.0):
            raise ValueError("amplitude range must lie in (0, 60] degrees")
        if self.duration_s <= 0 or self.fs_hz <= 0:
            raise ValueError("duration and sampling rate must be positive")


@dataclass(frozen=True)
class TrueSaccade:
    onset_idx: int
    offset_idx: int
    amplitude_deg: float
    peak_velocity_dps: float
    duration_ms: float


@dataclass(frozen=True)
class GroundTruth:
    saccades: list[TrueSaccade] = field(default_factory=list)
    fixations: list[tuple[int, int]] = field(default_factory=list)
    blinks: list[tuple[int, int]] = field(default_factory=list)
    artifacts: list[tuple[int, int]] = field(default_factory=list)


def _saccade_duration_s(spec: SynthSpec, amplitude: float,
                        rng: np.random.Generator) -> float:
    if spec.duration_ms_range is not None:
        lo, hi = spec.duration_ms_range
        return rng.uniform(lo, hi) / 1000.0
    vp = min(spec.main_sequence_scale * amplitude ** spec.main_sequence_exponent,
             spec.peak_velocity_cap_dps)
    # Keep derived durations well inside the detector's plausibility window.
    return float(np.clip(math.pi * amplitude / (2.0 * vp), 0.020, 0.080))


def _lattice_times(count: int, duration_s: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Jittered event start times with guaranteed separation."""
    if count <= 0:
        return np.empty(0)
    interval = duration_s / count
    return (np.arange(count) + rng.uniform(0.2, 0.8, count)) * interval


def _ar1_noise(rng: np.random.Generator, n: int, sd: float, rho: float) -> np.ndarray:
    """Stationary AR(1) noise with marginal standard deviation ``sd``."""
    if rho == 0.0:
        return rng.normal(0.0, sd, n)
    innovations = rng.normal(0.0, sd * math.sqrt(1.0 - rho * rho), n)
    start = rng.normal(0.0, sd)
    noise, _ = lfilter([1.0], [1.0, -rho], innovations, zi=np.array([rho * start]))
    return noise


def generate(spec: SynthSpec, rng: np.random.Generator | None = None,
             subject_id: str = "synth",
             condition: Condition = Condition.BASELINE,
             geometry: ScreenGeometry | None = None,
             ) -> tuple[GazeRecording, GroundTruth]:
    """Build one recording plus its exact event ground truth."""
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    geometry = geometry or ScreenGeometry()
    fs = spec.fs_hz
    n = int(round(spec.duration_s * fs))
    fov = (geometry.horiz_fov_deg, geometry.vert_fov_deg)
    lo = tuple(f * EDGE_MARGIN_FRACTION for f in fov)
    hi = tuple(f * (1.0 - EDGE_MARGIN_FRACTION) for f in fov)

    # Saccade schedule: (t0, T, from, to, amplitude).
    count = int(round(spec.saccade_rate_hz * spec.duration_s))
    starts = _lattice_times(count, spec.duration_s, rng)
    if spec.cluster_centers_deg:
        cur = np.asarray(spec.cluster_centers_deg[0], dtype=float)
    else:
        cur = np.array([fov[0] / 2.0, fov[1] / 2.0])
    events = []
    cluster_idx = 0
    t_hold_start = 0.0
    for t0 in starts:
        if spec.fixation_drift_dps > 0:
            drift_dir = rng.normal(size=2)
            drift_dir /= np.linalg.norm(drift_dir)
            cur = cur + drift_dir * spec.fixation_drift_dps * (t0 - t_hold_start)
        if spec.cluster_centers_deg:
            cluster_idx = (cluster_idx + 1) % len(spec.cluster_centers_deg)
            center = np.asarray(spec.cluster_centers_deg[cluster_idx], dtype=float)
            target = center + rng.normal(0.0, 0.2, size=2)
            amplitude = max(float(np.linalg.norm(target - cur)), 0.1)
        else:
            amplitude = rng.uniform(*spec.amplitude_range_deg)
            target = None
            for _ in range(SCHEDULE_RETRIES):
                phi = rng.uniform(0.0, 2.0 * math.pi)
                cand = cur + amplitude * np.array([math.cos(phi), math.sin(phi)])
                if lo[0] <= cand[0] <= hi[0] and lo[1] <= cand[1] <= hi[1]:
                    target = cand
                    break
            if target is None:
                raise InfeasibleSpec(
                    f"cannot place a {amplitude:.1f} deg saccade inside the field of view")
        duration = _saccade_duration_s(spec, amplitude, rng)
        if t0 + duration > spec.duration_s - 0.1:
            continue
        events.append((float(t0), duration, cur.copy(), target.copy(), amplitude))
        cur = target
        t_hold_start = t0 + duration

    # Base trajectory: holds interpolate landing -> (possibly drifted) start,
    # saccade spans follow the raised cosine.
    x = np.empty(n)
    y = np.empty(n)
    t_grid = np.arange(n) / fs
    prev_idx = 0
    land_pos = (np.array([fov[0] / 2.0, fov[1] / 2.0])
                if not spec.cluster_centers_deg
                else np.asarray(spec.cluster_centers_deg[0], dtype=float))
    land_time = 0.0
    truth_saccades = []
    for t0, duration, p_from, p_to, amplitude in events:
        onset_idx = int(round(t0 * fs))
        offset_idx = min(int(round((t0 + duration) * fs)), n - 1)
        hold = slice(prev_idx, onset_idx)
        hold_frac = ((t_grid[hold] - land_time) / (t0 - land_time)
                     if t0 > land_time else 0.0)
        x[hold] = land_pos[0] + (p_from[0] - land_pos[0]) * hold_frac
        y[hold] = land_pos[1] + (p_from[1] - land_pos[1]) * hold_frac
        span = slice(onset_idx, offset_idx + 1)
        s = np.clip((t_grid[span] - t0) / duration, 0.0, 1.0)
        w = 0.5 * (1.0 - np.cos(math.pi * s))
        x[span] = p_from[0] + (p_to[0] - p_from[0]) * w
        y[span] = p_from[1] + (p_to[1] - p_from[1]) * w
        prev_idx = offset_idx + 1
        land_pos, land_time = p_to, t0 + duration
        truth_saccades.append(TrueSaccade(
            onset_idx=onset_idx, offset_idx=offset_idx,
            amplitude_deg=float(amplitude),
            peak_velocity_dps=math.pi * amplitude / (2.0 * duration),
            duration_ms=duration * 1000.0))
    x[prev_idx:] = land_pos[0]
    y[prev_idx:] = land_pos[1]

    if spec.fixation_noise_sd_deg > 0:
        x = x + _ar1_noise(rng, n, spec.fixation_noise_sd_deg, spec.noise_ar1_rho)
        y = y + _ar1_noise(rng, n, spec.fixation_noise_sd_deg, spec.noise_ar1_rho)
    np.clip(x, 0.05, fov[0] - 0.05, out=x)
    np.clip(y, 0.05, fov[1] - 0.05, out=y)

    # Artifact gaps (lost tracking): mask gaze and pupils, avoid saccades.
    artifacts: list[tuple[int, int]] = []
    n_artifacts = int(round(spec.artifact_gap_rate_per_min * spec.duration_s / 60.0))
    occupied = [(s.onset_idx, s.offset_idx) for s in truth_saccades]
    for _ in range(n_artifacts):
        placed = False
        for _ in range(SCHEDULE_RETRIES):
            gap_len = int(round(rng.uniform(*spec.artifact_gap_s_range) * fs))
            start = int(rng.integers(0, max(1, n - gap_len)))
            margin = int(0.2 * fs)
            window = (start - margin, start + gap_len + margin)
            if any(a < window[1] and window[0] < b for a, b in occupied):
                continue
            if any(a < window[1] and window[0] < b for a, b in artifacts):
                continue
            artifacts.append((start, start + gap_len))
            placed = True
            break
        if not placed:
            raise InfeasibleSpec("artifact gaps do not fit between saccades")
    artifacts.sort()

    # Blinks: missing runs in the pupil streams, clear of artifacts.
    n_blinks = int(round(spec.blink_rate_per_min * spec.duration_s / 60.0))
    blink_starts = _lattice_times(n_blinks, spec.duration_s, rng)
    blinks: list[tuple[int, int]] = []
    for tb in blink_starts:
        dur_ms = rng.uniform(*spec.blink_duration_ms_range)
        start = int(round(tb * fs))
        length = int(round(dur_ms / 1000.0 * fs))
        end = min(start + length, n)
        if end - start < 1:
            continue
        if any(a < end and start < b for a, b in artifacts):
            continue
        blinks.append((start, end))

    gaze_missing = np.zeros(n, dtype=bool)
    pupil_missing = np.zeros(n, dtype=bool)
    for a, b in artifacts:
        gaze_missing[a:b] = True
        pupil_missing[a:b] = True
    for a, b in blinks:
        pupil_missing[a:b] = True

    x[gaze_missing] = np.nan
    y[gaze_missing] = np.nan
    pupil = (spec.pupil_base_mm + 0.2 * np.sin(2.0 * math.pi * 0.05 * t_grid)
             + rng.normal(0.0, 0.05, n))
    pupil_left = np.where(pupil_missing, np.nan, pupil)
    pupil_right = np.where(pupil_missing, np.nan, pupil + 0.1)

    fixations = []
    for prev, nxt in zip(truth_saccades, truth_saccades[1:]):
        if nxt.onset_idx > prev.offset_idx + 1:
            fixations.append((prev.offset_idx + 1, nxt.onset_idx))

    recording = GazeRecording(
        subject_id=subject_id, condition=condition, fs_hz=fs,
        x_deg=x, y_deg=y, gaze_missing=gaze_missing,
        pupil_left_mm=pupil_left, pupil_left_missing=pupil_missing.copy(),
        pupil_right_mm=pupil_right, pupil_right_missing=pupil_missing.copy(),
        duration_s=n / fs)
    truth = GroundTruth(saccades=truth_saccades, fixations=fixations,
                        blinks=blinks, artifacts=artifacts)
    return recording, truth


# Per-condition defaults loosely following the study design: calmer gaze at
# rest, more blinking and tighter dispersion while driving.
DEFAULT_CONDITION_SPECS: dict[Condition, SynthSpec] = {
    Condition.BASELINE: SynthSpec(duration_s=90.0, saccade_rate_hz=1.8,
                                  amplitude_range_deg=(2.0, 5.0),
                                  blink_rate_per_min=12.0),
    Condition.RIDE: SynthSpec(duration_s=60.0, saccade_rate_hz=1.4,
                              amplitude_range_deg=(2.5, 6.0),
                              blink_rate_per_min=17.0),
    Condition.FOG: SynthSpec(duration_s=30.0, saccade_rate_hz=1.0,
                             amplitude_range_deg=(2.5, 6.5),
                             blink_rate_per_min=20.0),
}


def subject_effects(rng: np.random.Generator) -> dict[str, float]:
    """Per-subject multipliers shared across that subject's conditions."""
    return {
        "saccade_rate": float(rng.lognormal(0.0, 0.15)),
        "amplitude": float(rng.lognormal(0.0, 0.10)),
        "blink_rate": float(rng.lognormal(0.0, 0.20)),
        "noise": float(rng.lognormal(0.0, 0.10)),
    }


def apply_effects(spec: SynthSpec, effects: dict[str, float]) -> SynthSpec:
    lo, hi = spec.amplitude_range_deg
    scale = effects["amplitude"]
    return replace(
        spec,
        saccade_rate_hz=spec.saccade_rate_hz * effects["saccade_rate"],
        amplitude_range_deg=(min(lo * scale, 60.0), min(hi * scale, 60.0)),
        blink_rate_per_min=spec.blink_rate_per_min * effects["blink_rate"],
        fixation_noise_sd_deg=spec.fixation_noise_sd_deg * effects["noise"])


def generate_cohort(n_subjects: int,
                    condition_specs: dict[Condition, SynthSpec] | None = None,
                    seed: int = 0,
                    ) -> list[tuple[GazeRecording, GroundTruth]]:
    """Cohort of n_subjects x 3 conditions with shared per-subject effects.

    Deterministic given ``seed``: every recording draws from its own stream
    keyed by (seed, subject index, condition index).
    """
    if n_subjects < 1:
        raise ValueError("need at least one subject")
    condition_specs = condition_specs or DEFAULT_CONDITION_SPECS
    out = []
    for s_idx in range(n_subjects):
        subject = f"S{s_idx + 1:02d}"
        effects = subject_effects(np.random.default_rng(
            np.random.SeedSequence((seed, s_idx))))
        for c_idx, condition in enumerate(CONDITION_ORDER):
            spec = apply_effects(condition_specs[condition], effects)
            rng = np.random.default_rng(np.random.SeedSequence((seed, s_idx, c_idx)))
            out.append(generate(spec, rng=rng, subject_id=subject,
                                condition=condition))
    return out
