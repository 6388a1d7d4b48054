"""Adaptive velocity-threshold saccade detection and the saccade feature group.

The peak threshold is the fixed point of ``AT <- mean(v < AT) + n * sd(v < AT)``
over the estimation-eligible velocity samples, iterated from 200 deg/s until
successive thresholds differ by less than 1 deg/s.  The multiplier n is grid
searched over 2.5..6.0 (step 0.5), scored by the number of detected events
with implausible durations (< 10 ms or > 100 ms); those misdetections are
removed from the winning result.  Onsets and offsets are refined to the
nearest local velocity minimum beyond the respective sub-thresholds, the
offset threshold blending the onset threshold with pre-onset local noise
(0.7 / 0.3 weights).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .kinematics import VelocityTrace
from .model import FixationInterval, SaccadeEvent, Segment
from .preprocess import mask_runs

MULTIPLIER_GRID: tuple[float, ...] = (2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0)
INIT_THRESHOLD_DPS = 200.0
CONVERGENCE_TOL_DPS = 1.0
MAX_ITERATIONS = 100
MIN_ESTIMATION_SAMPLES = 100
MIN_SACCADE_MS = 10.0
MAX_SACCADE_MS = 100.0
LOCAL_NOISE_WINDOW_S = 0.040
LOCAL_MIN_SEARCH_S = 0.100
MIN_FIXATION_MS = 50.0


class TooFewSamples(ValueError):
    """Not enough estimation-eligible velocity samples."""


class DegenerateVelocity(ValueError):
    """Sub-threshold velocity pool has (near-)zero spread."""


@dataclass(frozen=True)
class ThresholdState:
    """Converged peak threshold and the moments it was built from."""

    theta_pt_dps: float
    mu_dps: float
    sigma_dps: float
    n_multiplier: float
    iterations: int
    converged: bool

    @property
    def onset_threshold_dps(self) -> float:
        return self.mu_dps + 3.0 * self.sigma_dps


@dataclass(frozen=True)
class DetectionResult:
    saccades: list[SaccadeEvent]
    fixations: list[FixationInterval]
    threshold: ThresholdState
    misdetections: int
    scan_segments: list[Segment] = field(default_factory=list)


def iterate_threshold(vel: VelocityTrace, multiplier: float,
                      init_dps: float = INIT_THRESHOLD_DPS,
                      min_samples: int = MIN_ESTIMATION_SAMPLES) -> ThresholdState:
    """Fixed-point iteration of the adaptive peak threshold.

    Stops when successive thresholds differ by less than 1 deg/s or after
    100 iterations (the state is then flagged as non-converged).
    """
    pool = vel.v_dps[vel.plaus_mask]
    if len(pool) < min_samples:
        raise TooFewSamples(f"{len(pool)} eligible samples, need >= {min_samples}")

    at = float(init_dps)
    mu = sigma = float("nan")
    for iteration in range(1, MAX_ITERATIONS + 1):
        sub = pool[pool < at]
        if len(sub) < 2:
            raise DegenerateVelocity(
                f"sub-threshold pool collapsed to {len(sub)} samples at {at:.1f} deg/s")
        mu = float(np.mean(sub))
        sigma = float(np.std(sub, ddof=1))
        if sigma == 0.0:
            raise DegenerateVelocity("sub-threshold pool has zero variance")
        new_at = mu + multiplier * sigma
        if abs(new_at - at) < CONVERGENCE_TOL_DPS:
            return ThresholdState(new_at, mu, sigma, multiplier, iteration, True)
        at = new_at
    return ThresholdState(at, mu, sigma, multiplier, MAX_ITERATIONS, False)


def _supra_runs(v: np.ndarray, seg: Segment, thresh: float) -> list[tuple[int, int]]:
    """Maximal runs with v >= thresh inside seg, as inclusive index pairs."""
    chunk = v[seg.start_idx:seg.end_idx] >= thresh
    if not chunk.any():
        return []
    padded = np.concatenate(([False], chunk, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return [(seg.start_idx + int(a), seg.start_idx + int(b) - 1)
            for a, b in zip(edges[0::2], edges[1::2])]


def _nearest_local_min(v: np.ndarray, start: int, lo: int, hi: int,
                       step: int, budget: int) -> int:
    """Index of the local minimum nearest ``start`` walking by ``step``.

    The search stays in [lo, hi] and gives up after ``budget`` steps, in
    which case ``start`` itself is returned.  Boundary samples count as
    minima against their one existing neighbour.
    """
    for offset in range(budget + 1):
        i = start + step * offset
        if i < lo or i > hi:
            break
        left = v[i - 1] if i - 1 >= lo else math.inf
        right = v[i + 1] if i + 1 <= hi else math.inf
        if v[i] <= left and v[i] <= right:
            return i
    return start


def detect_saccades(vel: VelocityTrace, threshold: ThresholdState,
                    fs_hz: float) -> DetectionResult:
    """Scan the velocity trace for saccades at a converged threshold.

    Candidate events are supra-threshold runs; each is refined backward to a
    local minimum below the onset threshold and forward below the offset
    threshold.  Events that reach a segment edge before crossing their
    sub-threshold are dropped; overlapping refined events are merged.
    """
    v = vel.v_dps
    theta_pt = threshold.theta_pt_dps
    t_onset = threshold.onset_threshold_dps
    noise_window = int(round(LOCAL_NOISE_WINDOW_S * fs_hz))
    budget = int(round(LOCAL_MIN_SEARCH_S * fs_hz))

    raw: list[tuple[int, int, int]] = []  # (onset, peak, offset)
    for seg in vel.scan_segments:
        lo, hi = seg.start_idx, seg.end_idx - 1
        for r0, r1 in _supra_runs(v, seg, theta_pt):
            peak = r0 + int(np.argmax(v[r0:r1 + 1]))

            i = r0
            while i >= lo and v[i] >= t_onset:
                i -= 1
            if i < lo:
                continue  # segment edge reached before the onset crossing
            onset = _nearest_local_min(v, i, lo, hi, step=-1, budget=budget)

            window = v[max(0, onset - noise_window):onset]
            window = window[~np.isnan(window)]
            if len(window) < noise_window:
                local_noise = threshold.mu_dps + 3.0 * threshold.sigma_dps
            else:
                local_noise = float(np.mean(window) + 3.0 * np.std(window, ddof=1))
            t_offset = 0.7 * t_onset + 0.3 * local_noise
            if local_noise <= t_onset:
                assert t_offset <= t_onset + 1e-12

            j = r1
            while j <= hi and v[j] >= t_offset:
                j += 1
            if j > hi:
                continue  # segment edge reached before the offset crossing
            offset = _nearest_local_min(v, j, lo, hi, step=+1, budget=budget)
            raw.append((onset, peak, offset))

    raw.sort()
    merged: list[tuple[int, int, int]] = []
    for onset, peak, offset in raw:
        if merged and onset <= merged[-1][2]:
            p_onset, p_peak, p_offset = merged[-1]
            best_peak = peak if v[peak] > v[p_peak] else p_peak
            merged[-1] = (min(onset, p_onset), best_peak, max(offset, p_offset))
        else:
            merged.append((onset, peak, offset))

    events = [
        SaccadeEvent(
            onset_idx=onset, peak_idx=peak, offset_idx=offset,
            duration_ms=(offset - onset) * 1000.0 / fs_hz,
            amplitude_deg=float(np.hypot(vel.x_deg[offset] - vel.x_deg[onset],
                                         vel.y_deg[offset] - vel.y_deg[onset])),
            peak_velocity_dps=float(v[peak]))
        for onset, peak, offset in merged if offset > onset
    ]
    return DetectionResult(saccades=events, fixations=[], threshold=threshold,
                           misdetections=0, scan_segments=list(vel.scan_segments))


def _misdetected(event: SaccadeEvent) -> bool:
    return not (MIN_SACCADE_MS <= event.duration_ms <= MAX_SACCADE_MS)


def optimize_multiplier(vel: VelocityTrace, fs_hz: float,
                        grid: tuple[float, ...] = MULTIPLIER_GRID,
                        init_dps: float = INIT_THRESHOLD_DPS,
                        min_samples: int = MIN_ESTIMATION_SAMPLES,
                        ) -> tuple[DetectionResult, float]:
    """Grid search the threshold multiplier, scored by misdetection count.

    Ties pick the smallest multiplier.  Misdetected events (duration outside
    10-100 ms) are removed from the winning result; candidates whose
    threshold iteration degenerates are skipped unless all of them do.
    """
    candidates: list[tuple[int, float, DetectionResult]] = []
    first_error: Exception | None = None
    for n in grid:
        try:
            state = iterate_threshold(vel, n, init_dps, min_samples)
        except (TooFewSamples, DegenerateVelocity) as err:
            first_error = first_error or err
            continue
        result = detect_saccades(vel, state, fs_hz)
        mis = sum(_misdetected(ev) for ev in result.saccades)
        candidates.append((mis, n, result))
    if not candidates:
        assert first_error is not None
        raise first_error

    mis, n, result = min(candidates, key=lambda c: (c[0], c[1]))
    kept = [ev for ev in result.saccades if not _misdetected(ev)]
    return replace(result, saccades=kept, misdetections=mis), n


def extract_fixations(result: DetectionResult, blink_mask: np.ndarray | None,
                      fs_hz: float,
                      min_fixation_ms: float = MIN_FIXATION_MS,
                      ) -> list[FixationInterval]:
    """Inter-saccadic intervals, cut at blink samples, as fixations.

    Only gaps between consecutive saccades inside one scan segment qualify;
    blink-masked samples split an interval and pieces shorter than the
    minimum duration are dropped.
    """
    def seg_of(idx: int) -> int:
        for k, seg in enumerate(result.scan_segments):
            if seg.start_idx <= idx < seg.end_idx:
                return k
        return -1

    fixations: list[FixationInterval] = []
    saccades = sorted(result.saccades, key=lambda s: s.onset_idx)
    for prev, nxt in zip(saccades, saccades[1:]):
        if seg_of(prev.offset_idx) != seg_of(nxt.onset_idx) or seg_of(prev.offset_idx) < 0:
            continue
        start, end = prev.offset_idx, nxt.onset_idx
        if end <= start:
            continue
        if blink_mask is None:
            pieces = [(start, end)]
        else:
            keep = ~np.asarray(blink_mask[start:end], dtype=bool)
            pieces = [(start + r.start_idx, start + r.end_idx)
                      for r in mask_runs(keep)]
        for a, b in pieces:
            duration_ms = (b - a) * 1000.0 / fs_hz
            if duration_ms >= min_fixation_ms:
                fixations.append(FixationInterval(a, b, duration_ms))
    return fixations


def _stat_triple(values: list[float]) -> tuple[float | None, float | None, float | None]:
    """(mean, sd, median); missing when empty, sd missing below two values."""
    if not values:
        return None, None, None
    arr = np.asarray(values, dtype=float)
    sd = float(np.std(arr, ddof=1)) if len(arr) >= 2 else None
    return float(np.mean(arr)), sd, float(np.median(arr))


def saccade_features(result: DetectionResult,
                     fixations: list[FixationInterval]) -> dict[str, float | None]:
    """The 13 saccade-group features for one recording."""
    amps = [s.amplitude_deg for s in result.saccades]
    peaks = [s.peak_velocity_dps for s in result.saccades]
    durs = [s.duration_ms for s in result.saccades]
    fix_durs = [f.duration_ms for f in fixations]

    mean_amp, sd_amp, med_amp = _stat_triple(amps)
    mean_pv, sd_pv, med_pv = _stat_triple(peaks)
    mean_dur, sd_dur, med_dur = _stat_triple(durs)
    mean_fix, sd_fix, med_fix = _stat_triple(fix_durs)
    return {
        "mean_sacc_amp_deg": mean_amp,
        "sd_sacc_amp_deg": sd_amp,
        "median_sacc_amp_deg": med_amp,
        "mean_peak_vel_dps": mean_pv,
        "sd_peak_vel_dps": sd_pv,
        "median_peak_vel_dps": med_pv,
        "mean_sacc_dur_ms": mean_dur,
        "sd_sacc_dur_ms": sd_dur,
        "median_sacc_dur_ms": med_dur,
        "mean_fix_dur_ms": mean_fix,
        "sd_fix_dur_ms": sd_fix,
        "median_fix_dur_ms": med_fix,
        "n_saccades": float(len(result.saccades)),
    }
