"""Shared domain types: screen geometry, recordings, oculomotor events, feature vectors.

Unit conventions used throughout the package:

* gaze positions are stored in degrees of visual angle after ingest,
* velocities are degrees/second, durations milliseconds,
* BCEA is reported in square arcminutes (1 deg^2 = 3600 minarc^2),
* missing samples are tracked with explicit boolean masks (True = missing),
  never with sentinel values inside the data arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

DEG2_TO_MINARC2 = 3600.0


class Condition(Enum):
    """Experimental condition of one recording."""

    BASELINE = "Baseline"
    RIDE = "Ride"
    FOG = "Fog"

    @classmethod
    def parse(cls, text: str) -> "Condition":
        for cond in cls:
            if cond.value.lower() == text.strip().lower():
                return cond
        raise ValueError(f"unknown condition {text!r}")


CONDITION_ORDER = (Condition.BASELINE, Condition.RIDE, Condition.FOG)


@dataclass(frozen=True)
class ScreenGeometry:
    """Display resolution and angular extent, used for the pixel-to-angle map.

    The map is linear: one horizontal pixel spans ``phi1()`` degrees and one
    vertical pixel ``phi2()`` degrees (no tangent correction).
    """

    width_px: int = 1920
    height_px: int = 1080
    horiz_fov_deg: float = 95.0
    vert_fov_deg: float = 63.0

    def __post_init__(self):
        for name in ("width_px", "height_px", "horiz_fov_deg", "vert_fov_deg"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    def phi1(self) -> float:
        """Degrees per horizontal pixel."""
        return self.horiz_fov_deg / self.width_px

    def phi2(self) -> float:
        """Degrees per vertical pixel."""
        return self.vert_fov_deg / self.height_px

    def norm_to_deg(self, norm_x: float, norm_y: float) -> tuple[float, float]:
        """Normalized screen proportion -> degrees of visual angle."""
        return (norm_x * self.width_px * self.phi1(),
                norm_y * self.height_px * self.phi2())

    def deg_to_norm(self, x_deg: float, y_deg: float) -> tuple[float, float]:
        return (x_deg / (self.width_px * self.phi1()),
                y_deg / (self.height_px * self.phi2()))


@dataclass(frozen=True)
class GazeSample:
    """One raw sample in normalized screen coordinates (None = missing)."""

    t: float
    gaze_norm_x: float | None
    gaze_norm_y: float | None
    pupil_left_mm: float | None
    pupil_right_mm: float | None
    valid: bool

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("sample time must be non-negative")
        if self.valid:
            for v in (self.gaze_norm_x, self.gaze_norm_y):
                if v is None or not (0.0 <= v <= 1.0):
                    raise ValueError("valid samples need gaze coordinates in [0, 1]")


@dataclass(frozen=True)
class Segment:
    """Maximal run of consecutive non-missing gaze samples, end exclusive."""

    start_idx: int
    end_idx: int

    def __post_init__(self):
        if self.end_idx <= self.start_idx:
            raise ValueError("segment must contain at least one sample")

    def __len__(self) -> int:
        return self.end_idx - self.start_idx


@dataclass(frozen=True)
class GazeRecording:
    """Uniformly sampled gaze and pupil streams for one subject x condition.

    ``x_deg``/``y_deg`` share ``gaze_missing``; each pupil stream carries its
    own mask.  Array values at masked indices are NaN and must not be read.
    """

    subject_id: str
    condition: Condition
    fs_hz: float
    x_deg: np.ndarray
    y_deg: np.ndarray
    gaze_missing: np.ndarray
    pupil_left_mm: np.ndarray
    pupil_left_missing: np.ndarray
    pupil_right_mm: np.ndarray
    pupil_right_missing: np.ndarray
    duration_s: float

    def __post_init__(self):
        if self.fs_hz <= 0:
            raise ValueError("fs_hz must be positive")
        n = len(self.x_deg)
        arrays = (self.y_deg, self.gaze_missing, self.pupil_left_mm,
                  self.pupil_left_missing, self.pupil_right_mm,
                  self.pupil_right_missing)
        if any(len(a) != n for a in arrays):
            raise ValueError("all sample streams must have equal length")
        if abs(n - self.duration_s * self.fs_hz) > 1.5:
            raise ValueError("duration_s inconsistent with sample count")

    @property
    def n_samples(self) -> int:
        return len(self.x_deg)


@dataclass(frozen=True)
class SaccadeEvent:
    """Detected saccade; indices are inclusive sample positions."""

    onset_idx: int
    peak_idx: int
    offset_idx: int
    duration_ms: float
    amplitude_deg: float
    peak_velocity_dps: float

    def __post_init__(self):
        if not (self.onset_idx <= self.peak_idx <= self.offset_idx):
            raise ValueError("saccade indices out of order")
        if self.amplitude_deg < 0:
            raise ValueError("amplitude must be non-negative")
        if self.peak_velocity_dps <= 0:
            raise ValueError("peak velocity must be positive")


@dataclass(frozen=True)
class FixationInterval:
    """Stable-gaze interval between saccades; end index exclusive."""

    start_idx: int
    end_idx: int
    duration_ms: float

    def __post_init__(self):
        if self.duration_ms <= 0:
            raise ValueError("fixation duration must be positive")


@dataclass(frozen=True)
class BlinkEvent:
    """Blink detected from a pupil dropout run; offset index exclusive."""

    onset_idx: int
    offset_idx: int
    duration_ms: float

    def __post_init__(self):
        if not (100.0 <= self.duration_ms <= 400.0):
            raise ValueError("blink duration outside the 100-400 ms window")


# Canonical feature list: 13 saccade + 13 dispersion + 5 blink entries.
_FEATURE_NAMES: tuple[tuple[str, str], ...] = (
    ("mean_sacc_amp_deg", "deg"),
    ("sd_sacc_amp_deg", "deg"),
    ("median_sacc_amp_deg", "deg"),
    ("mean_peak_vel_dps", "deg/s"),
    ("sd_peak_vel_dps", "deg/s"),
    ("median_peak_vel_dps", "deg/s"),
    ("mean_sacc_dur_ms", "ms"),
    ("sd_sacc_dur_ms", "ms"),
    ("median_sacc_dur_ms", "ms"),
    ("mean_fix_dur_ms", "ms"),
    ("sd_fix_dur_ms", "ms"),
    ("median_fix_dur_ms", "ms"),
    ("n_saccades", "count"),
    ("mean_h_gaze_deg", "deg"),
    ("mean_v_gaze_deg", "deg"),
    ("sd_h_gaze_deg", "deg"),
    ("sd_v_gaze_deg", "deg"),
    ("rho", "a.u."),
    ("bcea_minarc2", "minarc^2"),
    ("n_prl", "count"),
    ("gi", "a.u."),
    ("mse_deg2", "deg^2"),
    ("sampen_h", "a.u."),
    ("sampen_v", "a.u."),
    ("apen_h", "a.u."),
    ("apen_v", "a.u."),
    ("mean_blink_dur_ms", "ms"),
    ("sd_blink_dur_ms", "ms"),
    ("median_blink_dur_ms", "ms"),
    ("blink_rate", "count"),
    ("blinks_per_min", "1/min"),
)

FEATURE_ORDER: tuple[str, ...] = tuple(name for name, _ in _FEATURE_NAMES)


def feature_names() -> list[tuple[str, str]]:
    """Ordered ``(name, unit)`` pairs of the 31 features, stable across runs."""
    return list(_FEATURE_NAMES)


@dataclass(frozen=True)
class FeatureVector:
    """The 31 named features for one subject x condition (None = missing)."""

    subject_id: str
    condition: Condition
    values: dict[str, float | None] = field(default_factory=dict)

    def __post_init__(self):
        if tuple(self.values.keys()) != FEATURE_ORDER:
            missing = set(FEATURE_ORDER) - set(self.values)
            extra = set(self.values) - set(FEATURE_ORDER)
            raise ValueError(
                f"feature vector must carry exactly the canonical 31 features "
                f"in order (missing={sorted(missing)}, unexpected={sorted(extra)})")

    def to_row(self) -> list[str]:
        """CSV cells: subject, condition, then features (missing -> empty)."""
        cells = [self.subject_id, self.condition.value]
        for name in FEATURE_ORDER:
            v = self.values[name]
            cells.append("" if v is None else repr(float(v)))
        return cells

    @classmethod
    def from_row(cls, cells: list[str]) -> "FeatureVector":
        if len(cells) != 2 + len(FEATURE_ORDER):
            raise ValueError(f"expected {2 + len(FEATURE_ORDER)} cells, got {len(cells)}")
        values: dict[str, float | None] = {}
        for name, cell in zip(FEATURE_ORDER, cells[2:]):
            values[name] = None if cell == "" else float(cell)
        return cls(subject_id=cells[0], condition=Condition.parse(cells[1]),
                   values=values)
