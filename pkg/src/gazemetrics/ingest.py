"""Parsing of recording CSVs into GazeRecording plus cohort validation.

Canonical file schema (UTF-8 CSV, header exactly)::

    t,gaze2d_x,gaze2d_y,pupil_left,pupil_right,validity

``t`` is seconds since recording start; gaze coordinates are normalized
screen proportions; pupil diameters are millimeters; ``validity`` is
``valid`` for usable gaze rows.  Files are named ``<subject>_<condition>.csv``
with condition one of baseline/ride/fog (case-insensitive).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import Condition, CONDITION_ORDER, GazeRecording, ScreenGeometry

CANONICAL_HEADER = ["t", "gaze2d_x", "gaze2d_y", "pupil_left", "pupil_right", "validity"]
PUPIL_MIN_MM = 0.0   # exclusive
PUPIL_MAX_MM = 10.0  # inclusive


class IngestError(Exception):
    pass


class MalformedHeader(IngestError):
    pass


class NonMonotonicTimestamps(IngestError):
    pass


class EmptyFile(IngestError):
    pass


class UnparseableNumeric(IngestError):
    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class NoRecordingsFound(IngestError):
    pass


def _parse_optional(cell: str, row: int, column: str) -> float | None:
    """Empty cells and literal NaN mean missing; other junk is an error."""
    text = cell.strip()
    if text == "" or text.lower() == "nan":
        return None
    try:
        value = float(text)
    except ValueError:
        raise UnparseableNumeric(row, f"cannot parse {column}={cell!r}") from None
    if math.isnan(value):
        return None
    return value


def parse_subject_condition(path: Path) -> tuple[str, Condition]:
    """Split ``<subject>_<condition>`` at the last underscore of the stem."""
    stem = Path(path).stem
    subject, sep, cond_text = stem.rpartition("_")
    if not sep or not subject:
        raise ValueError(f"{path}: file name must look like <subject>_<condition>.csv")
    return subject, Condition.parse(cond_text)


def parse_recording(path: str | Path, geometry: ScreenGeometry | None = None,
                    fs_hz: float = 100.0, subject_id: str | None = None,
                    condition: Condition | None = None) -> GazeRecording:
    """Parse one canonical CSV into a degree-valued GazeRecording.

    Rows with validity != "valid", empty/NaN fields, or out-of-[0,1]
    coordinates become missing gaze samples; implausible pupil values
    (<= 0 or > 10 mm) become missing pupil samples.  Timestamps are snapped
    to the nearest bin of a uniform grid at ``fs_hz``; duplicate bins keep
    the last row and empty bins stay missing.
    """
    path = Path(path)
    geometry = geometry or ScreenGeometry()
    if subject_id is None or condition is None:
        auto_subject, auto_condition = parse_subject_condition(path)
        subject_id = subject_id if subject_id is not None else auto_subject
        condition = condition if condition is not None else auto_condition

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: no header") from None
        if [h.strip() for h in header] != CANONICAL_HEADER:
            raise MalformedHeader(f"{path}: header {header!r} does not match "
                                  f"{CANONICAL_HEADER!r}")
        rows = list(reader)
    if not rows:
        raise EmptyFile(f"{path}: no data rows")

    n_bins = 0
    parsed = []
    prev_t = -math.inf
    for i, row in enumerate(rows, start=2):  # 1-based, header is row 1
        if len(row) != len(CANONICAL_HEADER):
            raise UnparseableNumeric(i, f"expected {len(CANONICAL_HEADER)} cells, "
                                        f"got {len(row)}")
        try:
            t = float(row[0])
        except ValueError:
            raise UnparseableNumeric(i, f"cannot parse t={row[0]!r}") from None
        if math.isnan(t) or t < 0:
            raise UnparseableNumeric(i, f"invalid timestamp {row[0]!r}")
        if t < prev_t:
            raise NonMonotonicTimestamps(f"{path}: row {i}: t={t} after {prev_t}")
        prev_t = t
        gx = _parse_optional(row[1], i, "gaze2d_x")
        gy = _parse_optional(row[2], i, "gaze2d_y")
        pl = _parse_optional(row[3], i, "pupil_left")
        pr = _parse_optional(row[4], i, "pupil_right")
        valid = row[5].strip().lower() == "valid"
        bin_idx = int(round(t * fs_hz))
        n_bins = max(n_bins, bin_idx + 1)
        parsed.append((bin_idx, gx, gy, pl, pr, valid))

    x_deg = np.full(n_bins, np.nan)
    y_deg = np.full(n_bins, np.nan)
    gaze_missing = np.ones(n_bins, dtype=bool)
    pupil_l = np.full(n_bins, np.nan)
    pupil_l_missing = np.ones(n_bins, dtype=bool)
    pupil_r = np.full(n_bins, np.nan)
    pupil_r_missing = np.ones(n_bins, dtype=bool)

    for bin_idx, gx, gy, pl, pr, valid in parsed:  # later rows win a bin
        gaze_ok = (valid and gx is not None and gy is not None
                   and 0.0 <= gx <= 1.0 and 0.0 <= gy <= 1.0)
        if gaze_ok:
            x_deg[bin_idx], y_deg[bin_idx] = geometry.norm_to_deg(gx, gy)
            gaze_missing[bin_idx] = False
        else:
            x_deg[bin_idx] = np.nan
            y_deg[bin_idx] = np.nan
            gaze_missing[bin_idx] = True
        for value, arr, miss in ((pl, pupil_l, pupil_l_missing),
                                 (pr, pupil_r, pupil_r_missing)):
            ok = value is not None and PUPIL_MIN_MM < value <= PUPIL_MAX_MM
            arr[bin_idx] = value if ok else np.nan
            miss[bin_idx] = not ok

    return GazeRecording(
        subject_id=subject_id, condition=condition, fs_hz=fs_hz,
        x_deg=x_deg, y_deg=y_deg, gaze_missing=gaze_missing,
        pupil_left_mm=pupil_l, pupil_left_missing=pupil_l_missing,
        pupil_right_mm=pupil_r, pupil_right_missing=pupil_r_missing,
        duration_s=n_bins / fs_hz)


@dataclass(frozen=True)
class CohortEntry:
    subject_id: str
    condition: Condition
    path: Path


@dataclass(frozen=True)
class CohortIndex:
    entries: list[CohortEntry]
    exclusions: list[tuple[str, str]]  # (subject or file, reason)

    @property
    def subjects(self) -> list[str]:
        return sorted({e.subject_id for e in self.entries})


def validate_cohort(directory: str | Path) -> CohortIndex:
    """Index ``<subject>_<condition>.csv`` files; exclude incomplete subjects.

    Subjects missing any of the three condition files are excluded with a
    reason; files that do not follow the naming convention are reported too.
    """
    directory = Path(directory)
    paths = sorted(directory.glob("*.csv"))
    if not paths:
        raise NoRecordingsFound(f"no .csv recordings in {directory}")

    by_subject: dict[str, dict[Condition, Path]] = {}
    exclusions: list[tuple[str, str]] = []
    for path in paths:
        try:
            subject, condition = parse_subject_condition(path)
        except ValueError:
            exclusions.append((path.name, "unrecognized file name"))
            continue
        by_subject.setdefault(subject, {})[condition] = path

    entries: list[CohortEntry] = []
    for subject in sorted(by_subject):
        have = by_subject[subject]
        missing = [c.value for c in CONDITION_ORDER if c not in have]
        if missing:
            exclusions.append(
                (subject, f"incomplete conditions (missing: {', '.join(missing)})"))
            continue
        for condition in CONDITION_ORDER:
            entries.append(CohortEntry(subject, condition, have[condition]))
    return CohortIndex(entries=entries, exclusions=exclusions)


def write_recording_csv(recording: GazeRecording, path: str | Path,
                        geometry: ScreenGeometry | None = None) -> None:
    """Write a recording back out in the canonical schema (synth output path)."""
    geometry = geometry or ScreenGeometry()
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CANONICAL_HEADER)
        fs = recording.fs_hz
        for i in range(recording.n_samples):
            t = repr(i / fs)
            if recording.gaze_missing[i]:
                gx = gy = ""
                validity = "invalid"
            else:
                nx, ny = geometry.deg_to_norm(recording.x_deg[i], recording.y_deg[i])
                gx, gy = repr(nx), repr(ny)
                validity = "valid"
            pl = "" if recording.pupil_left_missing[i] else repr(float(recording.pupil_left_mm[i]))
            pr = "" if recording.pupil_right_missing[i] else repr(float(recording.pupil_right_mm[i]))
            writer.writerow([t, gx, gy, pl, pr, validity])
