"""Command-line interface: extract, stats, synth, plot-data.

Exit codes: 0 success, 1 fatal error, 2 partial failures (some recordings
could not be processed; errors are logged and the rest continue).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .ingest import (NoRecordingsFound, parse_recording, validate_cohort,
                     write_recording_csv)
from .model import (CONDITION_ORDER, Condition, FEATURE_ORDER, FeatureVector,
                    ScreenGeometry)
from .pipeline import PipelineParams, extract_features
from .stats import (COHENS_D_THRESHOLDS, StatReport, StatsError, run_report)
from .synth import DEFAULT_CONDITION_SPECS, generate_cohort

log = logging.getLogger("gazemetrics")

TABLE_HEADER = ["subject_id", "condition", *FEATURE_ORDER]
MIN_SUBJECTS = 5


class MalformedTable(ValueError):
    pass


class TooFewSubjects(ValueError):
    pass


def write_feature_table(vectors: list[FeatureVector], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TABLE_HEADER)
        for vector in vectors:
            writer.writerow(vector.to_row())


def read_feature_table(path: str | Path) -> list[FeatureVector]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedTable(f"{path}: empty table") from None
        if header != TABLE_HEADER:
            raise MalformedTable(f"{path}: header does not match the canonical "
                                 f"33-column feature table")
        vectors = []
        for i, row in enumerate(reader, start=2):
            try:
                vectors.append(FeatureVector.from_row(row))
            except ValueError as err:
                raise MalformedTable(f"{path}: row {i}: {err}") from None
    return vectors


def read_raw_table(path: str | Path) -> list[list[str]]:
    """Feature table rows as raw strings (bit-exact value passthrough)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TABLE_HEADER:
            raise MalformedTable(f"{path}: header does not match the canonical "
                                 f"33-column feature table")
        return list(reader)


def cohort_matrices(vectors: list[FeatureVector],
                    ) -> tuple[list[str], dict[Condition, np.ndarray]]:
    """Align feature vectors into per-condition subjects x features matrices.

    Subjects lacking any condition are dropped (logged); at least 5 complete
    subjects are required.
    """
    by_subject: dict[str, dict[Condition, FeatureVector]] = {}
    for vector in vectors:
        by_subject.setdefault(vector.subject_id, {})[vector.condition] = vector
    complete = sorted(s for s, conds in by_subject.items()
                      if all(c in conds for c in CONDITION_ORDER))
    dropped = sorted(set(by_subject) - set(complete))
    for subject in dropped:
        log.warning("dropping %s: not all conditions present", subject)
    if len(complete) < MIN_SUBJECTS:
        raise TooFewSubjects(f"{len(complete)} complete subjects, "
                             f"need >= {MIN_SUBJECTS}")
    matrices = {}
    for condition in CONDITION_ORDER:
        rows = []
        for subject in complete:
            values = by_subject[subject][condition].values
            rows.append([math.nan if values[k] is None else values[k]
                         for k in FEATURE_ORDER])
        matrices[condition] = np.asarray(rows, dtype=float)
    return complete, matrices


def report_to_dict(report: StatReport) -> dict:
    """JSON-ready view of a report with a stable key order."""
    return {
        "n_subjects": report.n_subjects,
        "conditions": [c.value for c in report.conditions],
        "features": [
            {
                "name": fr.name,
                "normality_p": {c.value: fr.normality_p[c] for c in report.conditions},
                "parametric": fr.parametric,
                "omnibus": {
                    "test": fr.omnibus_test,
                    "statistic": _json_float(fr.statistic),
                    "p_raw": _json_float(fr.p_raw),
                    "p_adj": _json_float(fr.p_adj),
                },
                "pairwise": [
                    {
                        "pair": [r.pair[0].value, r.pair[1].value],
                        "test": r.test.value,
                        "statistic": _json_float(r.statistic),
                        "p_raw": _json_float(r.p_raw),
                        "p_adj": _json_float(r.p_adj),
                        "effect": r.effect.value,
                        "effect_value": _json_float(r.effect_value),
                        "label": r.label.value,
                    }
                    for r in fr.pairwise
                ],
            }
            for fr in report.features
        ],
    }


def _json_float(x: float) -> float | str:
    return x if math.isfinite(x) else repr(x)


def _parse_pair(text: str, sep: str, kind) -> tuple:
    parts = text.split(sep)
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two {sep}-separated values, "
                                         f"got {text!r}")
    return tuple(kind(p) for p in parts)


def _geometry_from_args(args) -> ScreenGeometry:
    width, height = _parse_pair(args.screen, "x", int)
    fov_h, fov_v = _parse_pair(args.fov, "x", float)
    return ScreenGeometry(width_px=width, height_px=height,
                          horiz_fov_deg=fov_h, vert_fov_deg=fov_v)


def _extract_one(job: tuple) -> list[str]:
    path, subject, condition_value, fs, geometry, params = job
    recording = parse_recording(path, geometry, fs, subject_id=subject,
                                condition=Condition(condition_value))
    return extract_features(recording, params).to_row()


def cmd_extract(args) -> int:
    geometry = _geometry_from_args(args)
    params = PipelineParams(prl_mass=args.prl_mass)
    try:
        index = validate_cohort(args.input)
    except NoRecordingsFound as err:
        log.error("%s", err)
        return 1
    for name, reason in index.exclusions:
        log.warning("excluded %s: %s", name, reason)

    jobs = [(e.path, e.subject_id, e.condition.value, args.fs, geometry, params)
            for e in index.entries]
    rows: list[list[str]] = []
    failures = 0
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_extract_one, job) for job in jobs]
            for job, future in zip(jobs, futures):
                try:
                    rows.append(future.result())
                except Exception as err:  # per-file failures are not fatal
                    log.error("failed %s: %s", job[0], err)
                    failures += 1
    else:
        for job in jobs:
            try:
                rows.append(_extract_one(job))
            except Exception as err:
                log.error("failed %s: %s", job[0], err)
                failures += 1

    if not rows:
        log.error("no recordings could be processed")
        return 1
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TABLE_HEADER)
        writer.writerows(rows)
    log.info("wrote %d rows to %s (%d failures)", len(rows), args.out, failures)
    return 2 if failures else 0


def cmd_stats(args) -> int:
    d_thresholds = COHENS_D_THRESHOLDS
    if args.d_bands:
        d_thresholds = tuple(float(x) for x in args.d_bands.split(","))
        if len(d_thresholds) != 5 or list(d_thresholds) != sorted(d_thresholds):
            log.error("--d-bands needs 5 ascending cut points")
            return 1
    try:
        vectors = read_feature_table(args.input)
        _, matrices = cohort_matrices(vectors)
        report = run_report(matrices, list(FEATURE_ORDER),
                            d_thresholds=d_thresholds)
    except (MalformedTable, TooFewSubjects, StatsError) as err:
        log.error("%s", err)
        return 1
    payload = json.dumps(report_to_dict(report), indent=2)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(payload + "\n")
    n_sig = sum(bool(fr.pairwise) for fr in report.features)
    log.info("wrote report to %s (%d significant features)", args.out, n_sig)
    return 0


def cmd_synth(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    specs = dict(DEFAULT_CONDITION_SPECS)
    if args.durations:
        durations = [float(x) for x in args.durations.split(",")]
        if len(durations) != 3:
            log.error("--durations needs three comma-separated values")
            return 1
        for condition, duration in zip(CONDITION_ORDER, durations):
            specs[condition] = replace(specs[condition], duration_s=duration)
    if args.fs:
        for condition in CONDITION_ORDER:
            specs[condition] = replace(specs[condition], fs_hz=args.fs)

    geometry = _geometry_from_args(args)
    for recording, truth in generate_cohort(args.subjects, specs, seed=args.seed):
        stem = f"{recording.subject_id}_{recording.condition.value.lower()}"
        write_recording_csv(recording, out_dir / f"{stem}.csv", geometry)
        sidecar = {
            "subject_id": recording.subject_id,
            "condition": recording.condition.value,
            "fs_hz": recording.fs_hz,
            "saccades": [[s.onset_idx, s.offset_idx, s.amplitude_deg,
                          s.peak_velocity_dps, s.duration_ms]
                         for s in truth.saccades],
            "fixations": [list(f) for f in truth.fixations],
            "blinks": [list(b) for b in truth.blinks],
            "artifacts": [list(a) for a in truth.artifacts],
        }
        with open(out_dir / f"{stem}.truth.json", "w", encoding="utf-8") as fh:
            fh.write(json.dumps(sidecar, indent=2) + "\n")
    log.info("wrote %d recordings to %s", args.subjects * 3, out_dir)
    return 0


def cmd_plot_data(args) -> int:
    try:
        rows = read_raw_table(args.input)
    except MalformedTable as err:
        log.error("%s", err)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for j, feature in enumerate(FEATURE_ORDER):
        with open(out_dir / f"{feature}.csv", "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["subject_id", "condition", "value"])
            for row in rows:
                value = row[2 + j]
                if value != "":
                    writer.writerow([row[0], row[1], value])
    log.info("wrote %d per-feature files to %s", len(FEATURE_ORDER), out_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazemetrics",
        description="Oculomotor feature extraction and condition statistics "
                    "for eye-tracking recordings")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--fs", type=float, default=100.0,
                        help="sampling rate in Hz (default 100)")
    common.add_argument("--screen", default="1920x1080",
                        help="screen resolution WxH in pixels")
    common.add_argument("--fov", default="95x63",
                        help="field of view HxV in degrees")

    p = sub.add_parser("extract", parents=[common],
                       help="extract the 31 features for a cohort directory")
    p.add_argument("--input", required=True, help="directory of recording CSVs")
    p.add_argument("--out", required=True, help="output feature table CSV")
    p.add_argument("--prl-mass", type=float, default=0.68,
                   help="probability mass enclosed by the PRL contour")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel workers for recordings")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("stats", help="run the statistical report on a feature table")
    p.add_argument("--input", required=True, help="feature table CSV")
    p.add_argument("--out", required=True, help="output report JSON")
    p.add_argument("--d-bands", default="",
                   help="5 ascending Cohen's d cut points, e.g. 0.2,0.5,0.8,1.2,2.0")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", parents=[common],
                       help="generate a synthetic cohort with ground truth")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--subjects", type=int, default=24)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--durations", default="",
                   help="per-condition durations in seconds, e.g. 900,600,120")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("plot-data", help="emit per-feature long-format value files")
    p.add_argument("--input", required=True, help="feature table CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_plot_data)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
