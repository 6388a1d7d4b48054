"""Gaze dispersion features: BCEA ellipse, PRL count, axis-ratio index,
perpendicular spread, and sample/approximate entropy.

The contour ellipse area is ``2*pi*k*sd_x*sd_y*sqrt(1-rho^2)`` with k = 3
(0.95 probability mass), reported in square arcminutes.  The axis-ratio
index is the standard deviation along the major axis of the gaze covariance
ellipse over the one along the minor axis (>= 1 by ordering); the reported
squared-error measure is the variance perpendicular to the major axis,
i.e. the smaller covariance eigenvalue.  Entropies run in 3000-sample
windows (trailing partial window kept from 1000 samples) and average
across windows, with the tolerance frozen per window at 0.2 * SD.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .model import DEG2_TO_MINARC2, FixationInterval, GazeRecording
from .preprocess import smooth_gaze

BCEA_K = 3.0
ENTROPY_WINDOW = 3000
ENTROPY_MIN_TAIL = 1000
ENTROPY_MIN_SERIES = 100
ENTROPY_R_FACTOR = 0.2
PRL_GRID = 64
PRL_MASS = 0.68
PRL_MIN_POINTS = 10
PRL_BOX_PAD = 0.10


class DegenerateDistribution(ValueError):
    """Point cloud has no 2D spread (zero axis SD or |rho| = 1)."""


class TooFewPoints(ValueError):
    pass


class SeriesTooShort(ValueError):
    pass


@dataclass(frozen=True)
class EllipseStats:
    mean_h_deg: float
    mean_v_deg: float
    sd_h_deg: float
    sd_v_deg: float
    rho: float
    bcea_deg2: float
    bcea_minarc2: float
    major_axis_angle_rad: float
    sd_parallel_deg: float
    sd_perpendicular_deg: float
    gi: float
    mse_deg2: float


def ellipse_stats(x_deg: np.ndarray, y_deg: np.ndarray) -> EllipseStats:
    """Contour-ellipse statistics of a gaze point cloud (population SDs)."""
    x = np.asarray(x_deg, dtype=float)
    y = np.asarray(y_deg, dtype=float)
    if len(x) < 3 or len(x) != len(y):
        raise DegenerateDistribution(f"need >= 3 paired samples, got {len(x)}/{len(y)}")
    mean_h, mean_v = float(np.mean(x)), float(np.mean(y))
    sd_h = float(np.std(x))
    sd_v = float(np.std(y))
    if sd_h == 0.0 or sd_v == 0.0:
        raise DegenerateDistribution("zero spread along one axis")
    xc, yc = x - mean_h, y - mean_v
    rho = float(np.mean(xc * yc) / (sd_h * sd_v))
    if abs(rho) >= 1.0 - 1e-12:
        raise DegenerateDistribution(f"collinear gaze cloud (rho = {rho:.6f})")

    cov = np.array([[sd_h ** 2, rho * sd_h * sd_v],
                    [rho * sd_h * sd_v, sd_v ** 2]])
    eigvals, eigvecs = np.linalg.eigh(cov)  # ascending
    lam_minor, lam_major = float(eigvals[0]), float(eigvals[1])
    if lam_minor <= 0.0:
        raise DegenerateDistribution("degenerate covariance")
    if lam_major == lam_minor:
        angle = 0.0
    else:
        vx, vy = eigvecs[:, 1]
        angle = math.atan2(vy, vx)
        if angle <= -math.pi / 2:
            angle += math.pi
        elif angle > math.pi / 2:
            angle -= math.pi

    bcea_deg2 = 2.0 * math.pi * BCEA_K * sd_h * sd_v * math.sqrt(1.0 - rho ** 2)
    return EllipseStats(
        mean_h_deg=mean_h, mean_v_deg=mean_v, sd_h_deg=sd_h, sd_v_deg=sd_v,
        rho=rho, bcea_deg2=bcea_deg2,
        bcea_minarc2=bcea_deg2 * DEG2_TO_MINARC2,
        major_axis_angle_rad=angle,
        sd_parallel_deg=math.sqrt(lam_major),
        sd_perpendicular_deg=math.sqrt(lam_minor),
        gi=math.sqrt(lam_major / lam_minor),
        mse_deg2=lam_minor)


def _silverman_bandwidth(values: np.ndarray) -> float:
    """Per-axis rule-of-thumb bandwidth 0.9 * min(sd, IQR/1.349) * n^(-1/5)."""
    sd = float(np.std(values))
    q75, q25 = np.percentile(values, [75, 25])
    iqr = float(q75 - q25)
    scale = min(sd, iqr / 1.349) if iqr > 0 else sd
    if scale <= 0:
        raise DegenerateDistribution("zero spread, no kernel bandwidth")
    return 0.9 * scale * len(values) ** (-0.2)


def count_prls(x_deg: np.ndarray, y_deg: np.ndarray,
               mass: float = PRL_MASS, grid: int = PRL_GRID) -> int:
    """Number of gaze-density modes among fixation samples.

    A Gaussian kernel density estimate is evaluated on a grid over the padded
    bounding box; cells are thresholded at the level enclosing ``mass`` of
    the total probability, and 8-connected components above it are counted.
    """
    x = np.asarray(x_deg, dtype=float)
    y = np.asarray(y_deg, dtype=float)
    if len(x) < PRL_MIN_POINTS or len(x) != len(y):
        raise TooFewPoints(f"need >= {PRL_MIN_POINTS} fixation samples, got {len(x)}")
    hx, hy = _silverman_bandwidth(x), _silverman_bandwidth(y)

    def padded_axis(v: np.ndarray) -> np.ndarray:
        lo, hi = float(np.min(v)), float(np.max(v))
        pad = (hi - lo) * PRL_BOX_PAD
        if pad == 0.0:
            raise DegenerateDistribution("zero-extent bounding box")
        return np.linspace(lo - pad, hi + pad, grid)

    gx, gy = padded_axis(x), padded_axis(y)
    kx = np.exp(-0.5 * ((gx[:, None] - x[None, :]) / hx) ** 2)
    ky = np.exp(-0.5 * ((gy[:, None] - y[None, :]) / hy) ** 2)
    density = kx @ ky.T  # normalization constant cancels in the threshold

    flat = np.sort(density.ravel())[::-1]
    cum = np.cumsum(flat)
    target = mass * cum[-1]
    level = flat[int(np.searchsorted(cum, target))]
    above = density >= level
    _, count = ndimage.label(above, structure=np.ones((3, 3), dtype=int))
    return int(count)


def _entropy_windows(series: np.ndarray) -> list[np.ndarray]:
    n = len(series)
    if n <= ENTROPY_WINDOW:
        return [series]
    full = n // ENTROPY_WINDOW
    windows = [series[i * ENTROPY_WINDOW:(i + 1) * ENTROPY_WINDOW]
               for i in range(full)]
    tail = series[full * ENTROPY_WINDOW:]
    if len(tail) >= ENTROPY_MIN_TAIL:
        windows.append(tail)
    return windows


def _chebyshev_leq(w: np.ndarray, r: float) -> np.ndarray:
    """Boolean matrix |w_i - w_j| <= r, built in row blocks to bound memory."""
    n = len(w)
    out = np.empty((n, n), dtype=bool)
    block = max(1, (1 << 22) // max(n, 1))
    for a in range(0, n, block):
        np.less_equal(np.abs(w[a:a + block, None] - w[None, :]), r, out=out[a:a + block])
    return out


def _window_entropies(w: np.ndarray, m: int, r: float) -> tuple[float, float]:
    """(sample, approximate) entropy of one window at tolerance r."""
    n = len(w)
    if r == 0.0:
        return 0.0, 0.0
    d = _chebyshev_leq(w, r)

    nt = n - m  # template count for the self-match-free statistic
    match_m = d[:nt, :nt].copy()
    for k in range(1, m):
        match_m &= d[k:k + nt, k:k + nt]
    match_m1 = match_m & d[m:m + nt, m:m + nt]
    b = int(match_m.sum()) - nt
    a = int(match_m1.sum()) - nt
    sampen = math.inf if a <= 0 or b <= 0 else -math.log(a / b)

    # Self-matches included, template counts n-m+1 and n-m.
    na = n - m + 1
    cm = d[:na, :na].copy()
    for k in range(1, m):
        cm &= d[k:k + na, k:k + na]
    phi_m = float(np.mean(np.log(cm.sum(axis=1) / na)))
    nb = n - m
    cm1 = cm[:nb, :nb] & d[m:m + nb, m:m + nb]
    phi_m1 = float(np.mean(np.log(cm1.sum(axis=1) / nb)))
    return sampen, phi_m - phi_m1


def _entropy_pair(series: np.ndarray, m: int,
                  r: float | None) -> tuple[float, float]:
    series = np.asarray(series, dtype=float)
    if len(series) < ENTROPY_MIN_SERIES:
        raise SeriesTooShort(f"need >= {ENTROPY_MIN_SERIES} samples, got {len(series)}")
    samp, appr = [], []
    for w in _entropy_windows(series):
        rw = ENTROPY_R_FACTOR * float(np.std(w)) if r is None else r
        s, a = _window_entropies(w, m, rw)
        samp.append(s)
        appr.append(a)
    return float(np.mean(samp)), float(np.mean(appr))


def sample_entropy(series: np.ndarray, m: int = 2, r: float | None = None) -> float:
    """Windowed sample entropy (Chebyshev distance, self-matches excluded).

    ``r`` defaults to 0.2 * SD of each window; a constant window contributes
    0 by convention.
    """
    return _entropy_pair(series, m, r)[0]


def approximate_entropy(series: np.ndarray, m: int = 2, r: float | None = None) -> float:
    """Windowed approximate entropy (self-matches included, phi_m - phi_m+1)."""
    return _entropy_pair(series, m, r)[1]


def dispersion_features(recording: GazeRecording,
                        fixations: list[FixationInterval],
                        prl_mass: float = PRL_MASS,
                        prl_grid: int = PRL_GRID,
                        x_smooth: np.ndarray | None = None,
                        y_smooth: np.ndarray | None = None,
                        ) -> dict[str, float | None]:
    """The 13 dispersion-group features for one recording.

    Ellipse statistics use every non-missing (smoothed) gaze sample; the PRL
    count uses only samples inside detected fixations; entropies run on the
    gap-concatenated traces.  Any failing computation yields missing values
    for the features it owns.
    """
    if x_smooth is None or y_smooth is None:
        x_smooth, y_smooth = smooth_gaze(recording)
    valid = ~recording.gaze_missing
    x = x_smooth[valid]
    y = y_smooth[valid]

    out: dict[str, float | None] = dict.fromkeys((
        "mean_h_gaze_deg", "mean_v_gaze_deg", "sd_h_gaze_deg", "sd_v_gaze_deg",
        "rho", "bcea_minarc2", "n_prl", "gi", "mse_deg2",
        "sampen_h", "sampen_v", "apen_h", "apen_v"))
    if len(x) >= 1:
        out["mean_h_gaze_deg"] = float(np.mean(x))
        out["mean_v_gaze_deg"] = float(np.mean(y))

    try:
        es = ellipse_stats(x, y)
        out.update(sd_h_gaze_deg=es.sd_h_deg, sd_v_gaze_deg=es.sd_v_deg,
                   rho=es.rho, bcea_minarc2=es.bcea_minarc2, gi=es.gi,
                   mse_deg2=es.mse_deg2)
    except DegenerateDistribution:
        pass

    if fixations:
        fx = np.concatenate([x_smooth[f.start_idx:f.end_idx] for f in fixations])
        fy = np.concatenate([y_smooth[f.start_idx:f.end_idx] for f in fixations])
        keep = ~(np.isnan(fx) | np.isnan(fy))
        try:
            out["n_prl"] = float(count_prls(fx[keep], fy[keep], prl_mass, prl_grid))
        except (TooFewPoints, DegenerateDistribution):
            pass

    for series, samp_key, apen_key in ((x, "sampen_h", "apen_h"),
                                       (y, "sampen_v", "apen_v")):
        try:
            s, a = _entropy_pair(series, m=2, r=None)
        except SeriesTooShort:
            continue
        out[samp_key] = s if math.isfinite(s) else None
        out[apen_key] = a if math.isfinite(a) else None
    return out
