"""Gap segmentation and per-segment Savitzky-Golay smoothing of gaze traces."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .model import GazeRecording, Segment

DEFAULT_WINDOW = 11
DEFAULT_ORDER = 3


class InvalidWindow(ValueError):
    """Smoothing window is even or not larger than the polynomial order."""


def segment(recording: GazeRecording) -> list[Segment]:
    """Maximal runs of consecutive non-missing gaze samples, in order."""
    return mask_runs(~recording.gaze_missing)


def mask_runs(keep: np.ndarray) -> list[Segment]:
    """Maximal True-runs of a boolean mask as Segments (end exclusive)."""
    keep = np.asarray(keep, dtype=bool)
    if not keep.any():
        return []
    padded = np.concatenate(([False], keep, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    starts, ends = edges[0::2], edges[1::2]
    return [Segment(int(a), int(b)) for a, b in zip(starts, ends)]


@lru_cache(maxsize=None)
def _center_coeffs(window: int, order: int) -> np.ndarray:
    """Least-squares smoothing weights for the central sample of a full window."""
    half = window // 2
    pos = np.arange(-half, half + 1, dtype=float)
    design = np.vander(pos, order + 1, increasing=True)
    # Row of the hat matrix that evaluates the fit at position 0.
    coeffs = np.linalg.pinv(design)[0]
    return coeffs


@lru_cache(maxsize=None)
def _edge_coeffs(n_points: int, eval_at: int, order: int) -> np.ndarray:
    """Weights fitting ``order`` to ``n_points`` samples, evaluated at index ``eval_at``."""
    eff_order = min(order, n_points - 1)
    pos = np.arange(n_points, dtype=float) - eval_at
    design = np.vander(pos, eff_order + 1, increasing=True)
    return np.linalg.pinv(design)[0]


def savgol_smooth(y: np.ndarray, window: int = DEFAULT_WINDOW,
                  order: int = DEFAULT_ORDER) -> np.ndarray:
    """Savitzky-Golay smoothing of one gap-free segment.

    Interior samples use the standard symmetric window; the first and last
    ``window // 2`` samples are fitted on shrinking asymmetric windows of the
    same polynomial order (no padding, so nothing is ever read across a gap).
    Segments shorter than ``window`` are returned unchanged.
    """
    if window % 2 == 0 or window <= order:
        raise InvalidWindow(f"window must be odd and larger than order, "
                            f"got window={window}, order={order}")
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < window:
        return y.copy()

    half = window // 2
    out = np.convolve(y, _center_coeffs(window, order)[::-1], mode="valid")
    out = np.concatenate((np.empty(half), out, np.empty(half)))
    for i in range(half):
        # Left edge: window [0, i + half], evaluated at sample i.
        out[i] = _edge_coeffs(i + half + 1, i, order) @ y[: i + half + 1]
        # Right edge, mirrored: same fit applied to the reversed tail.
        j = n - 1 - i
        out[j] = _edge_coeffs(i + half + 1, i, order) @ y[j - half:][::-1]
    return out


def smooth_gaze(recording: GazeRecording, window: int = DEFAULT_WINDOW,
                order: int = DEFAULT_ORDER) -> tuple[np.ndarray, np.ndarray]:
    """Smooth x/y traces segment by segment; missing samples stay NaN."""
    x = np.full(recording.n_samples, np.nan)
    y = np.full(recording.n_samples, np.nan)
    for seg in segment(recording):
        sl = slice(seg.start_idx, seg.end_idx)
        x[sl] = savgol_smooth(recording.x_deg[sl], window, order)
        y[sl] = savgol_smooth(recording.y_deg[sl], window, order)
    return x, y
