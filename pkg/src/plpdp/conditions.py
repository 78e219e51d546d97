"""
Tempo conditions from PLP curves
================================

Simple peak picking (height, prominence and distance thresholds) and the
conversion of a PLP curve into piecewise-constant confidence and
estimated inter-beat-interval (IBI) functions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import FrameGrid, ParameterError, bpm_to_frames, open_output
from .plp import PlpCurve

__all__ = [
    "PeakPickConfig",
    "TempoCondition",
    "local_maxima",
    "peak_prominences",
    "pick_peaks",
    "right_anchors",
    "to_condition",
    "fallback_condition",
    "write_condition_csv",
]


@dataclass(frozen=True)
class PeakPickConfig:
    min_height: float = 0.1
    min_distance_frames: int = 7
    min_prominence: float = 0.1

    def __post_init__(self):
        if self.min_distance_frames < 1:
            raise ParameterError("min_distance_frames must be >= 1")


@dataclass(frozen=True, eq=False)
class TempoCondition:
    """Frame-wise confidence and estimated IBI (frames) for PLPDP."""

    grid: FrameGrid
    confidence: np.ndarray
    est_ibi_frames: np.ndarray

    def __post_init__(self):
        conf = np.array(self.confidence, dtype=float)
        ibi = np.array(self.est_ibi_frames, dtype=float)
        n = self.grid.n_frames
        if conf.shape != (n,) or ibi.shape != (n,):
            raise ParameterError("condition arrays must match the frame grid")
        if not (np.all(np.isfinite(conf)) and np.all(np.isfinite(ibi))):
            raise ParameterError("condition arrays must be finite")
        if np.any(ibi <= 0):
            raise ParameterError("estimated IBI must be positive")
        if conf.min() < 0:
            raise ParameterError("confidence must be non-negative")
        conf.setflags(write=False)
        ibi.setflags(write=False)
        object.__setattr__(self, "confidence", conf)
        object.__setattr__(self, "est_ibi_frames", ibi)

    @classmethod
    def constant(cls, grid: FrameGrid, confidence: float, ibi_frames: float):
        n = grid.n_frames
        return cls(grid, np.full(n, float(confidence)), np.full(n, float(ibi_frames)))


def local_maxima(x: np.ndarray) -> np.ndarray:
    """Indices of local maxima, flat tops reported at their (lower) middle.

    The first and last sample are never maxima.
    """
    x = np.asarray(x, dtype=float)
    peaks = []
    i, last = 1, x.size - 1
    while i < last:
        if x[i - 1] < x[i]:
            ahead = i + 1
            while ahead < last and x[ahead] == x[i]:
                ahead += 1
            if x[ahead] < x[i]:
                peaks.append((i + ahead - 1) // 2)
                i = ahead
        i += 1
    return np.asarray(peaks, dtype=np.int64)


def peak_prominences(x: np.ndarray, peaks: np.ndarray) -> np.ndarray:
    """Topographic prominence of each peak.

    On each side, walk away from the peak until a strictly higher sample
    or the array edge and keep the lowest value seen; the prominence is the
    peak height minus the higher of the two minima.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty(len(peaks))
    for k, p in enumerate(peaks):
        height = x[p]
        left_min = height
        i = p
        while i >= 0 and x[i] <= height:
            left_min = min(left_min, x[i])
            i -= 1
        right_min = height
        i = p
        while i < x.size and x[i] <= height:
            right_min = min(right_min, x[i])
            i += 1
        out[k] = height - max(left_min, right_min)
    return out


def _select_by_distance(peaks: np.ndarray, heights: np.ndarray, distance: int) -> np.ndarray:
    keep = np.ones(peaks.size, dtype=bool)
    # decreasing height; equal heights keep the earlier frame first
    order = np.lexsort((peaks, -heights))
    for i in order:
        if not keep[i]:
            continue
        j = i - 1
        while j >= 0 and peaks[i] - peaks[j] < distance:
            keep[j] = False
            j -= 1
        j = i + 1
        while j < peaks.size and peaks[j] - peaks[i] < distance:
            keep[j] = False
            j += 1
    return keep


def pick_peaks(curve, cfg: PeakPickConfig | None = None) -> np.ndarray:
    """Simple peak picking (SPPK).

    Filters local maxima by height, then by minimum distance (greedy in
    decreasing height order; among equal heights the earlier frame wins),
    then by prominence.  The filter order matches the peak finder in
    ``scipy.signal``.

    Parameters
    ----------
    curve : array-like or object with a ``values`` attribute
    cfg : PeakPickConfig, optional
        Defaults to height 0.1, distance 7 frames, prominence 0.1.

    Returns
    -------
    peaks : np.ndarray of int
        Strictly increasing 0-based frame indices.
    """
    if cfg is None:
        cfg = PeakPickConfig()
    x = np.asarray(getattr(curve, "values", curve), dtype=float).reshape(-1)
    if x.size == 0:
        return np.empty(0, dtype=np.int64)
    if not np.all(np.isfinite(x)):
        raise ParameterError("peak picking needs finite values")
    peaks = local_maxima(x)
    peaks = peaks[x[peaks] >= cfg.min_height]
    if cfg.min_distance_frames > 1 and peaks.size > 1:
        peaks = peaks[_select_by_distance(peaks, x[peaks], cfg.min_distance_frames)]
    if peaks.size:
        peaks = peaks[peak_prominences(x, peaks) >= cfg.min_prominence]
    return peaks


def right_anchors(values: np.ndarray, peaks: np.ndarray, anchor_epsilon: float = 0.01) -> np.ndarray:
    """First frame after each peak where the curve drops below
    ``anchor_epsilon`` or stops descending, whichever comes first."""
    values = np.asarray(values, dtype=float)
    n = values.size
    anchors = np.empty(len(peaks), dtype=np.int64)
    for k, p in enumerate(peaks):
        m = p + 1
        while m < n - 1 and values[m] >= anchor_epsilon and values[m] > values[m + 1]:
            m += 1
        anchors[k] = min(m, n - 1)
    return anchors


def fallback_condition(grid: FrameGrid, confidence: float = 0.1, bpm: float = 120.0) -> TempoCondition:
    """Constant condition used when fewer than two peaks are available."""
    return TempoCondition.constant(grid, confidence, bpm_to_frames(bpm, grid.fps))


def to_condition(
    plp_curve: PlpCurve,
    peaks=None,
    anchor_epsilon: float = 0.01,
    fallback_bpm: float = 120.0,
    fallback_confidence: float = 0.1,
) -> TempoCondition:
    """Piecewise-constant confidence and IBI functions from a PLP curve.

    The curve is cut at the right-side anchor of every peak.  Between the
    anchors of peaks ``b_k`` and ``b_{k+1}`` the estimated IBI is
    ``b_{k+1} - b_k`` and the confidence is the mean PLP height of the two
    peaks.  Frames up to the first anchor take the values of the first
    segment, frames after the last anchor those of the last segment.

    With a single peak the IBI falls back to ``fallback_bpm`` and the
    confidence is that peak's height; with no peak both fall back to the
    defaults.

    Parameters
    ----------
    plp_curve : PlpCurve
    peaks : array-like of int, optional
        Peak frames, by default :func:`pick_peaks` with default thresholds.
    """
    grid = plp_curve.grid
    values = plp_curve.values
    if peaks is None:
        peaks = pick_peaks(values)
    peaks = np.asarray(peaks, dtype=np.int64)
    if peaks.size == 0:
        return fallback_condition(grid, fallback_confidence, fallback_bpm)
    if peaks.size == 1:
        return fallback_condition(grid, float(values[peaks[0]]), fallback_bpm)

    heights = values[peaks]
    anchors = right_anchors(values, peaks, anchor_epsilon)
    seg_ibi = np.diff(peaks).astype(float)
    seg_conf = 0.5 * (heights[:-1] + heights[1:])
    # segment k covers (a_k, a_{k+1}]; frame n belongs to the first k with n <= a_{k+1}
    n = np.arange(grid.n_frames)
    seg = np.searchsorted(anchors[1:], n, side="left")
    seg = np.clip(seg, 0, seg_ibi.size - 1)
    return TempoCondition(grid, seg_conf[seg], seg_ibi[seg])


def write_condition_csv(path, condition: TempoCondition) -> None:
    """Columns ``frame_time_sec, confidence, est_ibi_sec``."""
    fps = condition.grid.fps
    with open_output(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame_time_sec", "confidence", "est_ibi_sec"])
        for i in range(condition.grid.n_frames):
            writer.writerow(
                [
                    f"{i / fps:.6f}",
                    f"{condition.confidence[i]:.6f}",
                    f"{condition.est_ibi_frames[i] / fps:.6f}",
                ]
            )
