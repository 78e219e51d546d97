"""
Evaluation harness
==================

Synthetic activations from reference beats, beat F-measure, tempo
stability statistics, inter-beat-interval progressions, and a generator of
synthetic tempo trajectories (constant, ramp, step, rubato).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .core import (
    DEFAULT_FPS,
    BeatSequence,
    FrameGrid,
    NoveltyCurve,
    ParameterError,
    TempoRange,
    open_output,
)
from .trackers import HmmConfig, hmm_track

__all__ = [
    "EvalReport",
    "StabilityReport",
    "TrackSpec",
    "SynthTrack",
    "synth_activation",
    "fmeasure",
    "match_beats",
    "mean_report",
    "trim_beats",
    "tempo_stability",
    "stability_report",
    "ibi_progression",
    "tempo_curve",
    "beats_from_tempo",
    "synth_corpus",
    "random_corpus",
    "grid_search_lambda_trans",
    "lambda_grid",
    "write_eval_csv",
    "write_ibi_csv",
    "write_stability_csv",
]

DEFAULT_TOLERANCE = 0.070


@dataclass(frozen=True)
class EvalReport:
    f1: float
    precision: float
    recall: float
    n_matched: int
    n_est: int
    n_ref: int
    tolerance_sec: float = DEFAULT_TOLERANCE


def _as_times(beats) -> np.ndarray:
    if isinstance(beats, BeatSequence):
        return beats.times
    return np.asarray(beats, dtype=float).reshape(-1)


def synth_activation(
    reference,
    fps: int = DEFAULT_FPS,
    epsilon: float = 1e-6,
    n_frames: int | None = None,
) -> NoveltyCurve:
    """Idealised activation: ``1 - epsilon`` on reference beat frames,
    ``epsilon`` everywhere else.

    Parameters
    ----------
    reference : BeatSequence or array-like of seconds
    fps : int
        Frame rate of the activation (ignored for a BeatSequence, which
        carries its own grid).
    epsilon : float in (0, 0.5)
    n_frames : int, optional
        Length of the activation; defaults to the reference grid, or one
        second past the last beat for plain times.

    Examples
    --------
    >>> act = synth_activation([1.0, 2.0], fps=100)
    >>> act.values[[100, 200]]
    array([0.999999, 0.999999])
    """
    if not 0 < epsilon < 0.5:
        raise ParameterError(f"epsilon must be in (0, 0.5), got {epsilon}")
    if isinstance(reference, BeatSequence):
        frames = reference.frames
        fps = reference.grid.fps
        if n_frames is None:
            n_frames = reference.grid.n_frames
    else:
        times = _as_times(reference)
        if times.size and (not np.all(np.isfinite(times)) or times.min() < 0):
            raise ParameterError("reference times must be finite and non-negative")
        frames = np.round(times * fps).astype(np.int64)
    if frames.size == 0:
        raise ParameterError("reference beat sequence is empty")
    if n_frames is None:
        n_frames = int(frames.max()) + 1 + int(fps)
    if frames.max() >= n_frames:
        raise ParameterError("reference beat lies beyond the activation grid")
    values = np.full(n_frames, float(epsilon))
    values[frames] = 1.0 - epsilon
    return NoveltyCurve(FrameGrid(fps, n_frames), values)


def match_beats(est, ref, tolerance_sec: float = DEFAULT_TOLERANCE) -> list[tuple[int, int]]:
    """One-to-one matching of estimated to reference beats.

    Reference beats are scanned in time order; each takes the nearest
    still unmatched estimate within ``+-tolerance_sec`` (the earlier one on
    a tie).

    Returns
    -------
    list of (est_index, ref_index)
        Indices into the time-sorted sequences.
    """
    est = np.sort(_as_times(est))
    ref = np.sort(_as_times(ref))
    used = np.zeros(est.size, dtype=bool)
    pairs = []
    for i, r in enumerate(ref):
        lo = np.searchsorted(est, r - tolerance_sec, side="left")
        hi = np.searchsorted(est, r + tolerance_sec, side="right")
        best, best_d = -1, np.inf
        for j in range(lo, hi):
            d = abs(est[j] - r)
            if not used[j] and d <= tolerance_sec and d < best_d:
                best, best_d = j, d
        if best >= 0:
            used[best] = True
            pairs.append((best, i))
    return pairs


def fmeasure(est, ref, tolerance_sec: float = DEFAULT_TOLERANCE) -> EvalReport:
    """Beat F-measure with one-to-one matching inside ``+-tolerance_sec``.

    Matching follows :func:`match_beats`.  Precision and recall are 1 when
    both sequences are empty; an empty estimate against a non-empty
    reference scores 0.

    Parameters
    ----------
    est, ref : BeatSequence or array-like of seconds
    tolerance_sec : float

    Examples
    --------
    >>> r = fmeasure([1.0, 2.0, 3.0], [1.02, 2.5, 3.0])
    >>> round(r.f1, 4), r.n_matched
    (0.6667, 2)
    """
    if not tolerance_sec > 0:
        raise ParameterError("tolerance must be positive")
    n_est, n_ref = _as_times(est).size, _as_times(ref).size
    if n_est == 0 and n_ref == 0:
        return EvalReport(1.0, 1.0, 1.0, 0, 0, 0, tolerance_sec)
    matched = len(match_beats(est, ref, tolerance_sec))
    precision = matched / n_est if n_est else 0.0
    recall = matched / n_ref if n_ref else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalReport(f1, precision, recall, matched, n_est, n_ref, tolerance_sec)


def mean_report(reports: Sequence[EvalReport]) -> dict:
    """Dataset means of F1, precision and recall (per-track averages)."""
    reports = list(reports)
    if not reports:
        raise ParameterError("no reports to average")
    return {
        "f1": float(np.mean([r.f1 for r in reports])),
        "precision": float(np.mean([r.precision for r in reports])),
        "recall": float(np.mean([r.recall for r in reports])),
        "n_tracks": len(reports),
    }


def trim_beats(beats, start_sec: float, end_sec: float) -> np.ndarray:
    """Beat times inside ``[start_sec, end_sec]``."""
    t = _as_times(beats)
    return t[(t >= start_sec) & (t <= end_sec)]


def tempo_stability(ref, tol: float = 0.04) -> bool:
    """Whether every normalised local tempo of a track lies in ``1 +- tol``.

    Local tempi are ``60 / IBI``; they are normalised by their mean.  With
    fewer than two beats the track is reported unstable with a warning.
    """
    t = _as_times(ref)
    if t.size < 2:
        warnings.warn("tempo stability needs at least two beats; reporting unstable")
        return False
    ibi = np.diff(t)
    if np.any(ibi <= 0):
        raise ParameterError("beat times must be strictly increasing")
    tempi = 60.0 / ibi
    normalized = tempi / tempi.mean()
    return bool(np.all((normalized >= 1 - tol) & (normalized <= 1 + tol)))


@dataclass(frozen=True)
class StabilityReport:
    track_ids: tuple
    stable: tuple
    rate: float = field(init=False)

    def __post_init__(self):
        if len(self.track_ids) != len(self.stable):
            raise ParameterError("track ids and flags differ in length")
        rate = sum(self.stable) / len(self.stable) if self.stable else 0.0
        object.__setattr__(self, "rate", rate)


def stability_report(tracks: Iterable[tuple[str, object]], tol: float = 0.04) -> StabilityReport:
    """Stability flag for every ``(track_id, beats)`` pair and the dataset rate."""
    ids, flags = [], []
    for track_id, beats in tracks:
        ids.append(track_id)
        flags.append(tempo_stability(beats, tol))
    return StabilityReport(tuple(ids), tuple(flags))


def ibi_progression(beats) -> list[tuple[float, float]]:
    """``(b_i, b_{i+1} - b_i)`` pairs in seconds."""
    t = _as_times(beats)
    if t.size < 2:
        return []
    return [(float(a), float(b - a)) for a, b in zip(t[:-1], t[1:])]


# ---------------------------------------------------------------------------
# synthetic tempo trajectories

_KINDS = ("constant", "ramp", "step", "rubato")


@dataclass(frozen=True)
class TrackSpec:
    """Tempo trajectory of a synthetic track.

    ``constant`` holds ``bpm``; ``ramp`` moves linearly from ``bpm`` to
    ``bpm_end``; ``step`` jumps from ``bpm`` to ``bpm_end`` at
    ``step_time_sec``; ``rubato`` is
    ``bpm * (1 + depth * sin(2*pi*t/period_sec + phase))``.  The first beat
    falls at ``offset_sec`` and beats continue up to ``offset_sec +
    duration_sec``.
    """

    kind: str = "constant"
    duration_sec: float = 60.0
    bpm: float = 120.0
    bpm_end: float | None = None
    step_time_sec: float | None = None
    depth: float = 0.0
    period_sec: float = 8.0
    phase: float = 0.0
    offset_sec: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ParameterError(f"unknown trajectory kind {self.kind!r}")
        if not self.duration_sec > 0 or self.offset_sec < 0:
            raise ParameterError("duration must be positive and offset non-negative")
        if self.kind in ("ramp", "step") and self.bpm_end is None:
            raise ParameterError(f"{self.kind} trajectory needs bpm_end")
        if self.kind == "rubato" and not (0 <= self.depth < 1 and self.period_sec > 0):
            raise ParameterError("rubato needs 0 <= depth < 1 and a positive period")
        lo, hi = self.tempo_bounds()
        if lo < 30 or hi > 300:
            raise ParameterError(f"tempo trajectory leaves [30, 300] BPM: [{lo:g}, {hi:g}]")

    def tempo_bounds(self) -> tuple[float, float]:
        if self.kind == "rubato":
            return self.bpm * (1 - self.depth), self.bpm * (1 + self.depth)
        end = self.bpm if self.bpm_end is None else self.bpm_end
        return min(self.bpm, end), max(self.bpm, end)


def tempo_curve(spec: TrackSpec, t: np.ndarray) -> np.ndarray:
    """Tempo in BPM at times ``t`` (seconds from the first beat)."""
    t = np.asarray(t, dtype=float)
    if spec.kind == "constant":
        return np.full_like(t, spec.bpm)
    if spec.kind == "ramp":
        return spec.bpm + (spec.bpm_end - spec.bpm) * np.clip(t / spec.duration_sec, 0, 1)
    if spec.kind == "step":
        switch = spec.duration_sec / 2 if spec.step_time_sec is None else spec.step_time_sec
        return np.where(t < switch, spec.bpm, spec.bpm_end)
    return spec.bpm * (1 + spec.depth * np.sin(2 * np.pi * t / spec.period_sec + spec.phase))


def beats_from_tempo(spec: TrackSpec, resolution_sec: float = 1e-3) -> np.ndarray:
    """Beat times (seconds) where the integrated tempo crosses whole beats."""
    if spec.kind == "constant":
        period = 60.0 / spec.bpm
        n = int(np.floor(spec.duration_sec / period + 1e-9)) + 1
        return spec.offset_sec + period * np.arange(n)
    t = np.linspace(0, spec.duration_sec, int(round(spec.duration_sec / resolution_sec)) + 1)
    rate = tempo_curve(spec, t) / 60.0
    phase = np.concatenate(([0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * np.diff(t))))
    n = int(np.floor(phase[-1] + 1e-9)) + 1
    return spec.offset_sec + np.interp(np.arange(n), phase, t)


@dataclass(frozen=True, eq=False)
class SynthTrack:
    spec: TrackSpec
    ref_times: np.ndarray
    reference: BeatSequence
    activation: NoveltyCurve

    @property
    def name(self) -> str:
        return self.spec.name


def synth_corpus(
    specs: Iterable[TrackSpec],
    fps: int = DEFAULT_FPS,
    epsilon: float = 1e-6,
    tail_sec: float = 1.0,
) -> list[SynthTrack]:
    """Reference beats and synthetic activations for every spec.

    Each activation extends ``tail_sec`` past the end of its trajectory.
    """
    tracks = []
    for spec in specs:
        times = beats_from_tempo(spec)
        n_frames = int(np.ceil((spec.offset_sec + spec.duration_sec + tail_sec) * fps)) + 1
        ref = BeatSequence.from_times(times, fps, n_frames)
        act = synth_activation(ref, epsilon=epsilon)
        tracks.append(SynthTrack(spec, times, ref, act))
    return tracks


def random_corpus(
    n_tracks: int = 50,
    duration_sec: float = 60.0,
    seed: int = 0,
    kinds: Sequence[str] = _KINDS,
) -> list[TrackSpec]:
    """Random trajectory specs cycling through ``kinds``; all tempi stay in
    [30, 300] BPM.  The same seed always gives the same specs."""
    rng = np.random.default_rng(seed)
    specs = []
    for i in range(n_tracks):
        kind = kinds[i % len(kinds)]
        offset = float(rng.uniform(0.2, 1.0))
        if kind == "constant":
            spec = TrackSpec(kind, duration_sec, bpm=float(rng.uniform(40, 240)), offset_sec=offset)
        elif kind == "ramp":
            start = float(rng.uniform(50, 200))
            end = float(np.clip(start * rng.uniform(0.7, 1.3), 30, 300))
            spec = TrackSpec(kind, duration_sec, bpm=start, bpm_end=end, offset_sec=offset)
        elif kind == "step":
            start = float(rng.uniform(50, 200))
            end = float(np.clip(start * rng.uniform(0.75, 1.33), 30, 300))
            spec = TrackSpec(
                kind, duration_sec, bpm=start, bpm_end=end,
                step_time_sec=float(rng.uniform(0.3, 0.7) * duration_sec), offset_sec=offset,
            )
        else:
            base = float(rng.uniform(60, 180))
            spec = TrackSpec(
                kind, duration_sec, bpm=base, depth=float(rng.uniform(0.1, 0.3)),
                period_sec=float(rng.uniform(1.5, 6)), phase=float(rng.uniform(0, 2 * np.pi)),
                offset_sec=offset,
            )
        specs.append(replace(spec, name=f"{kind}_{i:03d}"))
    return specs


# ---------------------------------------------------------------------------
# tempo-transition grid search

def lambda_grid() -> list[float]:
    """Default sweep: steps of 1 up to 20, then steps of 5 up to 100."""
    return [float(x) for x in range(0, 21)] + [float(x) for x in range(25, 101, 5)]


def grid_search_lambda_trans(
    corpus: Sequence[tuple[NoveltyCurve, object]],
    lambdas: Sequence[float] | None = None,
    tempo_range: TempoRange | None = None,
    tolerance_sec: float = DEFAULT_TOLERANCE,
) -> list[dict]:
    """Mean F1/P/R of the HMM tracker for every tempo-transition steepness.

    Parameters
    ----------
    corpus : sequence of (activation, reference) pairs
        References are BeatSequences or arrays of seconds.
    lambdas : sequence of float, optional
        Defaults to :func:`lambda_grid`.

    Returns
    -------
    list of dict
        One row per distinct lambda in increasing order with keys
        ``lambda_trans, f1, precision, recall, n_tracks``.
    """
    corpus = list(corpus)
    if not corpus:
        raise ParameterError("grid search needs a non-empty corpus")
    lambdas = lambda_grid() if lambdas is None else sorted({float(x) for x in lambdas})
    if not lambdas:
        raise ParameterError("grid search needs at least one lambda")
    rows = []
    for lam in lambdas:
        cfg = HmmConfig(lambda_trans=lam) if tempo_range is None else HmmConfig(lam, tempo_range)
        reports = [fmeasure(hmm_track(act, cfg), ref, tolerance_sec) for act, ref in corpus]
        rows.append({"lambda_trans": lam, **mean_report(reports)})
    return rows


# ---------------------------------------------------------------------------
# CSV output

def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_eval_csv(path, rows: Iterable[tuple[str, str, EvalReport]]) -> None:
    """Columns ``track_id, ppt, f1, p, r``."""
    with open_output(path) as fh:
        w = _writer(fh)
        w.writerow(["track_id", "ppt", "f1", "p", "r"])
        for track_id, ppt, rep in rows:
            w.writerow([track_id, ppt, f"{rep.f1:.6f}", f"{rep.precision:.6f}", f"{rep.recall:.6f}"])


def write_ibi_csv(path, progression: Sequence[tuple[float, float]]) -> None:
    with open_output(path) as fh:
        w = _writer(fh)
        w.writerow(["time_sec", "ibi_sec"])
        for t, ibi in progression:
            w.writerow([f"{t:.6f}", f"{ibi:.6f}"])


def write_stability_csv(path, report: StabilityReport) -> None:
    with open_output(path) as fh:
        w = _writer(fh)
        w.writerow(["track_id", "stable"])
        for track_id, flag in zip(report.track_ids, report.stable):
            w.writerow([track_id, int(flag)])
