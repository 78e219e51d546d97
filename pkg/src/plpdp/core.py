"""
Shared domain types
===================

Frame grids, novelty (activation) curves, beat sequences and tempo ranges.

Frames are stored 0-based: frame index ``i`` lives at ``i / fps`` seconds,
which is frame ``i + 1`` of the 1-based grid ``[1:N]`` used in the
literature on dynamic-programming beat trackers.
"""

from __future__ import annotations

import contextlib
import sys
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ParameterError",
    "FrameGrid",
    "NoveltyCurve",
    "BeatSequence",
    "TempoRange",
    "bpm_to_frames",
    "validate_novelty",
    "open_output",
    "CLAMP_TOL",
    "DEFAULT_FPS",
]

DEFAULT_FPS = 100
CLAMP_TOL = 1e-9


class ParameterError(ValueError):
    """Invalid argument or configuration value."""


@dataclass(frozen=True)
class FrameGrid:
    """Uniform time axis of ``n_frames`` frames sampled at ``fps``."""

    fps: int = DEFAULT_FPS
    n_frames: int = 1

    def __post_init__(self):
        if int(self.fps) != self.fps or self.fps <= 0:
            raise ParameterError(f"fps must be a positive integer, got {self.fps}")
        if int(self.n_frames) != self.n_frames or self.n_frames < 1:
            raise ParameterError(f"n_frames must be >= 1, got {self.n_frames}")
        object.__setattr__(self, "fps", int(self.fps))
        object.__setattr__(self, "n_frames", int(self.n_frames))

    @property
    def duration(self) -> float:
        return self.n_frames / self.fps

    def times(self) -> np.ndarray:
        """Time stamp (seconds) of every frame."""
        return np.arange(self.n_frames) / self.fps

    def frames_to_time(self, frames) -> np.ndarray:
        return np.asarray(frames, dtype=float) / self.fps

    def time_to_frames(self, times) -> np.ndarray:
        return np.round(np.asarray(times, dtype=float) * self.fps).astype(int)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class NoveltyCurve:
    """Activation/novelty function with values in ``[0, 1]``.

    Use :func:`validate_novelty` to build one from raw data; the constructor
    only checks shape and range.
    """

    grid: FrameGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size != self.grid.n_frames:
            raise ParameterError(
                f"values must be 1-d of length {self.grid.n_frames}, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)) or values.min() < 0 or values.max() > 1:
            raise ParameterError("novelty values must be finite and within [0, 1]")
        object.__setattr__(self, "values", _readonly(values))

    @property
    def fps(self) -> int:
        return self.grid.fps

    def __len__(self):
        return self.grid.n_frames


@dataclass(frozen=True, eq=False)
class BeatSequence:
    """Strictly increasing beat frames (0-based) on a frame grid."""

    grid: FrameGrid
    frames: np.ndarray

    def __post_init__(self):
        frames = np.array(self.frames, dtype=np.int64).reshape(-1)
        if frames.size:
            if np.any(np.diff(frames) <= 0):
                raise ParameterError("beat frames must be strictly increasing")
            if frames[0] < 0 or frames[-1] >= self.grid.n_frames:
                raise ParameterError("beat frames must lie on the frame grid")
        object.__setattr__(self, "frames", _readonly(frames))

    @classmethod
    def from_times(cls, times, fps: int = DEFAULT_FPS, n_frames: int | None = None):
        """Quantize beat times (seconds) to the nearest frame.

        Beats that collapse onto the same frame are merged.
        """
        times = np.asarray(times, dtype=float).reshape(-1)
        if times.size and (not np.all(np.isfinite(times)) or times.min() < 0):
            raise ParameterError("beat times must be finite and non-negative")
        frames = np.unique(np.round(times * fps).astype(np.int64))
        if n_frames is None:
            n_frames = int(frames[-1]) + 1 if frames.size else 1
        return cls(FrameGrid(fps, n_frames), frames)

    @property
    def times(self) -> np.ndarray:
        return self.frames / self.grid.fps

    def __len__(self):
        return self.frames.size

    def __iter__(self):
        return iter(self.frames)


@dataclass(frozen=True)
class TempoRange:
    """Closed tempo interval in beats per minute."""

    min_bpm: int = 30
    max_bpm: int = 300

    def __post_init__(self):
        if not 0 < self.min_bpm < self.max_bpm:
            raise ParameterError(
                f"need 0 < min_bpm < max_bpm, got ({self.min_bpm}, {self.max_bpm})"
            )

    def __contains__(self, bpm) -> bool:
        return self.min_bpm <= bpm <= self.max_bpm

    def grid(self, step: float = 1.0) -> np.ndarray:
        """Tempo grid ``[min_bpm : step : max_bpm]``."""
        if step <= 0:
            raise ParameterError("tempo step must be positive")
        n = int(np.floor((self.max_bpm - self.min_bpm) / step + 1e-9)) + 1
        return self.min_bpm + step * np.arange(n)


def bpm_to_frames(bpm: float, fps: float = DEFAULT_FPS) -> float:
    """Beat period in frames for a tempo in BPM.

    >>> bpm_to_frames(120, 100)
    50.0
    """
    if not (bpm > 0 and fps > 0):
        raise ParameterError(f"bpm and fps must be positive, got ({bpm}, {fps})")
    return 60.0 * fps / bpm


def validate_novelty(values, fps: int = DEFAULT_FPS) -> NoveltyCurve:
    """Check raw activation values and wrap them as a :class:`NoveltyCurve`.

    Values that leave ``[0, 1]`` by at most ``CLAMP_TOL`` are clamped;
    anything further out, non-finite, or an empty input raises
    :class:`ParameterError`.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise ParameterError("novelty curve is empty")
    if not np.all(np.isfinite(values)):
        raise ParameterError("novelty curve contains non-finite values")
    if values.min() < -CLAMP_TOL or values.max() > 1 + CLAMP_TOL:
        raise ParameterError(
            f"novelty values out of range [0, 1]: min={values.min()}, max={values.max()}"
        )
    return NoveltyCurve(FrameGrid(fps, values.size), np.clip(values, 0.0, 1.0))


def open_output(target):
    """Context manager yielding a text stream for ``target``.

    ``None`` or ``"-"`` means standard output; objects with a ``write``
    method are used as they are; anything else is opened as a UTF-8 file.
    """
    if target is None or target == "-":
        return contextlib.nullcontext(sys.stdout)
    if hasattr(target, "write"):
        return contextlib.nullcontext(target)
    return open(target, "w", encoding="utf-8", newline="")
