"""
Predominant local pulse
=======================

Fourier tempogram of a novelty curve, the locally optimal windowed
sinusoidal kernels read off from it, their overlap-add into a PLP curve,
and the element-wise product of PLP curves computed with several kernel
sizes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.signal

from .core import FrameGrid, NoveltyCurve, ParameterError, TempoRange, open_output

__all__ = [
    "TempogramConfig",
    "Tempogram",
    "OptimalKernel",
    "OptimalKernels",
    "PlpCurve",
    "fourier_tempogram",
    "optimal_kernels",
    "plp",
    "combine_plp",
    "multi_kernel_plp",
    "kernel_tempo_range",
    "write_plp_csv",
    "write_tempogram_csv",
]

# tempo bins per FFT batch; bounds memory on long tracks
_TEMPO_BATCH = 32


def kernel_tempo_range(kernel_size_sec: float, floor_bpm: int = 30, max_bpm: int = 300) -> TempoRange:
    """Tempo range for which a kernel holds at least one full period.

    Gives ``[60:300]`` for a 1 s kernel and ``[30:300]`` for 3 s and 5 s.
    """
    min_bpm = max(floor_bpm, int(np.ceil(60.0 / kernel_size_sec - 1e-9)))
    return TempoRange(min_bpm, max_bpm)


@dataclass(frozen=True)
class TempogramConfig:
    """Parameters of the Fourier tempogram and the PLP overlap-add.

    Parameters
    ----------
    kernel_size_sec : float > 0
        Kernel (window) size in seconds.
    hop_frames : int >= 1
        Distance between analysis frames.
    tempo_range : TempoRange
        Tempo interval searched for the predominant pulse.  ``None`` picks
        :func:`kernel_tempo_range` for the kernel size.
    tempo_step_bpm : float > 0
        Tempo grid resolution.
    tie_rtol : float >= 0
        Peaks of the magnitude over tempo that come within this relative
        distance of the frame maximum are treated as tied; ties go to the
        lowest tempo.  Idealised pulse trains have (almost) equal magnitude
        at every harmonic of the pulse rate, and a fundamental that falls
        between grid bins loses a fraction of a percent to an on-grid
        harmonic; 1 % absorbs both.  Only local maxima along the tempo axis
        compete, so bins next to the winning peak never count as ties.
    """

    kernel_size_sec: float = 3.0
    hop_frames: int = 1
    tempo_range: TempoRange | None = None
    tempo_step_bpm: float = 1.0
    tie_rtol: float = 0.01

    def __post_init__(self):
        if not self.kernel_size_sec > 0:
            raise ParameterError(f"kernel size must be positive, got {self.kernel_size_sec}")
        if int(self.hop_frames) != self.hop_frames or self.hop_frames < 1:
            raise ParameterError(f"hop must be a positive integer, got {self.hop_frames}")
        if not self.tempo_step_bpm > 0:
            raise ParameterError("tempo step must be positive")
        if self.tie_rtol < 0:
            raise ParameterError("tie_rtol must be non-negative")
        if self.tempo_range is None:
            object.__setattr__(self, "tempo_range", kernel_tempo_range(self.kernel_size_sec))

    def window_length(self, fps: int) -> int:
        length = int(round(self.kernel_size_sec * fps))
        if length < 2:
            raise ParameterError(
                f"kernel of {self.kernel_size_sec} s spans {length} frame(s) at {fps} fps; need >= 2"
            )
        return length

    def tempi(self) -> np.ndarray:
        return self.tempo_range.grid(self.tempo_step_bpm)


@dataclass(frozen=True, eq=False)
class Tempogram:
    """Complex Fourier tempogram.

    ``coefficients[i, j]`` belongs to analysis frame ``centers[i]`` and
    tempo ``tempi[j]``.  ``active[i]`` is False when the novelty curve is
    identically zero under the window of that analysis frame.
    """

    coefficients: np.ndarray
    tempi: np.ndarray
    centers: np.ndarray
    active: np.ndarray
    grid: FrameGrid
    window: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.coefficients)


@dataclass(frozen=True)
class OptimalKernel:
    center_frame: int
    tempo_bpm: float
    phase: float
    magnitude: float


@dataclass(frozen=True, eq=False)
class OptimalKernels:
    """Optimal sinusoidal kernels of all analysis frames (struct of arrays).

    The kernel centred at frame ``c`` is
    ``w(m - c) * cos(2*pi*tempo/60 * m/fps - phase)`` for frames ``m`` under
    the window ``w``.
    """

    center_frame: np.ndarray
    tempo_bpm: np.ndarray
    phase: np.ndarray
    magnitude: np.ndarray

    def __len__(self):
        return self.center_frame.size

    def __getitem__(self, i) -> OptimalKernel:
        return OptimalKernel(
            int(self.center_frame[i]),
            float(self.tempo_bpm[i]),
            float(self.phase[i]),
            float(self.magnitude[i]),
        )


@dataclass(frozen=True, eq=False)
class PlpCurve:
    grid: FrameGrid
    values: np.ndarray
    kernel_tag: str = "combined"
    kernels: OptimalKernels | None = field(default=None, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n_frames,):
            raise ParameterError("PLP values do not match the frame grid")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.grid.n_frames


def _window(length: int) -> np.ndarray:
    return np.hanning(length)


def fourier_tempogram(novelty: NoveltyCurve, cfg: TempogramConfig) -> Tempogram:
    """Short-time Fourier analysis of a novelty curve on a BPM grid.

    The coefficient for analysis frame ``n`` and tempo ``theta`` is

        sum_m  novelty(m) * w(m - n + L//2) * exp(-2j*pi * theta/60 * m/fps)

    with a Hann window ``w`` of ``L = round(kernel_size_sec * fps)`` frames;
    frames outside the curve count as zero.  Time is measured from the start
    of the curve so that phases of different frames are comparable.
    """
    grid = novelty.grid
    fps, n = grid.fps, grid.n_frames
    length = cfg.window_length(fps)
    window = _window(length)
    tempi = cfg.tempi()
    centers = np.arange(0, n, cfg.hop_frames)

    x = novelty.values
    t = np.arange(n) / fps
    # correlation offset: window index j of centre c sits at frame c - L//2 + j
    lag = length - 1 - length // 2
    coef = np.empty((centers.size, tempi.size), dtype=complex)
    for start in range(0, tempi.size, _TEMPO_BATCH):
        freqs = tempi[start:start + _TEMPO_BATCH] / 60.0
        modulated = x[:, None] * np.exp(-2j * np.pi * t[:, None] * freqs[None, :])
        full = scipy.signal.fftconvolve(modulated, window[::-1, None], mode="full", axes=0)
        coef[:, start:start + freqs.size] = full[lag:lag + n][centers]

    # exact zero test on an integer count, immune to FFT round-off
    nonzero = np.concatenate(([0], np.cumsum(x > 0)))
    lo = np.clip(centers - length // 2, 0, n)
    hi = np.clip(centers - length // 2 + length, 0, n)
    active = nonzero[hi] - nonzero[lo] > 0
    coef[~active] = 0.0
    return Tempogram(coef, tempi, centers, active, grid, window)


def optimal_kernels(tempogram: Tempogram, cfg: TempogramConfig) -> OptimalKernels:
    """Predominant tempo and phase of every analysis frame.

    The tempo is the arg-max of the coefficient magnitude (lowest tempo on
    ties, see ``cfg.tie_rtol``).  The phase ``phi`` is chosen so that
    ``cos(2*pi*tempo/60*t - phi)`` has maximal correlation with the windowed
    novelty, i.e. ``phi = -angle(coefficient) mod 2*pi``.  Inactive frames get
    the lowest tempo and zero phase.
    """
    mag = tempogram.magnitude
    peak = mag.max(axis=1, keepdims=True)
    # local maxima along the tempo axis (plateaus count), edges included
    left = np.concatenate([np.full((mag.shape[0], 1), -np.inf), mag[:, :-1]], axis=1)
    right = np.concatenate([mag[:, 1:], np.full((mag.shape[0], 1), -np.inf)], axis=1)
    is_peak = (mag >= left) & (mag >= right)
    tied = is_peak & (mag >= peak * (1.0 - cfg.tie_rtol))
    idx = np.argmax(tied, axis=1)
    idx[~tempogram.active] = 0
    rows = np.arange(idx.size)
    best = tempogram.coefficients[rows, idx]
    phase = np.mod(-np.angle(best), 2 * np.pi)
    phase[~tempogram.active] = 0.0
    # mod can return 2*pi for -0.0 angles
    phase[phase >= 2 * np.pi] = 0.0
    return OptimalKernels(
        center_frame=tempogram.centers.copy(),
        tempo_bpm=tempogram.tempi[idx],
        phase=phase,
        magnitude=np.abs(best),
    )


def _overlap_add(kernels: OptimalKernels, window: np.ndarray, grid: FrameGrid) -> np.ndarray:
    n, fps = grid.n_frames, grid.fps
    length = window.size
    pad = length
    acc = np.zeros(n + 2 * pad)
    weight = np.zeros(n + 2 * pad)
    start = kernels.center_frame - length // 2
    omega = 2 * np.pi * kernels.tempo_bpm / 60.0 / fps
    for j in range(length):
        m = start + j
        # one write per centre at each offset j, so fancy-index += is safe
        acc[m + pad] += window[j] * np.cos(omega * m - kernels.phase)
        weight[m + pad] += window[j]
    acc = acc[pad:pad + n]
    weight = weight[pad:pad + n]
    out = np.zeros(n)
    covered = weight > 1e-12
    out[covered] = acc[covered] / weight[covered]
    return out


def _interpolate_kernels(kernels: OptimalKernels, n_frames: int, fps: int) -> OptimalKernels:
    """Kernels for every frame from kernels at a coarser hop.

    Tempo is interpolated linearly between neighbouring analysis frames.
    For the phase, each neighbour's kernel is extended to the frame and the
    two local phases are blended along the shorter arc, so the result does
    not depend on how far the frame is from the start of the track.
    Frames past the last analysis frame extend its kernel.
    """
    frames = np.arange(n_frames)
    centers = kernels.center_frame
    omega = 2 * np.pi * kernels.tempo_bpm / 60.0 / fps
    # cosine argument of each analysis kernel at its own centre
    local = omega * centers - kernels.phase

    right = np.clip(np.searchsorted(centers, frames, side="right"), 1, centers.size - 1)
    left = right - 1
    if centers.size == 1:
        left = right = np.zeros(n_frames, dtype=int)
    span = np.maximum(centers[right] - centers[left], 1)
    w = np.clip((frames - centers[left]) / span, 0.0, 1.0)
    from_left = local[left] + omega[left] * (frames - centers[left])
    from_right = local[right] - omega[right] * (centers[right] - frames)
    diff = np.angle(np.exp(1j * (from_right - from_left)))
    local_at = from_left + w * diff

    tempo = (1 - w) * kernels.tempo_bpm[left] + w * kernels.tempo_bpm[right]
    phase = np.mod(2 * np.pi * tempo / 60.0 / fps * frames - local_at, 2 * np.pi)
    return OptimalKernels(
        center_frame=frames,
        tempo_bpm=tempo,
        phase=phase,
        magnitude=(1 - w) * kernels.magnitude[left] + w * kernels.magnitude[right],
    )


def plp(novelty: NoveltyCurve, cfg: TempogramConfig | None = None) -> PlpCurve:
    """Predominant local pulse curve of a novelty function.

    Overlap-adds the unit-amplitude windowed optimal kernel of every frame
    (interpolated between analysis frames when the hop exceeds one frame),
    divides by the overlap-added window (so values are weighted averages of
    cosines), half-wave rectifies and clips to ``[0, 1]``.

    Parameters
    ----------
    novelty : NoveltyCurve
    cfg : TempogramConfig, optional
        Defaults to a 3 s kernel.

    Returns
    -------
    PlpCurve
        Tagged ``"k<kernel size>"``; the fitted kernels are attached.

    Examples
    --------
    >>> import numpy as np
    >>> from plpdp.core import validate_novelty
    >>> x = np.zeros(1000); x[::50] = 1
    >>> curve = plp(validate_novelty(x), TempogramConfig(kernel_size_sec=3))
    >>> int(np.argmax(curve.values[480:520])) + 480
    500
    """
    if cfg is None:
        cfg = TempogramConfig()
    tgram = fourier_tempogram(novelty, cfg)
    kernels = optimal_kernels(tgram, cfg)
    dense = kernels
    if cfg.hop_frames > 1:
        dense = _interpolate_kernels(kernels, novelty.grid.n_frames, novelty.grid.fps)
    values = _overlap_add(dense, tgram.window, novelty.grid)
    values = np.clip(values, 0.0, 1.0)
    return PlpCurve(novelty.grid, values, _kernel_tag(cfg.kernel_size_sec), kernels)


def _kernel_tag(kernel_size_sec: float) -> str:
    return f"k{kernel_size_sec:g}"


def combine_plp(curves: Sequence[PlpCurve]) -> PlpCurve:
    """Element-wise product of PLP curves sharing one frame grid."""
    curves = list(curves)
    if not curves:
        raise ParameterError("need at least one PLP curve")
    grid = curves[0].grid
    if any(c.grid != grid for c in curves[1:]):
        raise ParameterError("PLP curves are on different frame grids")
    values = np.prod(np.stack([c.values for c in curves]), axis=0)
    return PlpCurve(grid, values, "combined")


def multi_kernel_plp(
    novelty: NoveltyCurve,
    kernel_sizes: Sequence[float] = (1, 3, 5),
    hop_frames: int = 1,
    tempo_step_bpm: float = 1.0,
    max_bpm: int = 300,
) -> tuple[list[PlpCurve], PlpCurve]:
    """PLP curves for several kernel sizes and their product.

    Each kernel gets the tempo range from :func:`kernel_tempo_range`.
    """
    curves = []
    for k in kernel_sizes:
        cfg = TempogramConfig(
            kernel_size_sec=k,
            hop_frames=hop_frames,
            tempo_range=kernel_tempo_range(k, max_bpm=max_bpm),
            tempo_step_bpm=tempo_step_bpm,
        )
        curves.append(plp(novelty, cfg))
    return curves, combine_plp(curves)


def write_plp_csv(path, curves: Sequence[PlpCurve]) -> None:
    """One row per frame: ``frame_time_sec`` then one column per curve."""
    curves = list(curves)
    if not curves:
        raise ParameterError("nothing to export")
    grid = curves[0].grid
    times = grid.times()
    with open_output(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame_time_sec"] + [f"plp_{c.kernel_tag}" for c in curves])
        for i, t in enumerate(times):
            writer.writerow([f"{t:.6f}"] + [f"{c.values[i]:.6f}" for c in curves])


def write_tempogram_csv(path, tempogram: Tempogram) -> None:
    """Tempogram magnitudes, one row per analysis frame, one column per BPM."""
    mag = tempogram.magnitude
    times = tempogram.centers / tempogram.grid.fps
    with open_output(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame_time_sec"] + [f"{b:g}" for b in tempogram.tempi])
        for t, row in zip(times, mag):
            writer.writerow([f"{t:.2f}"] + [f"{v:.6g}" for v in row])
