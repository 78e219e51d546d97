"""
Post-processing trackers
========================

Convert an activation curve into a beat sequence:

- :func:`sppk_track` -- every picked peak is a beat
- :func:`dp_track` -- dynamic programming with a global IBI
- :func:`plpdp_track` -- dynamic programming driven by frame-wise
  confidence and IBI derived from PLP curves
- :func:`hmm_track` -- Viterbi decoding of a beat-phase/tempo HMM whose
  tempo may only change on beats
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .conditions import PeakPickConfig, TempoCondition, pick_peaks, to_condition
from .core import BeatSequence, NoveltyCurve, ParameterError, TempoRange, bpm_to_frames, open_output
from .plp import (
    PlpCurve,
    TempogramConfig,
    fourier_tempogram,
    kernel_tempo_range,
    multi_kernel_plp,
    optimal_kernels,
    plp,
)

__all__ = [
    "DpConfig",
    "DpState",
    "HmmConfig",
    "sppk_track",
    "penalty",
    "sequence_score",
    "dp_forward",
    "dp_backward",
    "dp_track",
    "estimate_global_ibi",
    "plpdp_track",
    "plpdp_condition",
    "track_plpdp",
    "tempo_transition",
    "HmmStateSpace",
    "hmm_viterbi",
    "hmm_track",
    "write_beats",
]


# ---------------------------------------------------------------------------
# peak picking

def sppk_track(activation: NoveltyCurve, cfg: PeakPickConfig | None = None) -> BeatSequence:
    """Every peak found by :func:`~plpdp.conditions.pick_peaks` is a beat."""
    return BeatSequence(activation.grid, pick_peaks(activation.values, cfg))


# ---------------------------------------------------------------------------
# dynamic programming

def penalty(delta, delta0):
    """Tempo-consistency penalty ``-(log2(delta / delta0))**2``.

    Works on scalars and arrays; the maximum 0 is reached at
    ``delta == delta0``.
    """
    delta = np.asarray(delta, dtype=float)
    delta0 = np.asarray(delta0, dtype=float)
    if np.any(delta <= 0) or np.any(delta0 <= 0):
        raise ParameterError("penalty needs positive intervals")
    out = -np.log2(delta / delta0) ** 2
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DpConfig:
    """Global-tempo DP settings.

    Parameters
    ----------
    delta0_frames : float >= 1
        Preassigned inter-beat interval in frames.
    lambda0 : float >= 0
        Weight of the tempo penalty against the activation.
    search_window_factor : float > 1
        Fast mode only considers predecessors between ``delta/w`` and
        ``w*delta`` frames back.
    exact : bool
        Search all earlier frames (the textbook recursion).
    """

    delta0_frames: float = 50.0
    lambda0: float = 100.0
    search_window_factor: float = 4.0
    exact: bool = False

    def __post_init__(self):
        if not self.delta0_frames >= 1:
            raise ParameterError("delta0_frames must be >= 1")
        if not self.lambda0 >= 0:
            raise ParameterError("lambda0 must be >= 0")
        if not self.search_window_factor > 1:
            raise ParameterError("search_window_factor must be > 1")


@dataclass(frozen=True, eq=False)
class DpState:
    """Forward-pass tables, indexed 1-based with a sentinel at 0.

    ``score[n]`` is the best score of a beat sequence ending at frame ``n``
    (``score[0] = 0``); ``predecessor[n]`` is the previous beat, 0 meaning
    none.
    """

    score: np.ndarray
    predecessor: np.ndarray


def sequence_score(frames, activation, confidence, est_ibi) -> float:
    """Score of a beat sequence under frame-wise confidence and IBI.

    ``sum(activation[b_k]) + sum_k confidence[b_k] * penalty(b_k - b_{k-1}, est_ibi[b_k])``
    with 0-based frames.  Scalar confidence and IBI give the global-tempo DP
    score.
    """
    frames = np.asarray(frames, dtype=np.int64)
    act = np.asarray(activation, dtype=float)
    if frames.size == 0:
        return 0.0
    total = float(act[frames].sum())
    if frames.size > 1:
        cur = frames[1:]
        conf = np.broadcast_to(np.asarray(confidence, dtype=float), act.shape)[cur]
        ibi = np.broadcast_to(np.asarray(est_ibi, dtype=float), act.shape)[cur]
        total += float(np.sum(conf * penalty(np.diff(frames), ibi)))
    return total


def dp_forward(
    activation,
    confidence,
    est_ibi,
    exact: bool = True,
    window_factor: float = 4.0,
) -> DpState:
    """Forward recursion of the frame-wise conditioned DP.

    For 1-based frames ``n = 1..N``::

        D(n) = act(n) + max(0, max_{m in [1, n-1]} D(m) + conf(n) * penalty(n - m, ibi(n)))

    ``P(n)`` is 0 when the outer max picks 0, else the arg-max ``m``
    (smallest ``m`` on ties).  In fast mode ``m`` is restricted to
    ``[n - ceil(w*ibi(n)), n - floor(ibi(n)/w)]``.
    """
    act = np.asarray(activation, dtype=float)
    conf = np.broadcast_to(np.asarray(confidence, dtype=float), act.shape)
    ibi = np.broadcast_to(np.asarray(est_ibi, dtype=float), act.shape)
    n_frames = act.size
    score = np.zeros(n_frames + 1)
    pred = np.zeros(n_frames + 1, dtype=np.int64)
    log_ibi = np.log2(ibi)
    # log2 of every possible distance, 1..N-1 (index 0 unused)
    log_dist = np.log2(np.maximum(np.arange(n_frames + 1), 1))
    for n in range(1, n_frames + 1):
        i = n - 1
        if exact:
            lo, hi = 1, n - 1
        else:
            lo = max(1, n - math.ceil(window_factor * ibi[i]))
            hi = min(n - 1, n - math.floor(ibi[i] / window_factor))
        best = 0.0
        best_m = 0
        if hi >= lo:
            m = np.arange(lo, hi + 1)
            cand = score[lo:hi + 1] - conf[i] * (log_dist[n - m] - log_ibi[i]) ** 2
            j = int(np.argmax(cand))
            if cand[j] > 0.0:
                best = float(cand[j])
                best_m = lo + j
        score[n] = act[i] + best
        pred[n] = best_m
    return DpState(score, pred)


def dp_backward(state: DpState) -> np.ndarray:
    """Backtrack from ``argmax D`` (over frames 0..N) to 0-based beat frames."""
    a = int(np.argmax(state.score))
    if a == 0:
        return np.empty(0, dtype=np.int64)
    chain = [a]
    while state.predecessor[chain[-1]] != 0:
        chain.append(int(state.predecessor[chain[-1]]))
    return np.asarray(chain[::-1], dtype=np.int64) - 1


def dp_track(activation: NoveltyCurve, cfg: DpConfig | None = None) -> BeatSequence:
    """Beat tracking by dynamic programming with a global tempo.

    Maximises ``sum activation(b_k) + lambda0 * sum penalty(b_k - b_{k-1}, delta0)``
    over all beat sequences.
    """
    if cfg is None:
        cfg = DpConfig()
    state = dp_forward(
        activation.values,
        cfg.lambda0,
        cfg.delta0_frames,
        exact=cfg.exact,
        window_factor=cfg.search_window_factor,
    )
    return BeatSequence(activation.grid, dp_backward(state))


def estimate_global_ibi(activation: NoveltyCurve, kernel_size_sec: float = 3.0) -> float:
    """Global IBI in frames from the median tempo of the local kernels.

    Used by the DP tracker when no reference beats are available.
    """
    cfg = TempogramConfig(kernel_size_sec, 1, kernel_tempo_range(kernel_size_sec))
    kernels = optimal_kernels(fourier_tempogram(activation, cfg), cfg)
    return bpm_to_frames(float(np.median(kernels.tempo_bpm)), activation.fps)


def plpdp_track(
    activation: NoveltyCurve,
    condition: TempoCondition,
    exact: bool = False,
    window_factor: float = 4.0,
    return_state: bool = False,
):
    """Beat tracking with frame-wise confidence and IBI (PLPDP).

    Same recursion as :func:`dp_track` with the global weight and IBI
    replaced by ``condition.confidence[n]`` and
    ``condition.est_ibi_frames[n]`` of the current frame ``n``.

    Parameters
    ----------
    activation : NoveltyCurve
    condition : TempoCondition
        Must share the activation's frame grid.
    exact : bool
        Search every earlier frame for the predecessor.
    window_factor : float
        Predecessor window of the fast mode, see :func:`dp_forward`.
    return_state : bool
        Also return the :class:`DpState`.
    """
    if condition.grid != activation.grid:
        raise ParameterError("activation and condition are on different frame grids")
    state = dp_forward(
        activation.values,
        condition.confidence,
        condition.est_ibi_frames,
        exact=exact,
        window_factor=window_factor,
    )
    beats = BeatSequence(activation.grid, dp_backward(state))
    return (beats, state) if return_state else beats


def plpdp_condition(
    activation: NoveltyCurve,
    kernel_sizes=(1, 3, 5),
    hop_frames: int = 1,
    max_bpm: int = 300,
) -> tuple[PlpCurve, TempoCondition]:
    """PLP curve (product over ``kernel_sizes``) and its tempo condition."""
    if len(kernel_sizes) == 1:
        k = kernel_sizes[0]
        curve = plp(
            activation,
            TempogramConfig(k, hop_frames, kernel_tempo_range(k, max_bpm=max_bpm)),
        )
    else:
        _, curve = multi_kernel_plp(activation, kernel_sizes, hop_frames, max_bpm=max_bpm)
    return curve, to_condition(curve)


def track_plpdp(
    activation: NoveltyCurve,
    kernel_sizes=(1, 3, 5),
    hop_frames: int = 1,
    exact: bool = False,
) -> BeatSequence:
    """Full PLPDP pipeline: PLP product, tempo condition, DP.

    ``kernel_sizes=(3,)`` gives the single-kernel variant.
    """
    _, condition = plpdp_condition(activation, kernel_sizes, hop_frames)
    return plpdp_track(activation, condition, exact=exact)


# ---------------------------------------------------------------------------
# hidden Markov model

def tempo_transition(psi_prev, psi_cur, lambda_trans: float):
    """Tempo-change likelihood ``exp(-lambda_trans * |psi_cur/psi_prev - 1|)``."""
    psi_prev = np.asarray(psi_prev, dtype=float)
    if np.any(psi_prev <= 0):
        raise ParameterError("previous tempo must be positive")
    if lambda_trans < 0:
        raise ParameterError("lambda_trans must be >= 0")
    out = np.exp(-lambda_trans * np.abs(np.asarray(psi_cur, dtype=float) / psi_prev - 1.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HmmConfig:
    """Settings of the beat-phase/tempo HMM.

    Parameters
    ----------
    lambda_trans : float >= 0
        Steepness of the tempo-change likelihood; 100 is the common
        default, 0 makes every tempo equally likely after a beat.
    tempo_range : TempoRange
    n_tempo_states : int, optional
        Number of tempo states; ``None`` uses every integer beat period in
        the range, otherwise log-spaced periods are used.
    observation_beat_fraction : float in (0, 1]
        The first ``ceil(period * observation_beat_fraction)`` phase frames
        of a beat period are beat states and emit the activation.
    observation_lambda : float > 1
        Non-beat states emit ``(1 - activation) / observation_lambda``.
    correct : bool
        Move each decoded beat to the activation maximum inside its
        beat-state run.
    """

    lambda_trans: float = 100.0
    tempo_range: TempoRange = TempoRange(30, 300)
    n_tempo_states: int | None = None
    observation_beat_fraction: float = 1 / 16
    observation_lambda: float = 16.0
    correct: bool = True

    def __post_init__(self):
        if self.lambda_trans < 0:
            raise ParameterError("lambda_trans must be >= 0")
        if self.n_tempo_states is not None and self.n_tempo_states < 1:
            raise ParameterError("n_tempo_states must be >= 1")
        if not 0 < self.observation_beat_fraction <= 1:
            raise ParameterError("observation_beat_fraction must lie in (0, 1]")
        if self.observation_lambda <= 1:
            raise ParameterError("observation_lambda must be > 1")


class HmmStateSpace:
    """Flat indexing of (tempo state, phase) pairs.

    Tempo state ``i`` has period ``periods[i]`` frames and phases
    ``0..periods[i]-1``; phase 0 is the beat.
    """

    def __init__(self, cfg: HmmConfig, fps: int):
        lo = round(60.0 * fps / cfg.tempo_range.max_bpm)
        hi = round(60.0 * fps / cfg.tempo_range.min_bpm)
        lo = max(lo, 1)
        if hi < lo:
            raise ParameterError("tempo range is empty after discretization")
        periods = np.arange(lo, hi + 1)
        if cfg.n_tempo_states is not None and cfg.n_tempo_states < periods.size:
            periods = np.unique(
                np.round(np.geomspace(lo, hi, cfg.n_tempo_states)).astype(int)
            )
        self.fps = fps
        self.periods = periods
        self.bpm = 60.0 * fps / periods
        self.first = np.concatenate(([0], np.cumsum(periods)[:-1]))
        self.last = self.first + periods - 1
        self.n_states = int(periods.sum())
        self.tempo_of = np.repeat(np.arange(periods.size), periods)
        self.phase_of = np.arange(self.n_states) - self.first[self.tempo_of]
        beat_len = np.ceil(periods * cfg.observation_beat_fraction).astype(int)
        self.is_beat = self.phase_of < beat_len[self.tempo_of]
        # each state's deterministic predecessor (unused for phase 0)
        self.prev = np.arange(self.n_states) - 1

    def log_transition(self, lambda_trans: float) -> np.ndarray:
        """``[i, j]``: log-probability of tempo ``i`` -> ``j`` at a beat,
        normalised over ``j``."""
        f = tempo_transition(self.bpm[:, None], self.bpm[None, :], lambda_trans)
        f = f / f.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore"):
            return np.log(f)


def _log_observations(values: np.ndarray, cfg: HmmConfig):
    with np.errstate(divide="ignore"):
        beat = np.log(values)
        non_beat = np.log((1.0 - values) / cfg.observation_lambda)
    return beat, non_beat


@numba.njit(cache=True)
def _viterbi(obs_beat, obs_non, is_beat, first, last, tempo_of, log_t):
    n = obs_beat.size
    n_states = is_beat.size
    n_tempi = first.size
    delta = np.empty(n_states)
    for s in range(n_states):
        delta[s] = -np.log(n_states) + (obs_beat[0] if is_beat[s] else obs_non[0])
    # back-pointers only for phase-0 states; other moves are deterministic
    back = np.zeros((n, n_tempi), dtype=np.int32)
    wrap = np.empty(n_tempi)
    new = np.empty(n_states)
    for t in range(1, n):
        for j in range(n_tempi):
            best = -np.inf
            arg = 0
            for i in range(n_tempi):
                v = delta[last[i]] + log_t[i, j]
                if v > best:
                    best = v
                    arg = i
            wrap[j] = best
            back[t, j] = arg
        for s in range(1, n_states):
            new[s] = delta[s - 1]
        for j in range(n_tempi):
            new[first[j]] = wrap[j]
        for s in range(n_states):
            delta[s] = new[s] + (obs_beat[t] if is_beat[s] else obs_non[t])

    path = np.empty(n, dtype=np.int64)
    state = 0
    for s in range(1, n_states):
        if delta[s] > delta[state]:
            state = s
    log_prob = delta[state]
    for t in range(n - 1, -1, -1):
        path[t] = state
        if t == 0:
            break
        tempo = tempo_of[state]
        if state == first[tempo]:
            state = last[back[t, tempo]]
        else:
            state -= 1
    return path, log_prob


def hmm_viterbi(activation: NoveltyCurve, cfg: HmmConfig | None = None):
    """Most likely state path.

    The initial state distribution is uniform.  Inside a beat period the
    phase advances by one frame per step; at the last phase the chain moves
    to phase 0 of any tempo state with the normalised tempo-change
    likelihood.  Ties resolve to the lowest state index.

    Returns
    -------
    path : np.ndarray of int
        Flat state index per frame.
    log_prob : float
        Log-likelihood of the path.
    space : HmmStateSpace
    """
    if cfg is None:
        cfg = HmmConfig()
    space = HmmStateSpace(cfg, activation.fps)
    obs_beat, obs_non = _log_observations(activation.values, cfg)
    path, log_prob = _viterbi(
        obs_beat,
        obs_non,
        space.is_beat,
        space.first.astype(np.int64),
        space.last.astype(np.int64),
        space.tempo_of.astype(np.int64),
        space.log_transition(cfg.lambda_trans),
    )
    return path, float(log_prob), space


def hmm_track(activation: NoveltyCurve, cfg: HmmConfig | None = None) -> BeatSequence:
    """Beat tracking with the beat-phase/tempo HMM.

    Beats are the frames where the decoded phase wraps to 0.  With
    ``cfg.correct`` each beat is moved to the activation maximum among the
    following frames that stay in beat states.
    """
    if cfg is None:
        cfg = HmmConfig()
    path, _, space = hmm_viterbi(activation, cfg)
    beats = np.flatnonzero(space.phase_of[path] == 0)
    if cfg.correct and beats.size:
        in_beat = space.is_beat[path]
        values = activation.values
        corrected = []
        for b in beats:
            end = b + 1
            while end < path.size and in_beat[end] and space.phase_of[path[end]] != 0:
                end += 1
            corrected.append(b + int(np.argmax(values[b:end])))
        beats = np.unique(corrected)
    return BeatSequence(activation.grid, beats)


# ---------------------------------------------------------------------------
# output

def write_beats(path, beats: BeatSequence) -> None:
    """One beat time in seconds per line, six decimals."""
    with open_output(path) as fh:
        fh.write(format_beats(beats))


def format_beats(beats: BeatSequence) -> str:
    return "".join(f"{t:.6f}\n" for t in beats.times)
