"""
plpdp
=====

Beat-tracking post-processing for frame-wise beat activations: predominant
local pulse (PLP) curves, PLP-derived tempo conditions, a PLP-conditioned
dynamic-programming tracker (PLPDP), and the baselines it is usually
compared with (peak picking, global-tempo DP, a beat-phase/tempo HMM), plus
an evaluation harness with synthetic activations.
"""

from .conditions import (
    PeakPickConfig,
    TempoCondition,
    fallback_condition,
    pick_peaks,
    right_anchors,
    to_condition,
    write_condition_csv,
)
from .core import (
    DEFAULT_FPS,
    BeatSequence,
    FrameGrid,
    NoveltyCurve,
    ParameterError,
    TempoRange,
    bpm_to_frames,
    validate_novelty,
)
from .harness import (
    EvalReport,
    StabilityReport,
    SynthTrack,
    TrackSpec,
    beats_from_tempo,
    fmeasure,
    grid_search_lambda_trans,
    ibi_progression,
    lambda_grid,
    mean_report,
    random_corpus,
    stability_report,
    synth_activation,
    synth_corpus,
    tempo_stability,
    trim_beats,
    write_eval_csv,
    write_ibi_csv,
    write_stability_csv,
)
from .io import ParseError, read_activation, read_annotation, write_activation
from .plp import (
    PlpCurve,
    Tempogram,
    TempogramConfig,
    combine_plp,
    fourier_tempogram,
    kernel_tempo_range,
    multi_kernel_plp,
    optimal_kernels,
    plp,
    write_plp_csv,
    write_tempogram_csv,
)
from .trackers import (
    DpConfig,
    DpState,
    HmmConfig,
    HmmStateSpace,
    dp_backward,
    dp_forward,
    dp_track,
    estimate_global_ibi,
    hmm_track,
    hmm_viterbi,
    penalty,
    plpdp_condition,
    plpdp_track,
    sequence_score,
    sppk_track,
    tempo_transition,
    track_plpdp,
    write_beats,
)

__version__ = "0.1.0"
