"""Five post-processing trackers on idealised activations.

Builds a small synthetic corpus (constant, ramp, step and rubato tempo
trajectories), turns the reference beats into activations with a tiny
floor value, and scores every tracker against the references.
Run with ``python demos/compare_trackers.py``.
"""

import numpy as np

from plpdp import (
    DpConfig,
    HmmConfig,
    dp_track,
    fmeasure,
    hmm_track,
    mean_report,
    random_corpus,
    sppk_track,
    synth_corpus,
    track_plpdp,
)

tracks = synth_corpus(random_corpus(8, duration_sec=30, seed=7))


def dp_with_reference_tempo(track):
    # DP+GT: the preassigned interval is the mean reference interval
    delta0 = float(np.mean(np.diff(track.ref_times))) * track.activation.fps
    return dp_track(track.activation, DpConfig(delta0))


trackers = {
    "sppk": lambda t: sppk_track(t.activation),
    "dp+gt": dp_with_reference_tempo,
    "plpdp": lambda t: track_plpdp(t.activation),
    "plpdp-g3": lambda t: track_plpdp(t.activation, kernel_sizes=(3,)),
    "hmm": lambda t: hmm_track(t.activation, HmmConfig(lambda_trans=100)),
    "hmm-t0": lambda t: hmm_track(t.activation, HmmConfig(lambda_trans=0)),
}

print(f"{'track':<14}" + "".join(f"{name:>10}" for name in trackers))
reports = {name: [] for name in trackers}
for track in tracks:
    row = f"{track.name:<14}"
    for name, run in trackers.items():
        rep = fmeasure(run(track), track.ref_times)
        reports[name].append(rep)
        row += f"{rep.f1:>10.3f}"
    print(row)
print(f"{'mean F1':<14}" + "".join(f"{mean_report(r)['f1']:>10.3f}" for r in reports.values()))
print(f"{'mean recall':<14}" + "".join(f"{mean_report(r)['recall']:>10.3f}" for r in reports.values()))
