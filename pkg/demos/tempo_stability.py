"""Tempo stability and inter-beat-interval progression.

A track counts as stable when every local tempo stays within 4 % of the
track's mean tempo.  Steady tracks pass, expressive ones do not; the IBI
progression shows where the tempo moves.
Run with ``python demos/tempo_stability.py``.
"""

from plpdp import TrackSpec, beats_from_tempo, ibi_progression, stability_report

specs = [
    TrackSpec("constant", 30, 96, name="steady"),
    TrackSpec("ramp", 30, 100, bpm_end=130, name="accelerando"),
    TrackSpec("rubato", 30, 80, depth=0.15, period_sec=4, name="rubato"),
    TrackSpec("step", 30, 120, bpm_end=123, name="tiny step"),
]
tracks = [(s.name, beats_from_tempo(s)) for s in specs]
report = stability_report(tracks)
for name, flag in zip(report.track_ids, report.stable):
    print(f"{name:<12} {'stable' if flag else 'unstable'}")
print(f"stable tempo rate: {100 * report.rate:.1f}%")

print("\nfirst intervals of the rubato track (time, IBI in s):")
for t, ibi in ibi_progression(tracks[2][1])[:8]:
    print(f"  {t:6.2f}  {ibi:.3f}")
