"""How steep should the HMM's tempo-change likelihood be?

Sweeps the transition steepness over a few values on tracks with strong
tempo changes.  Steep transitions (large values) keep the tempo fixed and
miss beats when it moves; zero lets the tempo jump freely.
Run with ``python demos/lambda_sweep.py``.
"""

from plpdp import grid_search_lambda_trans, random_corpus, synth_corpus

tracks = synth_corpus(random_corpus(6, duration_sec=30, seed=11, kinds=("ramp", "rubato")))
rows = grid_search_lambda_trans([(t.activation, t.ref_times) for t in tracks], [0, 1, 5, 20, 100])
print(f"{'lambda':>8} {'F1':>7} {'P':>7} {'R':>7}")
for row in rows:
    print(f"{row['lambda_trans']:>8g} {row['f1']:>7.3f} {row['precision']:>7.3f} {row['recall']:>7.3f}")
