"""Predominant local pulse on a pulse train with a hole in it.

A 120 BPM pulse train loses one pulse halfway through.  The local Fourier
fit still predicts a pulse at the gap, which is what lets the conditioned
DP place a beat there.  Run with ``python demos/plp_walkthrough.py``.
"""

import numpy as np

from plpdp import TempogramConfig, fourier_tempogram, multi_kernel_plp, optimal_kernels, validate_novelty

FPS = 100
x = np.zeros(20 * FPS)
x[25::50] = 1.0
gap = 1025
x[gap] = 0.0
novelty = validate_novelty(x, FPS)

# local tempo estimates of the 3 s kernel
cfg = TempogramConfig(kernel_size_sec=3)
kernels = optimal_kernels(fourier_tempogram(novelty, cfg), cfg)
print("median kernel tempo:", np.median(kernels.tempo_bpm), "BPM")

curves, combined = multi_kernel_plp(novelty, (1, 3, 5))
window = slice(gap - 20, gap + 21)
for curve in curves + [combined]:
    peak = gap - 20 + int(np.argmax(curve.values[window]))
    print(f"{curve.kernel_tag:>9}: value at the gap {curve.values[gap]:.3f}, local peak at frame {peak}")

# the short kernel only sees the two flanking pulses; at this tempo it fits
# half the pulse rate and has a trough at the gap, which the product inherits
