import io

import numpy as np
import pytest

from plpdp.conditions import (
    PeakPickConfig,
    TempoCondition,
    fallback_condition,
    local_maxima,
    peak_prominences,
    pick_peaks,
    right_anchors,
    to_condition,
    write_condition_csv,
)
from plpdp.core import FrameGrid, ParameterError
from plpdp.plp import PlpCurve


def _plp(values):
    values = np.asarray(values, dtype=float)
    return PlpCurve(FrameGrid(100, values.size), values, "k3")


def _tent(n, peaks, heights, width=10):
    x = np.zeros(n)
    for p, h in zip(peaks, heights):
        for d in range(-width, width + 1):
            x[p + d] = max(x[p + d], h * (1 - abs(d) / width))
    return x


# ---------------------------------------------------------------------------
# peak picking


def test_single_triangular_peak():
    assert list(pick_peaks([0, 0.2, 0.9, 0.2, 0])) == [2]


def test_close_lower_peak_is_dropped():
    x = np.zeros(20)
    x[5], x[10] = 0.9, 0.8
    assert list(pick_peaks(x, PeakPickConfig(min_distance_frames=7))) == [5]


def test_equal_heights_keep_the_earlier_frame():
    x = np.zeros(20)
    x[5] = x[10] = 0.9
    assert list(pick_peaks(x, PeakPickConfig(min_distance_frames=7))) == [5]


@pytest.mark.parametrize("x", [np.full(10, 0.5), np.zeros(10), [], [1.0]])
def test_no_peaks(x):
    assert pick_peaks(x).size == 0


def test_height_and_prominence_thresholds():
    x = np.array([0, 0.05, 0, 0.5, 0.45, 0.48, 0.3, 0])
    # 0.05 is too low; 0.48 sits 0.03 above its saddle
    assert list(pick_peaks(x, PeakPickConfig(min_distance_frames=1))) == [3]


def test_local_maxima_plateau_and_edges():
    assert list(local_maxima([1, 0, 2, 2, 2, 0, 3])) == [3]
    assert list(local_maxima([0, 1, 1, 0])) == [1]


def test_peak_prominences():
    x = np.array([0, 3, 1, 2, 0])
    np.testing.assert_allclose(peak_prominences(x, np.array([1, 3])), [3, 1])


def test_pick_peaks_accepts_curve_objects():
    curve = _plp([0, 0.2, 0.9, 0.2, 0])
    assert list(pick_peaks(curve)) == [2]


def test_pick_peaks_rejects_non_finite():
    with pytest.raises(ParameterError):
        pick_peaks([0, np.nan, 0])


def test_peak_pick_config_validation():
    with pytest.raises(ParameterError):
        PeakPickConfig(min_distance_frames=0)


# ---------------------------------------------------------------------------
# tempo conditions


def test_segment_between_two_anchors():
    x = _tent(300, [100, 150], [0.8, 0.6])
    assert list(right_anchors(x, [100, 150])) == [110, 160]
    cond = to_condition(_plp(x), [100, 150])
    seg = slice(111, 161)
    np.testing.assert_array_equal(cond.est_ibi_frames[seg], 50)
    np.testing.assert_allclose(cond.confidence[seg], 0.7)


def test_periodic_curve_gives_its_period():
    n = 1000
    values = np.clip(np.cos(2 * np.pi * np.arange(n) / 50), 0, 1)
    cond = to_condition(_plp(values))
    np.testing.assert_array_equal(cond.est_ibi_frames, 50)
    np.testing.assert_allclose(cond.confidence, 1.0)


def test_lead_and_trail_copy_the_outer_segments():
    x = _tent(400, [100, 150, 230], [0.8, 0.6, 1.0])
    cond = to_condition(_plp(x), [100, 150, 230])
    # first anchor 110, last anchor 240
    np.testing.assert_array_equal(cond.est_ibi_frames[:161], 50)
    np.testing.assert_array_equal(cond.est_ibi_frames[161:], 80)
    np.testing.assert_allclose(cond.confidence[:161], 0.7)
    np.testing.assert_allclose(cond.confidence[161:], 0.8)


def test_single_peak_fallback():
    x = _tent(300, [100], [0.4])
    cond = to_condition(_plp(x))
    np.testing.assert_array_equal(cond.est_ibi_frames, 50)
    np.testing.assert_allclose(cond.confidence, 0.4)


def test_no_peak_fallback():
    cond = to_condition(_plp(np.zeros(50)))
    np.testing.assert_array_equal(cond.est_ibi_frames, 50)
    np.testing.assert_allclose(cond.confidence, 0.1)
    other = fallback_condition(FrameGrid(200, 5), 0.3, 60)
    np.testing.assert_array_equal(other.est_ibi_frames, 200)


def test_anchor_stops_where_descent_ends():
    x = np.array([0, 1.0, 0.5, 0.4, 0.4, 0.2, 0])
    assert list(right_anchors(x, [1])) == [3]
    # falling below the floor ends the walk early
    assert list(right_anchors(np.array([0, 1, 0.005, 0.001, 0]), [1])) == [2]
    # a peak on the last descent is clipped to the grid
    assert list(right_anchors(np.array([0, 1, 0.5]), [1])) == [2]


@pytest.mark.parametrize(
    "conf, ibi",
    [
        (np.ones(3), np.ones(4)),
        (np.ones(4), np.zeros(4)),
        (-np.ones(4), np.ones(4)),
        (np.full(4, np.nan), np.ones(4)),
    ],
)
def test_condition_validation(conf, ibi):
    with pytest.raises(ParameterError):
        TempoCondition(FrameGrid(100, 4), conf, ibi)


def test_condition_csv():
    cond = TempoCondition.constant(FrameGrid(100, 3), 0.5, 50)
    buf = io.StringIO()
    write_condition_csv(buf, cond)
    assert buf.getvalue().splitlines() == [
        "frame_time_sec,confidence,est_ibi_sec",
        "0.000000,0.500000,0.500000",
        "0.010000,0.500000,0.500000",
        "0.020000,0.500000,0.500000",
    ]
