import io
import math

import numpy as np
import pytest

from plpdp.core import BeatSequence, FrameGrid, ParameterError
from plpdp.harness import (
    TrackSpec,
    beats_from_tempo,
    fmeasure,
    grid_search_lambda_trans,
    ibi_progression,
    lambda_grid,
    match_beats,
    mean_report,
    random_corpus,
    stability_report,
    synth_activation,
    synth_corpus,
    tempo_curve,
    tempo_stability,
    trim_beats,
    write_eval_csv,
    write_ibi_csv,
    write_stability_csv,
)
from plpdp.trackers import sppk_track


# ---------------------------------------------------------------------------
# synthetic activations


def test_synth_activation_layout():
    act = synth_activation([1.0, 2.0], fps=100, epsilon=1e-6)
    assert act.grid == FrameGrid(100, 301)
    hot = np.flatnonzero(act.values == 1 - 1e-6)
    np.testing.assert_array_equal(hot, [100, 200])
    assert np.all(np.delete(act.values, hot) == 1e-6)


def test_synth_activation_from_beat_sequence_keeps_grid():
    ref = BeatSequence(FrameGrid(50, 80), [10, 40])
    act = synth_activation(ref)
    assert act.grid == ref.grid


@pytest.mark.parametrize(
    "ref, kwargs",
    [
        ([1.0], {"epsilon": 0}),
        ([1.0], {"epsilon": 0.5}),
        ([], {}),
        ([-1.0], {}),
        ([2.0], {"n_frames": 150}),
    ],
)
def test_synth_activation_errors(ref, kwargs):
    with pytest.raises(ParameterError):
        synth_activation(ref, **kwargs)


def test_sppk_round_trip_on_spaced_reference(rng):
    gaps = rng.uniform(0.07, 1.0, 200)
    ref = 0.5 + np.cumsum(gaps)
    ref = np.round(ref * 100) / 100
    est = sppk_track(synth_activation(ref))
    np.testing.assert_allclose(est.times, ref)


# ---------------------------------------------------------------------------
# F-measure


def test_fmeasure_identity():
    ref = np.arange(1, 11) * 0.5
    r = fmeasure(ref, ref)
    assert (r.f1, r.precision, r.recall) == (1.0, 1.0, 1.0)


def test_fmeasure_shift_outside_tolerance():
    ref = np.arange(1, 11) * 0.5
    r = fmeasure(ref + 0.071, ref)
    assert (r.f1, r.precision, r.recall) == (0.0, 0.0, 0.0)


def test_fmeasure_half_recall():
    ref = np.arange(1, 11) * 0.5
    r = fmeasure(ref[:5], ref)
    assert r.precision == 1.0 and r.recall == 0.5
    assert r.f1 == pytest.approx(2 / 3)


def test_fmeasure_empty_sets():
    assert fmeasure([], []).f1 == 1.0
    assert fmeasure([], [1.0]).f1 == 0.0
    assert fmeasure([1.0], []).f1 == 0.0
    with pytest.raises(ParameterError):
        fmeasure([1.0], [1.0], 0)


def test_matching_is_one_to_one():
    # two estimates near one reference count once
    assert match_beats([1.0, 1.01], [1.005]) == [(0, 0)]
    r = fmeasure([1.0, 1.01], [1.005])
    assert r.n_matched == 1 and r.precision == 0.5


def test_trim_and_mean():
    np.testing.assert_array_equal(trim_beats([1, 5, 10], 2, 10), [5, 10])
    m = mean_report([fmeasure([1.0], [1.0]), fmeasure([], [1.0])])
    assert m == {"f1": 0.5, "precision": 0.5, "recall": 0.5, "n_tracks": 2}
    with pytest.raises(ParameterError):
        mean_report([])


# ---------------------------------------------------------------------------
# tempo stability and IBI progression


def test_constant_intervals_are_stable():
    assert tempo_stability(np.arange(20) * 0.5)


def test_one_long_interval_is_unstable():
    ibis = np.full(20, 0.5)
    ibis[7] = 0.55
    assert not tempo_stability(np.concatenate(([0], np.cumsum(ibis))))


def test_stability_needs_two_beats():
    with pytest.warns(UserWarning):
        assert tempo_stability([1.0]) is False


def test_stability_report_rate():
    rep = stability_report([("a", np.arange(5.0)), ("b", [0, 1, 3, 4]), ("c", [0, 1, 2])])
    assert rep.stable == (True, False, True)
    assert rep.rate == pytest.approx(2 / 3)
    buf = io.StringIO()
    write_stability_csv(buf, rep)
    assert buf.getvalue().splitlines() == ["track_id,stable", "a,1", "b,0", "c,1"]


def test_ibi_progression():
    assert ibi_progression([1.0, 1.5, 2.1]) == [(1.0, 0.5), pytest.approx((1.5, 0.6))]
    assert ibi_progression([1.0]) == []
    prog = ibi_progression(np.arange(10) * 0.4)
    np.testing.assert_allclose([ibi for _, ibi in prog], 0.4)
    buf = io.StringIO()
    write_ibi_csv(buf, prog[:1])
    assert buf.getvalue() == "time_sec,ibi_sec\n0.000000,0.400000\n"


# ---------------------------------------------------------------------------
# synthetic corpus


def test_constant_track_beat_count():
    beats = beats_from_tempo(TrackSpec("constant", 60, 120))
    assert beats.size == 121
    np.testing.assert_allclose(np.diff(beats), 0.5)


def test_accelerating_ramp_has_decreasing_intervals():
    beats = beats_from_tempo(TrackSpec("ramp", 60, 120, bpm_end=180))
    assert np.all(np.diff(np.diff(beats)) < 0)


def test_step_and_rubato_curves():
    step = TrackSpec("step", 10, 100, bpm_end=150, step_time_sec=4)
    np.testing.assert_array_equal(tempo_curve(step, np.array([3.9, 4.1])), [100, 150])
    rub = TrackSpec("rubato", 10, 100, depth=0.2, period_sec=4)
    assert tempo_curve(rub, np.array([1.0]))[0] == pytest.approx(120)
    assert rub.tempo_bounds() == pytest.approx((80, 120))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"kind": "swing"},
        {"kind": "ramp"},
        {"kind": "constant", "bpm": 350},
        {"kind": "rubato", "depth": 1.2},
        {"kind": "constant", "duration_sec": 0},
    ],
)
def test_track_spec_validation(kwargs):
    with pytest.raises(ParameterError):
        TrackSpec(**kwargs)


def test_random_corpus_is_reproducible_and_in_range():
    a = synth_corpus(random_corpus(8, duration_sec=10, seed=4))
    b = synth_corpus(random_corpus(8, duration_sec=10, seed=4))
    for x, y in zip(a, b):
        assert x.name == y.name
        np.testing.assert_array_equal(x.ref_times, y.ref_times)
        np.testing.assert_array_equal(x.activation.values, y.activation.values)
    for t in a:
        lo, hi = t.spec.tempo_bounds()
        assert 30 <= lo <= hi <= 300
    assert [t.spec.kind for t in a[:4]] == ["constant", "ramp", "step", "rubato"]
    c = random_corpus(8, duration_sec=10, seed=5)
    assert c[0] != random_corpus(8, duration_sec=10, seed=4)[0]


def test_corpus_activation_covers_the_trajectory():
    (track,) = synth_corpus([TrackSpec("constant", 10, 120, offset_sec=0.5)])
    assert track.activation.grid.n_frames == 1151
    np.testing.assert_array_equal(np.flatnonzero(track.activation.values > 0.5), track.reference.frames)


# ---------------------------------------------------------------------------
# tempo-transition grid search


def test_lambda_grid_endpoints():
    grid = lambda_grid()
    assert grid[0] == 0 and grid[-1] == 100
    assert len(grid) == 37
    assert grid[20:22] == [20, 25]


def _pulse_corpus():
    tracks = synth_corpus(
        [TrackSpec("constant", 60, bpm, offset_sec=0.3) for bpm in (90, 120, 150)]
    )
    return [(t.activation, t.ref_times) for t in tracks]


def test_grid_search_without_tempo_penalty_fits_pulse_trains():
    (row,) = grid_search_lambda_trans(_pulse_corpus(), [0])
    assert row["lambda_trans"] == 0 and row["n_tracks"] == 3
    # a few opening pulses are skipped: with uniform tempo changes every
    # beat costs the same, so the decoder starts in a very long period
    assert row["f1"] >= 0.98
    assert row["precision"] == 1.0


def test_grid_search_rows_are_ordered():
    rows = grid_search_lambda_trans(_pulse_corpus()[:1], [100, 0, 100])
    assert [r["lambda_trans"] for r in rows] == [0, 100]
    assert rows == grid_search_lambda_trans(_pulse_corpus()[:1], [0, 100])


def test_grid_search_errors():
    with pytest.raises(ParameterError):
        grid_search_lambda_trans([], [0])
    with pytest.raises(ParameterError):
        grid_search_lambda_trans(_pulse_corpus()[:1], [])


def test_eval_csv():
    buf = io.StringIO()
    write_eval_csv(buf, [("t1", "sppk", fmeasure([1.0], [1.0]))])
    assert buf.getvalue() == "track_id,ppt,f1,p,r\nt1,sppk,1.000000,1.000000,1.000000\n"
    assert math.isclose(fmeasure([1.0], [1.0]).tolerance_sec, 0.07)
