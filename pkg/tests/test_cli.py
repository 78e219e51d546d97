import json
import subprocess
import sys

import numpy as np
import pytest

from plpdp import cli
from plpdp.harness import TrackSpec, fmeasure, synth_corpus
from plpdp.io import read_activation, read_annotation, write_activation
from plpdp.trackers import DpConfig, dp_track


def _write_beats(path, times):
    path.write_text("".join(f"{t:.6f}\n" for t in times))
    return path


@pytest.fixture
def constant_track(tmp_path):
    (track,) = synth_corpus([TrackSpec("constant", 30, 120, offset_sec=0.5)])
    ref = _write_beats(tmp_path / "song.beats", track.ref_times)
    act = tmp_path / "song.act.csv"
    write_activation(act, track.activation)
    return act, ref, track


def test_track_plpdp_on_constant_tempo(constant_track, tmp_path):
    act, _, track = constant_track
    out = tmp_path / "est.beats"
    assert cli.main(["track", str(act), "--ppt", "plpdp", "--out", str(out)]) == 0
    est = read_annotation(out)
    inner = lambda t: t[(t > 5) & (t < 25)]
    assert inner(est).size == inner(track.ref_times).size
    np.testing.assert_allclose(inner(est), inner(track.ref_times), atol=0.010)


def test_track_dp_with_reference_interval(constant_track, tmp_path, capsys):
    act, ref, track = constant_track
    assert cli.main(["track", str(act), "--ppt", "dp", "--ibi-from-ref", str(ref)]) == 0
    printed = capsys.readouterr().out
    delta0 = float(np.mean(np.diff(track.ref_times))) * 100
    want = dp_track(track.activation, DpConfig(delta0, 100.0))
    assert printed == "".join(f"{t:.6f}\n" for t in want.times)


def test_track_is_deterministic_and_parsable(constant_track, tmp_path):
    act, _, _ = constant_track
    outs = []
    for name in ("a.beats", "b.beats"):
        out = tmp_path / name
        assert cli.main(["track", str(act), "--ppt", "hmm", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert read_annotation(tmp_path / "a.beats").size > 0


@pytest.mark.parametrize(
    "argv",
    [
        ["track", "{act}", "--ppt", "dp", "--lambda0", "-1"],
        ["track", "{act}", "--kernels", "0"],
        ["track", "{act}", "--min-bpm", "200", "--max-bpm", "100"],
        ["track", "{act}", "--ppt", "plpdp", "--ibi-from-ref", "{ref}"],
        ["synth", "{ref}", "--epsilon", "0"],
        ["plp", "{act}", "--kernels", "0"],
        ["eval", "--synthetic", "{ref}", "--ppt", "nope"],
        ["gridsearch", "{ref}", "--lambdas", "-1"],
    ],
)
def test_invalid_parameters_exit_2(constant_track, argv, capsys):
    act, ref, _ = constant_track
    argv = [a.format(act=act, ref=ref) for a in argv]
    assert cli.main(argv) == 2
    assert "error" in capsys.readouterr().err


def test_unknown_ppt_is_a_usage_error(constant_track):
    act, _, _ = constant_track
    with pytest.raises(SystemExit) as exc:
        cli.main(["track", str(act), "--ppt", "madmom"])
    assert exc.value.code == 2


def test_parse_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.act.csv"
    bad.write_text("0.1\n7\n")
    assert cli.main(["track", str(bad)]) == 1
    worse = tmp_path / "bad.beats"
    worse.write_text("2\n1\n")
    assert cli.main(["synth", str(worse)]) == 1
    assert cli.main(["stability", str(tmp_path / "missing")]) == 1
    capsys.readouterr()


def test_synth_marks_every_beat(constant_track, tmp_path):
    _, ref, track = constant_track
    out = tmp_path / "x.act.csv"
    assert cli.main(["synth", str(ref), "--epsilon", "1e-4", "--out", str(out)]) == 0
    curve = read_activation(out)
    assert np.sum(curve.values == 1 - 1e-4) == track.ref_times.size
    assert np.all(curve.values[curve.values != 1 - 1e-4] == 1e-4)


def test_synth_then_sppk_recovers_the_annotation(tmp_path, capsys):
    times = np.array([0.5, 0.9, 1.7, 1.78, 2.5])
    ref = _write_beats(tmp_path / "r.beats", times)
    act = tmp_path / "r.act.csv"
    assert cli.main(["synth", str(ref), "--out", str(act)]) == 0
    assert cli.main(["track", str(act), "--ppt", "sppk"]) == 0
    np.testing.assert_allclose([float(x) for x in capsys.readouterr().out.split()], times)


def test_synth_random_corpus(tmp_path):
    out = tmp_path / "corpus"
    assert cli.main(["synth", "--random", "3", "--duration", "5", "--seed", "2", "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == [
        "constant_000.act.csv", "constant_000.beats",
        "ramp_001.act.csv", "ramp_001.beats",
        "step_002.act.csv", "step_002.beats",
    ]


def test_eval_identical_and_disjoint(tmp_path, capsys):
    ref = _write_beats(tmp_path / "r.beats", [1.0, 2.0, 3.0])
    far = _write_beats(tmp_path / "f.beats", [1.5, 2.5])
    assert cli.main(["eval", str(ref), str(ref)]) == 0
    assert "F1=1.000" in capsys.readouterr().out.splitlines()[0]
    assert cli.main(["eval", str(far), str(ref)]) == 0
    assert "F1=0.000" in capsys.readouterr().out.splitlines()[0]


def test_eval_synthetic_corpus_mean_rows(tmp_path, capsys):
    refs = tmp_path / "refs"
    refs.mkdir()
    for bpm in (100, 140):
        (track,) = synth_corpus([TrackSpec("constant", 20, bpm, offset_sec=0.4)])
        _write_beats(refs / f"c{bpm}.beats", track.ref_times)
    csv_path = tmp_path / "report.csv"
    argv = ["eval", "--synthetic", str(refs), "--ppt", "sppk,dp", "--ibi-from-ref", "--out", str(csv_path)]
    assert cli.main(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [ln.split("\t")[:2] for ln in lines] == [
        ["c100", "sppk"], ["c100", "dp"], ["c140", "sppk"], ["c140", "dp"], ["MEAN", "sppk"], ["MEAN", "dp"],
    ]
    assert lines[4].split("\t")[2] == "F1=1.000"
    rows = csv_path.read_text().splitlines()
    assert rows[0] == "track_id,ppt,f1,p,r"
    assert len(rows) == 7


def test_stability_rate(tmp_path, capsys):
    d = tmp_path / "anns"
    d.mkdir()
    _write_beats(d / "a.beats", np.arange(10) * 0.5)
    _write_beats(d / "b.beats", [0, 0.5, 1.2, 1.7])
    _write_beats(d / "c.beats", np.arange(10) * 0.6)
    out = tmp_path / "s.csv"
    assert cli.main(["stability", str(d), "--out", str(out)]) == 0
    assert capsys.readouterr().out.strip() == "stable tempo rate: 66.7% (2/3)"
    assert out.read_text().splitlines() == ["track_id,stable", "a,1", "b,0", "c,1"]


def test_plp_columns(constant_track, capsys):
    act, _, _ = constant_track
    assert cli.main(["plp", str(act)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "frame_time_sec,plp_k1,plp_k3,plp_k5,plp_combined"
    assert cli.main(["plp", str(act), "--kernels", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "frame_time_sec,plp_k3"
    col = np.array([float(ln.split(",")[1]) for ln in lines[1:]])
    # 120 BPM: the curve repeats every 50 frames away from the edges
    np.testing.assert_allclose(col[400:2500], col[450:2550], atol=1e-6)


def test_gridsearch_rows(tmp_path, capsys):
    (track,) = synth_corpus([TrackSpec("constant", 20, 120, offset_sec=0.4)])
    ref = _write_beats(tmp_path / "c.beats", track.ref_times)
    assert cli.main(["gridsearch", str(ref), "--lambdas", "100,0"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "lambda_trans,f1,p,r"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["0", "100"]


def test_corpus_directories_and_workers(tmp_path):
    corpus = tmp_path / "corpus"
    assert cli.main(["synth", "--random", "3", "--duration", "8", "--out", str(corpus)]) == 0
    for jobs in ("1", "2"):
        out = tmp_path / f"est{jobs}"
        assert cli.main(["track", str(corpus), "--ppt", "sppk", "--jobs", jobs, "--out", str(out)]) == 0
    one = sorted(p.name for p in (tmp_path / "est1").iterdir())
    assert one == ["constant_000.beats", "ramp_001.beats", "step_002.beats"]
    for name in one:
        assert (tmp_path / "est1" / name).read_bytes() == (tmp_path / "est2" / name).read_bytes()
        ref = read_annotation(corpus / name)
        assert fmeasure(read_annotation(tmp_path / "est1" / name), ref).f1 == 1.0


def test_config_precedence_and_dump(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lambda0": 5, "tolerance": 0.05}))
    assert cli.main(["track", "x.act.csv", "--config", str(cfg), "--lambda0", "7", "--dump-config"]) == 0
    settings = json.loads(capsys.readouterr().out)
    assert settings["lambda0"] == 7.0
    assert settings["tolerance"] == 0.05
    assert settings["lambda_trans"] == 100.0
    assert settings["kernels"] == [1.0, 3.0, 5.0]


def test_module_entry_point(constant_track):
    act, _, _ = constant_track
    proc = subprocess.run(
        [sys.executable, "-m", "plpdp", "track", str(act), "--ppt", "sppk"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert len(proc.stdout.split()) == 61
    bad = subprocess.run([sys.executable, "-m", "plpdp", "track"], capture_output=True, check=False)
    assert bad.returncode == 2
