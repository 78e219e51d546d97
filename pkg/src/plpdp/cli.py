"""
Command-line front end
======================

Subcommands::

    plpdp track      ACTIVATION   --ppt {sppk,dp,plpdp,plpdp-g3,hmm}
    plpdp synth      ANNOTATION   (or --random N --seed S)
    plpdp eval       EST REF      (or --synthetic REF)
    plpdp stability  ANNOTATION
    plpdp plp        ACTIVATION   --kernels 1,3,5
    plpdp gridsearch ANNOTATION   [--activations PATH] [--lambdas ...]

Paths may be files or directories; a directory is searched recursively for
``*.act.csv`` activations or ``*.beats`` annotations and processed in
sorted order.  Settings come from flags, then an optional JSON ``--config``
file, then built-in defaults.

Exit codes: 0 success, 1 unreadable or malformed input, 2 invalid
parameters.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .core import DEFAULT_FPS, BeatSequence, NoveltyCurve, ParameterError, TempoRange, open_output
from .harness import (
    EvalReport,
    fmeasure,
    grid_search_lambda_trans,
    lambda_grid,
    mean_report,
    random_corpus,
    stability_report,
    synth_activation,
    synth_corpus,
    write_eval_csv,
    write_stability_csv,
)
from .io import (
    ACTIVATION_SUFFIX,
    ANNOTATION_SUFFIX,
    ParseError,
    read_activation,
    read_annotation,
    track_id,
    find_files,
    write_activation,
)
from .plp import TempogramConfig, kernel_tempo_range, multi_kernel_plp, plp, write_plp_csv
from .trackers import (
    DpConfig,
    HmmConfig,
    dp_track,
    estimate_global_ibi,
    format_beats,
    hmm_track,
    plpdp_condition,
    plpdp_track,
    sppk_track,
)

__all__ = ["main", "build_parser", "run_ppt", "DEFAULTS", "PPTS"]

PPTS = ("sppk", "dp", "plpdp", "plpdp-g3", "hmm")

DEFAULTS = {
    "ppt": "plpdp",
    "fps": None,
    "epsilon": 1e-6,
    "tolerance": 0.070,
    "kernels": "1,3,5",
    "min_bpm": 30.0,
    "max_bpm": 300.0,
    "lambda0": 100.0,
    "lambda_trans": 100.0,
    "exact_dp": False,
    "seed": 0,
    "jobs": 1,
    "stability_tol": 0.04,
    "lambdas": None,
}


# ---------------------------------------------------------------------------
# settings

def _parse_kernels(text) -> tuple[float, ...]:
    if isinstance(text, (int, float)):
        text = str(text)
    try:
        kernels = tuple(float(k) for k in str(text).split(",") if k.strip())
    except ValueError:
        raise ParameterError(f"bad kernel list {text!r}") from None
    if not kernels or any(not np.isfinite(k) or k <= 0 for k in kernels):
        raise ParameterError("kernel sizes must be positive seconds")
    return kernels


def _parse_lambdas(text) -> list[float]:
    if text is None:
        return lambda_grid()
    if isinstance(text, (list, tuple)):
        values = text
    else:
        values = [x for x in str(text).split(",") if x.strip()]
    try:
        lambdas = [float(x) for x in values]
    except ValueError:
        raise ParameterError(f"bad lambda list {text!r}") from None
    if not lambdas or any(not np.isfinite(x) or x < 0 for x in lambdas):
        raise ParameterError("lambdas must be non-negative numbers")
    return lambdas


def _load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"{path}: cannot read config ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: config must be a JSON object")
    out = {}
    for key, value in data.items():
        key = key.lstrip("-").replace("-", "_")
        if key not in DEFAULTS:
            raise ParameterError(f"unknown config key {key!r}")
        out[key] = value
    return out


def _settings(args: argparse.Namespace) -> dict:
    """Flags over config file over defaults, then validated."""
    given = vars(args).copy()
    config_path = given.pop("config", None)
    s = dict(DEFAULTS)
    if config_path is not None:
        s.update(_load_config(config_path))
    s.update({k: v for k, v in given.items() if k in DEFAULTS})
    for key in ("epsilon", "tolerance", "min_bpm", "max_bpm", "lambda0", "lambda_trans", "stability_tol"):
        try:
            s[key] = float(s[key])
        except (TypeError, ValueError):
            raise ParameterError(f"{key} must be a number") from None
    for key in ("seed", "jobs"):
        if isinstance(s[key], bool) or not isinstance(s[key], int):
            raise ParameterError(f"{key} must be an integer")
    if s["fps"] is not None and (isinstance(s["fps"], bool) or not isinstance(s["fps"], int) or s["fps"] <= 0):
        raise ParameterError("fps must be a positive integer")
    if not 0 < s["epsilon"] < 0.5:
        raise ParameterError("epsilon must lie in (0, 0.5)")
    if not s["tolerance"] > 0:
        raise ParameterError("tolerance must be positive")
    if not 0 < s["min_bpm"] < s["max_bpm"]:
        raise ParameterError("need 0 < min-bpm < max-bpm")
    if s["lambda0"] < 0 or s["lambda_trans"] < 0:
        raise ParameterError("lambda0 and lambda-trans must be >= 0")
    if s["jobs"] < 1:
        raise ParameterError("jobs must be >= 1")
    if not 0 < s["stability_tol"] < 1:
        raise ParameterError("stability tolerance must lie in (0, 1)")
    if s["ppt"] not in PPTS and not (args.command == "eval" and s["ppt"]):
        raise ParameterError(f"unknown ppt {s['ppt']!r}")
    s["exact_dp"] = bool(s["exact_dp"])
    s["kernels"] = _parse_kernels(s["kernels"])
    s["lambdas"] = _parse_lambdas(s["lambdas"])
    return s


def _ppt_list(text) -> list[str]:
    names = [p.strip() for p in str(text).split(",") if p.strip()]
    for name in names:
        if name not in PPTS:
            raise ParameterError(f"unknown ppt {name!r}")
    if not names:
        raise ParameterError("no ppt given")
    return names


# ---------------------------------------------------------------------------
# pipelines

def run_ppt(ppt: str, activation: NoveltyCurve, s: dict, ref_times=None) -> BeatSequence:
    """Run one post-processing tracker with CLI settings ``s``.

    ``ref_times`` (seconds) switches ``dp`` to its reference-informed mode,
    where the preassigned IBI is the mean reference IBI.
    """
    if ppt == "sppk":
        return sppk_track(activation)
    if ppt == "dp":
        if ref_times is not None and len(ref_times) >= 2:
            delta0 = float(np.mean(np.diff(ref_times))) * activation.fps
        else:
            delta0 = estimate_global_ibi(activation)
        return dp_track(activation, DpConfig(delta0, s["lambda0"], exact=s["exact_dp"]))
    if ppt in ("plpdp", "plpdp-g3"):
        kernels = (3.0,) if ppt == "plpdp-g3" else s["kernels"]
        _, condition = plpdp_condition(activation, kernels, max_bpm=int(s["max_bpm"]))
        return plpdp_track(activation, condition, exact=s["exact_dp"])
    if ppt == "hmm":
        cfg = HmmConfig(s["lambda_trans"], TempoRange(s["min_bpm"], s["max_bpm"]))
        return hmm_track(activation, cfg)
    raise ParameterError(f"unknown ppt {ppt!r}")


def _pool_map(fn, items, jobs: int):
    """Ordered map, in a process pool when ``jobs > 1``."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _track_job(job):
    act_path, ref_path, s = job
    activation = read_activation(act_path, s["fps"])
    ref = read_annotation(ref_path) if ref_path is not None else None
    return format_beats(run_ppt(s["ppt"], activation, s, ref))


def _synthetic_job(job):
    ann_path, ppts, s, use_ref_ibi = job
    ref = read_annotation(ann_path)
    if ref.size == 0:
        raise ParseError(f"{ann_path}: no beats")
    activation = synth_activation(ref, fps=s["fps"] or DEFAULT_FPS, epsilon=s["epsilon"])
    reports = []
    for ppt in ppts:
        est = run_ppt(ppt, activation, s, ref if use_ref_ibi else None)
        reports.append(fmeasure(est, ref, s["tolerance"]))
    return reports


def _pair_by_id(paths_a, paths_b, what: str):
    """Match two sorted file lists by track id."""
    lookup = {track_id(p): p for p in paths_b}
    pairs = []
    for p in paths_a:
        tid = track_id(p)
        if tid not in lookup:
            raise ParseError(f"{p}: no matching {what}")
        pairs.append((tid, p, lookup[tid]))
    return pairs


def _print_row(track, ppt, r: EvalReport | dict, out=None):
    f1 = r["f1"] if isinstance(r, dict) else r.f1
    p = r["precision"] if isinstance(r, dict) else r.precision
    rc = r["recall"] if isinstance(r, dict) else r.recall
    print(f"{track}\t{ppt}\tF1={f1:.3f}\tP={p:.3f}\tR={rc:.3f}", file=out or sys.stdout)


# ---------------------------------------------------------------------------
# commands

def cmd_track(args, s) -> int:
    acts = find_files(args.input, ACTIVATION_SUFFIX)
    refs = [None] * len(acts)
    if args.ibi_from_ref is not None:
        if s["ppt"] != "dp":
            raise ParameterError("--ibi-from-ref only applies to --ppt dp")
        ann = find_files(args.ibi_from_ref, ANNOTATION_SUFFIX)
        if len(acts) == 1 and len(ann) == 1 and not Path(args.input).is_dir():
            refs = ann
        else:
            refs = [ref for _, _, ref in _pair_by_id(acts, ann, "annotation")]
    results = _pool_map(_track_job, [(a, r, s) for a, r in zip(acts, refs)], s["jobs"])
    if Path(args.input).is_dir():
        if args.out is None:
            raise ParameterError("directory input needs --out DIR")
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for path, text in zip(acts, results):
            (out_dir / f"{track_id(path)}{ANNOTATION_SUFFIX}").write_text(text, encoding="utf-8")
    else:
        with open_output(args.out) as fh:
            fh.write(results[0])
    return 0


def cmd_synth(args, s) -> int:
    fps = s["fps"] or DEFAULT_FPS
    if args.random is not None:
        if args.random < 1:
            raise ParameterError("--random needs a positive track count")
        if args.out is None:
            raise ParameterError("--random needs --out DIR")
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        specs = random_corpus(args.random, args.duration, seed=s["seed"])
        for track in synth_corpus(specs, fps=fps, epsilon=s["epsilon"]):
            (out_dir / f"{track.name}{ANNOTATION_SUFFIX}").write_text(
                "".join(f"{t:.6f}\n" for t in track.ref_times), encoding="utf-8"
            )
            write_activation(out_dir / f"{track.name}{ACTIVATION_SUFFIX}", track.activation)
        return 0
    if args.input is None:
        raise ParameterError("give an annotation path or --random N")
    anns = find_files(args.input, ANNOTATION_SUFFIX)
    curves = []
    for path in anns:
        ref = read_annotation(path)
        if ref.size == 0:
            raise ParseError(f"{path}: no beats")
        curves.append(synth_activation(ref, fps=fps, epsilon=s["epsilon"]))
    if Path(args.input).is_dir():
        if args.out is None:
            raise ParameterError("directory input needs --out DIR")
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for path, curve in zip(anns, curves):
            write_activation(out_dir / f"{track_id(path)}{ACTIVATION_SUFFIX}", curve)
    else:
        write_activation(args.out, curves[0])
    return 0


def cmd_eval(args, s) -> int:
    rows = []
    if args.synthetic:
        if len(args.paths) != 1:
            raise ParameterError("--synthetic takes exactly one annotation path")
        ppts = _ppt_list(s["ppt"])
        anns = find_files(args.paths[0], ANNOTATION_SUFFIX)
        jobs = [(a, ppts, s, args.ibi_from_ref) for a in anns]
        for path, reports in zip(anns, _pool_map(_synthetic_job, jobs, s["jobs"])):
            rows.extend((track_id(path), ppt, r) for ppt, r in zip(ppts, reports))
    else:
        if len(args.paths) != 2:
            raise ParameterError("eval takes EST and REF paths (or --synthetic REF)")
        est_path, ref_path = args.paths
        label = str(getattr(args, "ppt", "est"))
        if Path(est_path).is_dir() or Path(ref_path).is_dir():
            pairs = _pair_by_id(
                find_files(est_path, ANNOTATION_SUFFIX), find_files(ref_path, ANNOTATION_SUFFIX), "reference"
            )
        else:
            pairs = [(track_id(ref_path), Path(est_path), Path(ref_path))]
        for tid, est, ref in pairs:
            rows.append((tid, label, fmeasure(read_annotation(est), read_annotation(ref), s["tolerance"])))
    if not rows:
        raise ParseError("no tracks to evaluate")

    ppts = list(dict.fromkeys(ppt for _, ppt, _ in rows))
    means = {ppt: mean_report([r for _, p, r in rows if p == ppt]) for ppt in ppts}
    for tid, ppt, r in rows:
        _print_row(tid, ppt, r)
    for ppt in ppts:
        _print_row("MEAN", ppt, means[ppt])
    if args.out is not None:
        mean_rows = [
            ("MEAN", ppt, EvalReport(m["f1"], m["precision"], m["recall"], 0, 0, 0, s["tolerance"]))
            for ppt, m in means.items()
        ]
        write_eval_csv(args.out, rows + mean_rows)
    return 0


def cmd_stability(args, s) -> int:
    anns = find_files(args.input, ANNOTATION_SUFFIX)
    report = stability_report(((track_id(p), read_annotation(p)) for p in anns), s["stability_tol"])
    if args.out is not None:
        write_stability_csv(args.out, report)
    n_stable = sum(report.stable)
    print(f"stable tempo rate: {100 * report.rate:.1f}% ({n_stable}/{len(report.stable)})")
    return 0


def cmd_plp(args, s) -> int:
    kernels = s["kernels"]
    activation = read_activation(args.input, s["fps"])
    max_bpm = int(s["max_bpm"])
    if len(kernels) == 1:
        k = kernels[0]
        curves = [plp(activation, TempogramConfig(k, 1, kernel_tempo_range(k, max_bpm=max_bpm)))]
    else:
        singles, combined = multi_kernel_plp(activation, kernels, max_bpm=max_bpm)
        curves = list(singles) + [combined]
    write_plp_csv(args.out, curves)
    return 0


def cmd_gridsearch(args, s) -> int:
    anns = find_files(args.input, ANNOTATION_SUFFIX)
    corpus = []
    if args.activations is not None:
        acts = find_files(args.activations, ACTIVATION_SUFFIX)
        for _, act, ann in _pair_by_id(acts, anns, "annotation"):
            corpus.append((read_activation(act, s["fps"]), read_annotation(ann)))
    else:
        for ann in anns:
            ref = read_annotation(ann)
            if ref.size == 0:
                raise ParseError(f"{ann}: no beats")
            corpus.append((synth_activation(ref, fps=s["fps"] or DEFAULT_FPS, epsilon=s["epsilon"]), ref))
    tempo_range = TempoRange(s["min_bpm"], s["max_bpm"])
    rows = grid_search_lambda_trans(corpus, s["lambdas"], tempo_range, s["tolerance"])
    with open_output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda_trans", "f1", "p", "r"])
        for row in rows:
            w.writerow([f"{row['lambda_trans']:g}", f"{row['f1']:.6f}", f"{row['precision']:.6f}", f"{row['recall']:.6f}"])
    return 0


# ---------------------------------------------------------------------------
# parser

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="JSON file with default settings")
    p.add_argument("--dump-config", action="store_true", help="print effective settings and exit")
    p.add_argument("--fps", type=int, help="frame rate (default: file header or 100)")
    p.add_argument("--jobs", type=int, help="worker processes for corpus mode (default 1)")
    return p


def _tracker_flags(p):
    p.add_argument("--kernels", help="PLP kernel sizes in seconds (default 1,3,5)")
    p.add_argument("--min-bpm", type=float, help="lowest HMM tempo (default 30)")
    p.add_argument("--max-bpm", type=float, help="highest tempo (default 300)")
    p.add_argument("--lambda0", type=float, help="DP tempo-penalty weight (default 100)")
    p.add_argument("--lambda-trans", type=float, help="HMM tempo-transition steepness (default 100)")
    p.add_argument("--exact-dp", action="store_true", help="search all predecessors in the DP")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plpdp",
        description="Beat-tracking post-processing: PLP-conditioned dynamic programming and baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    p = sub.add_parser("track", parents=[common], argument_default=argparse.SUPPRESS, help="activation -> beat times")
    p.add_argument("input", help="activation file or directory")
    p.add_argument("--ppt", choices=PPTS, help="tracker (default plpdp)")
    p.add_argument("--ibi-from-ref", default=None, help="annotation(s) giving the DP its reference IBI")
    p.add_argument("--out", default=None, help="output file (default stdout) or directory")
    _tracker_flags(p)
    p.set_defaults(handler=cmd_track)

    p = sub.add_parser("synth", parents=[common], argument_default=argparse.SUPPRESS, help="annotation -> synthetic activation")
    p.add_argument("input", nargs="?", default=None, help="annotation file or directory")
    p.add_argument("--epsilon", type=float, help="floor value (default 1e-6)")
    p.add_argument("--random", type=int, default=None, metavar="N", help="generate N random trajectories")
    p.add_argument("--duration", type=float, default=60.0, help="seconds per random trajectory")
    p.add_argument("--seed", type=int, help="seed for --random (default 0)")
    p.add_argument("--out", default=None, help="output file (default stdout) or directory")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("eval", parents=[common], argument_default=argparse.SUPPRESS, help="F-measure of estimates against references")
    p.add_argument("paths", nargs="+", metavar="PATH", help="EST REF, or REF with --synthetic")
    p.add_argument("--synthetic", action="store_true", default=False, help="track synthetic activations built from REF")
    p.add_argument("--ppt", help="tracker list for --synthetic (comma separated) or label")
    p.add_argument("--ibi-from-ref", action="store_true", default=False, help="give dp the mean reference IBI")
    p.add_argument("--tolerance", type=float, help="matching window in seconds (default 0.070)")
    p.add_argument("--epsilon", type=float, help="floor value of synthetic activations")
    p.add_argument("--out", default=None, help="CSV report")
    _tracker_flags(p)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("stability", parents=[common], argument_default=argparse.SUPPRESS, help="tempo stability rate of annotations")
    p.add_argument("input", help="annotation file or directory")
    p.add_argument("--stability-tol", type=float, help="normalized tempo tolerance (default 0.04)")
    p.add_argument("--out", default=None, help="CSV report")
    p.set_defaults(handler=cmd_stability)

    p = sub.add_parser("plp", parents=[common], argument_default=argparse.SUPPRESS, help="export PLP curves")
    p.add_argument("input", help="activation file")
    p.add_argument("--kernels", help="kernel sizes in seconds (default 1,3,5)")
    p.add_argument("--max-bpm", type=float, help="highest kernel tempo (default 300)")
    p.add_argument("--out", default=None, help="CSV output (default stdout)")
    p.set_defaults(handler=cmd_plp)

    p = sub.add_parser("gridsearch", parents=[common], argument_default=argparse.SUPPRESS, help="HMM tempo-transition sweep")
    p.add_argument("input", help="annotation file or directory")
    p.add_argument("--activations", default=None, help="activations matching the annotations (default: synthetic)")
    p.add_argument("--lambdas", help="comma-separated values (default 0..20 step 1, 25..100 step 5)")
    p.add_argument("--tolerance", type=float, help="matching window in seconds (default 0.070)")
    p.add_argument("--epsilon", type=float, help="floor value of synthetic activations")
    p.add_argument("--min-bpm", type=float, help="lowest tempo (default 30)")
    p.add_argument("--max-bpm", type=float, help="highest tempo (default 300)")
    p.add_argument("--out", default=None, help="CSV output (default stdout)")
    p.set_defaults(handler=cmd_gridsearch)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = args.handler
    del args.handler
    dump = getattr(args, "dump_config", False)
    if hasattr(args, "dump_config"):
        del args.dump_config
    try:
        s = _settings(args)
        if dump:
            printable = {k: (list(v) if isinstance(v, tuple) else v) for k, v in s.items()}
            print(json.dumps(printable, indent=2, sort_keys=True))
            return 0
        return handler(args, s)
    except ParseError as exc:
        print(f"plpdp: error: {exc}", file=sys.stderr)
        return 1
    except ParameterError as exc:
        print(f"plpdp: error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # downstream reader went away (e.g. piped into head)
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return 1


if __name__ == "__main__":
    sys.exit(main())
