"""Command-line entry point: analyze, synth, sweep, fit-b, filter, plot."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .audio_io import WINDOW_KINDS, AudioBuffer, FrameSpec, load_wav, save_wav
from .loudness import load_contour_csv
from .metrics import FitError, NoRegularGridError, Thresholds, fit_inharmonicity_coefficient
from .partial_filter import FILTER_FRAME, FilterSpec, apply_partial_filter
from .pitch import run_sweep_experiment, sweep_csv
from .plots import AXIS_MODES, PLOT_KINDS, PlotRequest, render_plot
from .report import AnalysisConfig, analyze, dumps, validate_report
from .spectral import TrackingConfig, analysis_frame, stft
from .synth import ToneSpec, render

THRESHOLDS_ENV = "INHARMONIC_THRESHOLDS"

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_ANALYSIS = 0, 1, 2, 3

FRAME_CSV_HEADER = ("time_s", "n_partials", "diff_median_hz", "diff_median_midi", "diff_mad_cents",
                    "f0_least_dev_hz", "kind", "d_hz", "s_hz", "jitter_cents", "octave_adjusted")


class UsageError(Exception):
    pass


class AnalysisFailure(Exception):
    pass


def _write_text(path, text: str):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _frame_spec(args) -> FrameSpec:
    try:
        return FrameSpec(args.window_size, args.hop_size, args.window)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _thresholds(args) -> Thresholds:
    path = args.thresholds or os.environ.get(THRESHOLDS_ENV)
    if not path:
        return Thresholds()
    try:
        return Thresholds.from_file(path)
    except OSError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _add_frame_flags(p, window="blackmanharris"):
    p.add_argument("--window-size", type=int, default=4096, help="STFT window length in samples (power of two)")
    p.add_argument("--hop-size", type=int, default=1024, help="STFT hop in samples")
    p.add_argument("--window", choices=WINDOW_KINDS, default=window, help="analysis window")


def _frames_csv(report: dict) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(FRAME_CSV_HEADER)
    for r in report["records"]:
        c = r["classification"]
        w.writerow([r["time_s"], len(r["partials"]), r["diff_median_hz"], r["diff_median_midi"],
                    r["diff_mad_cents"], r["f0_least_dev_hz"], c["kind"], c["d_hz"], c["s_hz"],
                    c["jitter_cents"], int(c["octave_adjusted"])])
    return out.getvalue()


def _overlay_data(report: dict, spectra=None) -> dict:
    recs = report["records"]
    if not recs:
        raise AnalysisFailure("no tonal content to plot")
    data = {
        "partials": [(r["time_s"], p["freq_hz"]) for r in recs for p in r["partials"]],
        "median_track": [(r["time_s"], r["diff_median_hz"]) for r in recs],
    }
    if spectra:
        data["spectrogram"] = {
            "times": [s.time for s in spectra],
            "freqs": spectra[0].freqs,
            "power_db": 10 * np.log10(np.array([s.weighted_power for s in spectra]).T + 1e-20),
        }
    return data


def cmd_analyze(args) -> int:
    frame = _frame_spec(args)
    if args.max_partials < 3:
        raise UsageError("--max-partials must be at least 3")
    contour, source = None, "iso226:2003-parameters"
    if args.contour_csv:
        contour = load_contour_csv(args.contour_csv, args.phon)
        source = f"csv:{Path(args.contour_csv).name}"
    elif args.phon != 50.0:
        from .loudness import iso226_contour
        contour = iso226_contour(args.phon)
    config = AnalysisConfig(
        frame=frame, weighting=not args.no_weighting, contour=contour, contour_source=source,
        thresholds=_thresholds(args),
        tracking=replace(TrackingConfig(), max_partials=args.max_partials),
    )
    buf = load_wav(args.input)
    try:
        report, _ = analyze(buf, config)
    except ValueError as exc:
        raise AnalysisFailure(str(exc)) from exc
    report["metadata"]["input"] = Path(args.input).name
    validate_report(report)
    _write_text(args.output, dumps(report))
    if args.csv:
        _write_text(args.csv, _frames_csv(report))
    if args.svg_dir and report["records"]:
        out = Path(args.svg_dir)
        out.mkdir(parents=True, exist_ok=True)
        spectra = stft(buf, frame, config.resolved_contour())
        render_plot(PlotRequest("spectrogram_overlay", _overlay_data(report, spectra), args.axis,
                                out / "spectrogram_overlay.svg"))
        render_plot(PlotRequest("diff_distribution",
                                {"values_hz": [r["diff_median_hz"] for r in report["records"]]},
                                args.axis, out / "diff_distribution.svg"))
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        spec = ToneSpec.load(args.spec)
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid tone spec {args.spec}: {exc}") from exc
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    try:
        buf = render(spec, args.sample_rate)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    save_wav(buf, args.output)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.steps < 2 or args.partials < 3:
        raise UsageError("--steps must be >= 2 and --partials >= 3")
    rows = run_sweep_experiment(args.steps, args.partials, _frame_spec(args), args.fmin, args.fmax,
                                sample_rate=args.sample_rate, seed=args.seed,
                                duration_s=args.duration)
    _write_text(args.output, sweep_csv(rows))
    if args.svg:
        render_plot(PlotRequest("sweep_curves", {"rows": rows}, args.axis, args.svg))
    if not all(r.valid for r in rows):
        return EXIT_ANALYSIS
    return EXIT_OK


def cmd_fit_b(args) -> int:
    buf = load_wav(args.input)
    try:
        frame = analysis_frame(stft(buf, _frame_spec(args)), args.floor_db, args.max_partials)
        fit = fit_inharmonicity_coefficient(frame, args.b_max)
    except (FitError, ValueError) as exc:
        raise AnalysisFailure(str(exc)) from exc
    result = {
        "input": Path(args.input).name,
        "B": fit.B,
        "f0_hz": fit.f0,
        "residual_rms_hz": fit.residual_rms,
        "n_partials": len(frame),
        "partials_hz": frame.freqs.tolist(),
        "harmonic_indices": fit.indices.astype(int).tolist(),
        "settings": {"window_size": args.window_size, "hop_size": args.hop_size, "window": args.window,
                     "floor_db": args.floor_db, "max_partials": args.max_partials, "b_max": args.b_max},
    }
    _write_text(args.output, json.dumps(result, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_filter(args) -> int:
    try:
        spec = FilterSpec.parse(args.target, args.bandwidth_cents)
        frame = FrameSpec(args.window_size, args.window_size // 4, "hann")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    buf = load_wav(args.input)
    try:
        out = apply_partial_filter(buf, spec, frame)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    peak = float(np.max(np.abs(out.samples))) if len(out) else 0.0
    if peak > 1.0:
        # gains above 0 dB can push past full scale; scale rather than clip
        out = AudioBuffer(out.samples / peak, out.sample_rate)
        print(f"warning: output rescaled by {1 / peak:.4f} to avoid clipping", file=sys.stderr)
    save_wav(out, args.output)
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        report = json.loads(Path(args.report).read_text())
        validate_report(report)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.report} is not JSON: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"{args.report} is not an analysis report: {exc}") from exc
    recs = report["records"]
    if not recs:
        raise AnalysisFailure("report has no tonal frames to plot")
    k = args.kind
    if k == "spectrogram_overlay":
        spectra = None
        if args.audio:
            meta = report["metadata"]["frame"]
            spectra = stft(load_wav(args.audio), FrameSpec(meta["window_size"], meta["hop_size"],
                                                            meta["window_kind"]))
        data = _overlay_data(report, spectra)
    elif k == "diff_distribution":
        data = {"values_hz": [r["diff_median_hz"] for r in recs]}
    elif k == "sweep_curves":
        raise UsageError("sweep_curves is rendered by the sweep command (--svg)")
    else:
        if not 0 <= args.frame < len(recs):
            raise UsageError(f"--frame must lie in [0, {len(recs) - 1}]")
        rec = recs[args.frame]
        parts = [p["freq_hz"] for p in rec["partials"]]
        if k == "shift_diagram":
            c = rec["classification"]
            data = {"partials": parts, "d": c["d_hz"], "s": c["s_hz"]}
        else:
            if not args.audio:
                raise UsageError("spectrum_frame needs --audio")
            meta = report["metadata"]["frame"]
            spectra = stft(load_wav(args.audio), FrameSpec(meta["window_size"], meta["hop_size"],
                                                            meta["window_kind"]))
            spec = min(spectra, key=lambda s: abs(s.time - rec["time_s"]))
            data = {"freqs": spec.freqs, "power_db": 10 * np.log10(spec.power + 1e-20), "partials": parts}
    svg = render_plot(PlotRequest(k, data, args.axis, title=args.title))
    _write_text(args.output, svg)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="inharmonic",
                                description="Analysis and synthesis of inharmonic complex tones.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="track partials and classify a WAV file")
    a.add_argument("input", help="WAV file (mono or stereo)")
    a.add_argument("-o", "--output", help="report JSON path (default: stdout)")
    a.add_argument("--csv", help="also write per-frame CSV here")
    a.add_argument("--svg-dir", help="also write spectrogram and distribution SVGs here")
    a.add_argument("--axis", choices=AXIS_MODES, default="midi", help="pitch axis for SVGs")
    _add_frame_flags(a)
    a.add_argument("--no-weighting", action="store_true", help="disable equal-loudness weighting")
    a.add_argument("--phon", type=float, default=50.0, help="loudness level of the weighting contour")
    a.add_argument("--contour-csv", help="equal-loudness contour as hz,db rows (overrides ISO 226)")
    a.add_argument("--thresholds", help=f"classifier thresholds file (key = value); default from ${THRESHOLDS_ENV}")
    a.add_argument("--max-partials", type=int, default=27, help="partials kept per frame")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("synth", help="render a tone spec (JSON) to a 24-bit WAV")
    s.add_argument("spec", help="ToneSpec JSON file")
    s.add_argument("output", help="output WAV path")
    s.add_argument("--seed", type=int, help="override the spec's seed")
    s.add_argument("--sample-rate", type=int, default=44100)
    s.set_defaults(func=cmd_synth)

    w = sub.add_parser("sweep", help="autocorrelation vs partial-difference sweep (CSV)")
    w.add_argument("-o", "--output", help="CSV path (default: stdout)")
    w.add_argument("--steps", type=int, default=21)
    w.add_argument("--partials", type=int, default=21, help="fundamental plus overtones")
    w.add_argument("--fmin", type=float, default=60.0)
    w.add_argument("--fmax", type=float, default=500.0)
    w.add_argument("--duration", type=float, default=1.0, help="seconds per tone")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--sample-rate", type=int, default=44100)
    w.add_argument("--svg", help="also write the sweep curves here")
    w.add_argument("--axis", choices=AXIS_MODES, default="hz")
    _add_frame_flags(w)
    w.set_defaults(func=cmd_sweep)

    b = sub.add_parser("fit-b", help="fit the stiff-string inharmonicity coefficient B")
    b.add_argument("input", help="WAV file of a steady tone")
    b.add_argument("-o", "--output", help="result JSON path (default: stdout)")
    b.add_argument("--max-partials", type=int, default=27)
    b.add_argument("--floor-db", type=float, default=60.0, help="peak floor below the strongest peak")
    b.add_argument("--b-max", type=float, default=0.01, help="upper bound for B")
    _add_frame_flags(b)
    b.set_defaults(func=cmd_fit_b)

    f = sub.add_parser("filter", help="attenuate or boost chosen partials")
    f.add_argument("input")
    f.add_argument("output")
    f.add_argument("--target", action="append", required=True, metavar="HZ:DB",
                   help="centre frequency and gain, repeatable")
    f.add_argument("--bandwidth-cents", type=float, default=50.0,
                   help="bell width at half the peak gain, in cents (5-200)")
    f.add_argument("--window-size", type=int, default=FILTER_FRAME.window_size,
                   help="filter STFT length (Hann, hop = window/4)")
    f.set_defaults(func=cmd_filter)

    q = sub.add_parser("plot", help="render an SVG from an analysis report")
    q.add_argument("report", help="report JSON from analyze")
    q.add_argument("--kind", choices=[k for k in PLOT_KINDS if k != "sweep_curves"], required=True)
    q.add_argument("-o", "--output", help="SVG path (default: stdout)")
    q.add_argument("--axis", choices=AXIS_MODES, default="midi")
    q.add_argument("--audio", help="WAV the report came from (spectrogram background, spectrum_frame)")
    q.add_argument("--frame", type=int, default=0, help="record index for per-frame plots")
    q.add_argument("--title")
    q.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AnalysisFailure as exc:
        print(f"analysis failed: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except NoRegularGridError as exc:
        print(f"analysis failed: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except (OSError, ValueError) as exc:
        # remaining ValueErrors come from unreadable or malformed input files
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
