"""Deterministic SVG figures: spectrograms with partial overlays, spectra, sweeps."""

from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure
from matplotlib.ticker import FixedLocator, FuncFormatter

from .partials import hz_to_midi, note_name

PLOT_KINDS = ("spectrogram_overlay", "spectrum_frame", "diff_distribution", "sweep_curves",
              "shift_diagram")
AXIS_MODES = ("hz", "midi")

PARTIAL_COLOR = "#f5d000"
MEDIAN_COLOR = "#1f4fd8"
FIG_SIZE_IN = (12.0, 4.0)
FIG_DPI = 100
VIEWPORT_PX = (1200, 400)

_RC = {
    "svg.hashsalt": "inharmonic",
    "svg.fonttype": "none",
    "path.simplify": False,
    "font.family": "DejaVu Sans",
}

# sweep columns after g_hz, with their SweepRow attribute
_SWEEP_SERIES = (
    ("f0_partial_hz", "f0_partial"),
    ("autocorr_hz", "autocorr_peak_hz"),
    ("diff_median_hz", "overtone_diff_median"),
    ("diff_mean_hz", "overtone_diff_mean"),
    ("first_pair_diff_hz", "first_pair_diff"),
)


@dataclass
class PlotRequest:
    """What to draw.

    `data` keys by kind:

    * spectrogram_overlay: ``partials`` as ``(time_s, freq_hz)`` pairs, optional
      ``median_track`` pairs and optional ``spectrogram`` dict with ``times``,
      ``freqs`` and ``power_db`` (frequency x time).
    * spectrum_frame: ``freqs``, ``power_db``, ``partials`` (Hz).
    * diff_distribution: ``values_hz``.
    * sweep_curves: ``rows`` (SweepRow objects).
    * shift_diagram: ``partials`` (Hz), ``d`` and ``s``.
    """

    kind: str
    data: dict
    axis: str = "hz"
    output_path: str | Path | None = None
    title: str | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PLOT_KINDS:
            raise ValueError(f"unknown plot kind {self.kind!r}; expected one of {PLOT_KINDS}")
        if self.axis not in AXIS_MODES:
            raise ValueError(f"axis must be one of {AXIS_MODES}")


def _require(data: dict, *keys):
    for k in keys:
        v = data.get(k)
        if v is None or len(v) == 0:
            raise ValueError(f"plot data {k!r} is missing or empty")


def _pitch(values, axis: str) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    return hz_to_midi(v) if axis == "midi" else v


def _midi_axis(ax, which: str, lo: float, hi: float):
    """Integer-MIDI gridlines at every A (..., 45, 57, 69, ...), or every semitone when zoomed in."""
    step = 12 if hi - lo > 24 else (1 if hi - lo <= 6 else 3)
    start = 9 + step * np.floor((lo - 9) / step)
    ticks = np.arange(start, hi + step, step)
    axis = ax.yaxis if which == "y" else ax.xaxis
    axis.set_major_locator(FixedLocator(ticks))
    axis.set_major_formatter(FuncFormatter(lambda m, _: f"{int(round(m))} {note_name(m)}"))


def _freq_label(axis: str) -> str:
    return "MIDI note" if axis == "midi" else "Frequency (Hz)"


def _spectrogram_overlay(ax, req: PlotRequest):
    d = req.data
    _require(d, "partials")
    t, f = np.asarray(d["partials"], dtype=float).T
    spec = d.get("spectrogram")
    if spec is not None:
        freqs = np.asarray(spec["freqs"], dtype=float)
        times = np.asarray(spec["times"], dtype=float)
        keep = (freqs > 0) & (freqs <= 1.25 * f.max())
        db = np.asarray(spec["power_db"], dtype=float)[keep]
        if times.size >= 2 and keep.sum() >= 2:
            # filled contours stay vector yet far smaller than one path per cell
            top = float(db.max())
            levels = np.linspace(top - 60.0, top, 13)
            cs = ax.contourf(times, _pitch(freqs[keep], req.axis), np.clip(db, levels[0], top),
                             levels=levels, cmap="magma")
            cs.set_gid("spectrogram")
    ax.scatter(t, _pitch(f, req.axis), s=6, color=PARTIAL_COLOR, label="partials", gid="partials",
               zorder=3)
    if d.get("median_track"):
        mt, mf = np.asarray(d["median_track"], dtype=float).T
        ax.plot(mt, _pitch(mf, req.axis), color=MEDIAN_COLOR, lw=1.5, marker="o", ms=3,
                label="median difference", gid="median-track", zorder=4)
    ys = _pitch(f, req.axis)
    if d.get("median_track"):
        ys = np.concatenate([ys, _pitch(mf, req.axis)])
    pad = 2.0 if req.axis == "midi" else 0.05 * (ys.max() - ys.min() + 1.0)
    ax.set_ylim(ys.min() - pad, ys.max() + pad)
    ax.set_xlabel("Time (s)")
    ax.set_ylabel(_freq_label(req.axis))
    if req.axis == "midi":
        _midi_axis(ax, "y", *ax.get_ylim())
    ax.legend(loc="upper right")


def _spectrum_frame(ax, req: PlotRequest):
    d = req.data
    _require(d, "freqs", "power_db", "partials")
    freqs = np.asarray(d["freqs"], dtype=float)
    keep = freqs > 0
    x = _pitch(freqs[keep], req.axis)
    ax.plot(x, np.asarray(d["power_db"], dtype=float)[keep], color="0.3", lw=0.8, gid="spectrum")
    parts = np.sort(np.asarray(d["partials"], dtype=float))
    px = _pitch(parts, req.axis)
    for k, v in enumerate(px):
        ax.axvline(v, color=PARTIAL_COLOR, lw=1.0, gid=f"partial-{k}")
    ax.axvline(px[0], color=MEDIAN_COLOR, lw=2.0, gid="lowest-partial", label="lowest partial")
    hi = parts.max() * 1.5
    ax.set_xlim(x.min() if req.axis == "hz" else px[0] - 12, _pitch([hi], req.axis)[0])
    ax.set_xlabel(_freq_label(req.axis))
    ax.set_ylabel("Power (dB)")
    if req.axis == "midi":
        _midi_axis(ax, "x", *ax.get_xlim())
    ax.legend(loc="upper right")


def _diff_distribution(ax, req: PlotRequest):
    d = req.data
    _require(d, "values_hz")
    v = _pitch(d["values_hz"], req.axis)
    if req.axis == "midi":
        width = 0.1  # 10-cent bins centred on tenths of a semitone
    else:
        width = float(req.options.get("bin_hz", 1.0))
    lo = np.floor(v.min() / width - 0.5) * width + 0.5 * width
    edges = np.arange(lo - width, v.max() + 2 * width, width)
    counts, edges = np.histogram(v, edges)
    ax.bar(edges[:-1], counts, width=width, align="edge", color=MEDIAN_COLOR, gid="histogram")
    ax.set_xlabel("Frequency difference " + ("(MIDI)" if req.axis == "midi" else "(Hz)"))
    ax.set_ylabel("Count")
    if req.axis == "midi":
        _midi_axis(ax, "x", *ax.get_xlim())


def _sweep_curves(ax, req: PlotRequest):
    rows = req.data.get("rows")
    if not rows:
        raise ValueError("plot data 'rows' is missing or empty")
    g = np.array([r.g for r in rows])
    for label, attr in _SWEEP_SERIES:
        y = _pitch([getattr(r, attr) for r in rows], req.axis)
        ax.plot(g, y, marker="o", ms=3, lw=1.2, label=label, gid=f"curve-{label}")
    ax.set_xlabel("g_hz")
    ax.set_ylabel("Estimate " + ("(MIDI)" if req.axis == "midi" else "(Hz)"))
    if req.axis == "midi":
        _midi_axis(ax, "y", *ax.get_ylim())
    ax.legend(loc="upper left")


def _shift_diagram(ax, req: PlotRequest):
    d = req.data
    _require(d, "partials")
    f = np.sort(np.asarray(d["partials"], dtype=float))
    spacing, shift = float(d["d"]), float(d["s"])
    if not spacing > 0:
        raise ValueError("shift diagram needs a positive spacing d")
    n = np.maximum(1, np.round((f - shift) / spacing))
    ax.plot(n, _pitch(n * spacing, req.axis), ls="none", marker="_", ms=14, color="0.5",
            label="harmonic grid n*d", gid="harmonic-grid")
    ax.plot(n, _pitch(n * spacing + shift, req.axis), ls="none", marker="x", ms=6,
            color=MEDIAN_COLOR, label="shifted grid n*d+s", gid="shifted-grid")
    ax.plot(n, _pitch(f, req.axis), ls="none", marker="o", ms=5, color=PARTIAL_COLOR,
            markeredgecolor="0.2", label="partials", gid="partials")
    ax.set_xlabel("Grid index n")
    ax.set_ylabel(_freq_label(req.axis))
    if req.axis == "midi":
        _midi_axis(ax, "y", *ax.get_ylim())
    ax.legend(loc="upper left")


_DRAW = {
    "spectrogram_overlay": _spectrogram_overlay,
    "spectrum_frame": _spectrum_frame,
    "diff_distribution": _diff_distribution,
    "sweep_curves": _sweep_curves,
    "shift_diagram": _shift_diagram,
}


def build_figure(request: PlotRequest) -> Figure:
    """Draw the request onto a fresh 1200x400 figure (not yet saved)."""
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=FIG_SIZE_IN, dpi=FIG_DPI)
        FigureCanvasSVG(fig)
        ax = fig.add_subplot(1, 1, 1)
        _DRAW[request.kind](ax, request)
        ax.grid(True, which="major", lw=0.4, alpha=0.6)
        if request.title:
            ax.set_title(request.title)
        fig.tight_layout()
    return fig


def render_plot(request: PlotRequest) -> str:
    """Render to an SVG string; also written to ``request.output_path`` when set.

    Output bytes depend only on the request: no timestamps, fixed id salt.
    """
    fig = build_figure(request)
    buf = io.StringIO()
    with matplotlib.rc_context(_RC):
        fig.savefig(buf, format="svg", dpi=FIG_DPI, metadata={"Date": None})
    # matplotlib sizes the root in points; the viewBox keeps the drawing scaling to 1200x400
    w, h = VIEWPORT_PX
    svg = re.sub(r'<svg ([^>]*?)width="[^"]*" height="[^"]*"', rf'<svg \1width="{w}" height="{h}"',
                 buf.getvalue(), count=1)
    if request.output_path is not None:
        Path(request.output_path).write_text(svg)
    return svg
