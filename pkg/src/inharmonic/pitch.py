"""Autocorrelation pitch and the partial-difference sweep experiment."""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass

import numpy as np

from .audio_io import AudioBuffer, FrameSpec
from .metrics import diff_stats
from .spectral import analysis_frame, stft
from .synth import render, sweep_set

SWEEP_CSV_HEADER = ("g_hz", "f0_partial_hz", "autocorr_hz", "diff_median_hz",
                    "diff_mean_hz", "first_pair_diff_hz")


def _autocorr(x: np.ndarray) -> np.ndarray:
    n = x.size
    size = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(x, size)
    return np.fft.irfft(spec * np.conj(spec), size)[:n]


def autocorr_pitch(buffer: AudioBuffer, fmin: float = 60.0, fmax: float = 500.0) -> float:
    """Frequency of the highest autocorrelation peak in ``[1/fmax, 1/fmin]`` seconds of lag.

    The peak is chosen on the autocorrelation divided by its lag-0 value only.
    Dividing by the overlap count as well flattens the decay with lag, so every
    multiple of the period scores the same and the longest one in range can
    win. The chosen lag is then refined on the overlap-normalized curve, whose
    peaks are not pulled toward shorter lags.
    """
    if not 0 < fmin < fmax:
        raise ValueError("need 0 < fmin < fmax")
    sr = buffer.sample_rate
    if fmax >= sr / 2:
        raise ValueError("fmax must lie below Nyquist")
    if buffer.duration < 2.0 / fmin:
        raise ValueError(f"buffer of {buffer.duration:.4f} s is shorter than 2/fmin = {2.0 / fmin:.4f} s")
    x = buffer.samples - buffer.samples.mean()
    r = _autocorr(x)
    if not r[0] > 0:
        raise ValueError("no positive autocorrelation peak: signal is silent")
    r = r / r[0]

    lo = max(1, int(np.floor(sr / fmax)))
    hi = min(r.size - 2, int(np.ceil(sr / fmin)))
    seg = r[lo:hi + 1]
    interior = np.flatnonzero((seg[1:-1] > seg[:-2]) & (seg[1:-1] >= seg[2:])) + 1
    if interior.size == 0 or not seg[interior].max() > 0:
        raise ValueError("no positive autocorrelation peak in the search band")
    k = lo + int(interior[np.argmax(seg[interior])])

    unbiased = r * x.size / (x.size - np.arange(x.size))
    while 1 < k < hi and unbiased[k + 1] > unbiased[k]:
        k += 1
    while k > lo and unbiased[k - 1] > unbiased[k]:
        k -= 1
    a, b, c = unbiased[k - 1], unbiased[k], unbiased[k + 1]
    denom = a - 2 * b + c
    lag = k + (0.5 * (a - c) / denom if denom < 0 else 0.0)
    return float(sr / lag)


@dataclass
class SweepRow:
    g: float
    f0_partial: float
    autocorr_peak_hz: float
    overtone_diff_median: float
    overtone_diff_mean: float
    first_pair_diff: float
    valid: bool = True


def _nan_row(g: float) -> SweepRow:
    nan = float("nan")
    return SweepRow(g, nan, nan, nan, nan, nan, valid=False)


def run_sweep_experiment(n_steps: int = 21, n_partials: int = 21, frame: FrameSpec = FrameSpec(),
                         fmin: float = 60.0, fmax: float = 500.0, floor_db: float = 60.0,
                         sample_rate: int = 44100, **tone_overrides) -> list[SweepRow]:
    """Render each sweep member and compare autocorrelation pitch with partial differences.

    Partials come from the frame-averaged spectrum of the tone (a steady
    state). A member whose analysis fails yields a row with ``valid=False``.
    """
    rows = []
    for g, spec in sweep_set(n_steps, n_partials, **tone_overrides):
        try:
            buf = render(spec, sample_rate)
            pf = analysis_frame(stft(buf, frame), floor_db, max_peaks=n_partials)
            if len(pf) < 3:
                raise ValueError(f"only {len(pf)} partials found")
            ds = diff_stats(pf)
            rows.append(SweepRow(
                g=g,
                f0_partial=float(pf.freqs[0]),
                autocorr_peak_hz=autocorr_pitch(buf, fmin, fmax),
                overtone_diff_median=ds.overtone_median,
                overtone_diff_mean=ds.overtone_mean,
                first_pair_diff=float(ds.diffs[0]),
            ))
        except ValueError:
            rows.append(_nan_row(g))
    return rows


def sweep_csv(rows) -> str:
    """CSV text with a fixed header; values to 6 decimals, invalid rows as empty cells."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SWEEP_CSV_HEADER)
    for r in rows:
        vals = astuple(r)[:6]
        w.writerow([f"{v:.6f}" if np.isfinite(v) else "" for v in vals])
    return out.getvalue()
