"""STFT power spectra, peak picking and regularity-constrained partial tracking."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .audio_io import AudioBuffer, FrameSpec, frames
from .loudness import LoudnessContour, loudness_weight
from .metrics import (NoRegularGridError, estimate_f0_least_deviating, estimate_shift,
                      harmonic_deviations)
from .partials import Partial, PartialFrame, cents

_TINY = 1e-30


@dataclass
class Spectrum:
    """Unweighted power spectrum with an optional per-bin loudness weight."""

    freqs: np.ndarray
    power: np.ndarray
    time: float = 0.0
    weighting: LoudnessContour | None = None

    @property
    def weighted_power(self) -> np.ndarray:
        if self.weighting is None:
            return self.power
        return self.power * loudness_weight(self.weighting, np.maximum(self.freqs, self.freqs[1]))


def stft(buffer: AudioBuffer, spec: FrameSpec = FrameSpec(),
         weighting: LoudnessContour | None = None) -> list[Spectrum]:
    """Per-frame power spectra scaled so a sinusoid of amplitude A peaks near A**2.

    The loudness weighting is attached, not applied: peak frequencies are
    estimated on the raw spectrum, since a contour sloping across a peak
    would pull its interpolated frequency by several cents.
    """
    win = spec.window()
    scale = 2.0 / win.sum()
    freqs = np.fft.rfftfreq(spec.window_size, 1.0 / buffer.sample_rate)
    return [Spectrum(freqs, np.abs(np.fft.rfft(block) * scale) ** 2, t, weighting)
            for t, block in frames(buffer, spec)]


def pick_peaks(spectrum: Spectrum, floor_db: float = 60.0, max_peaks: int = 27,
               min_sep_cents: float = 25.0, noise_margin_db: float | None = None) -> list[Partial]:
    """Local maxima within `floor_db` of the frame maximum, refined by dB parabolas.

    Peaks closer than `min_sep_cents` to a stronger peak are dropped; at most
    `max_peaks` of the strongest survive. Returned in ascending frequency.
    With `noise_margin_db`, peaks must also clear the median bin power (a
    noise-floor estimate for sparse spectra) by that margin. When a loudness
    weighting is attached, the `floor_db` test and the reported powers use
    weighted power; the noise test does not.
    """
    p = spectrum.power
    if p.size < 3 or not np.max(p) > 0:
        return []
    db = 10.0 * np.log10(p + _TINY)
    wdb = 10.0 * np.log10(spectrum.weighted_power + _TINY)
    mid = db[1:-1]
    k = np.flatnonzero((mid > db[:-2]) & (mid >= db[2:]) & (p[1:-1] > 0)) + 1
    if k.size == 0:
        return []

    a, b, c = db[k - 1], db[k], db[k + 1]
    denom = a - 2 * b + c
    off = np.where(denom < 0, 0.5 * (a - c) / np.where(denom < 0, denom, 1.0), 0.0)
    peak_db = b - 0.25 * (a - c) * off
    df = spectrum.freqs[1] - spectrum.freqs[0]
    freq = spectrum.freqs[k] + off * df
    # the noise floor is physical, so it is judged before weighting
    ok = np.ones(k.size, dtype=bool)
    if noise_margin_db is not None:
        ok = peak_db >= float(np.median(db)) + noise_margin_db
    if spectrum.weighting is not None:
        peak_db = peak_db + 10.0 * np.log10(loudness_weight(spectrum.weighting, np.maximum(freq, df)))
    # interpolated heights can exceed the top bin, so the floor follows the highest peak
    ok &= peak_db >= max(wdb.max(), peak_db.max()) - floor_db
    freq, peak_db = freq[ok], peak_db[ok]

    kept: list[tuple[float, float]] = []
    for i in np.argsort(-peak_db, kind="stable"):
        if freq[i] <= 0:
            continue
        if any(abs(cents(freq[i], fk)) < min_sep_cents for fk, _ in kept):
            continue
        kept.append((float(freq[i]), float(10 ** (peak_db[i] / 10))))
        if len(kept) == max_peaks:
            break
    return [Partial(f, pw) for f, pw in sorted(kept)]


@dataclass
class TrackingConfig:
    floor_db: float = 60.0
    max_candidates: int = 60
    max_partials: int = 27
    tol_cents: float = 35.0
    max_delta_cents: float = 50.0
    noise_margin_db: float = 15.0
    max_gap: int = 3
    harmonic_tol_cents: float = 60.0
    harmonic_gain_db: float = 1.0
    anchor_range: tuple[float, float] = (0.5, 1.5)
    anchor_floor_db: float = 30.0


@dataclass
class _Gated:
    keep: list[int]
    d: float
    s: float
    indices: np.ndarray


def _gate(freqs: np.ndarray, powers: np.ndarray, tol: float, seed_d: float | None,
          max_gap: int) -> _Gated | None:
    """Drop the worst-fitting peak until every survivor sits within `tol` of the grid.

    The surviving series is cut at the first run of more than `max_gap`
    empty grid lines; above a few kHz grid lines are only cents apart and
    any noise peak would otherwise pass.
    """
    keep = list(range(freqs.size))
    while len(keep) >= 3:
        sub = PartialFrame.from_freqs(freqs[keep], powers[keep])
        try:
            fit = estimate_shift(sub, seed_d=seed_d, max_rms_cents=np.inf)
        except NoRegularGridError:
            return None
        dev = np.abs(cents(freqs[keep], fit.predict()))
        # two peaks on one grid line: the farther one is the worse fit
        idx = fit.indices
        for j in range(1, len(keep)):
            if idx[j] == idx[j - 1]:
                loser = j if dev[j] >= dev[j - 1] else j - 1
                dev[loser] = np.inf
        worst = int(np.argmax(dev))
        if dev[worst] <= tol:
            idx = fit.indices
            cut = np.flatnonzero(np.diff(idx) > max_gap + 1)
            if cut.size:
                # keep the run holding the most power
                runs = np.split(np.arange(len(keep)), cut + 1)
                best = max(runs, key=lambda r: powers[[keep[i] for i in r]].sum())
                keep = [keep[i] for i in best]
                idx = idx[best]
            if len(keep) < 3:
                return None
            return _Gated(keep, fit.d, fit.s, idx)
        del keep[worst]
    return None


def _harmonic_gate(freqs: np.ndarray, powers: np.ndarray, tol: float, max_gap: int) -> _Gated | None:
    """Keep peaks near harmonics of the power-weighted least-deviating f0.

    Scattered partials fit no straight grid, but still sit near a harmonic
    series. The tolerance narrows to a third of the harmonic spacing so that
    high harmonics do not swallow every noise peak.
    """
    f0, _ = estimate_f0_least_deviating(PartialFrame.from_freqs(freqs, powers))
    h = np.maximum(1.0, np.round(freqs / f0))
    dev = np.abs(harmonic_deviations(freqs, f0))
    limit = np.minimum(tol, 400.0 * np.log2((h + 1.0) / h))
    keep: dict[int, int] = {}
    for i in np.flatnonzero(dev <= limit):
        k = int(h[i])
        if k not in keep or dev[i] < dev[keep[k]]:
            keep[k] = int(i)
    if len(keep) < 3:
        return None
    order = sorted(keep)
    idx = np.array(order)
    runs = np.split(np.arange(idx.size), np.flatnonzero(np.diff(idx) > max_gap + 1) + 1)
    best = max(runs, key=lambda r: powers[[keep[order[i]] for i in r]].sum())
    if best.size < 3:
        return None
    return _Gated([keep[order[i]] for i in best], f0, 0.0, idx[best])


def _stiff_numbers(freqs: np.ndarray, f0: float, B: float) -> np.ndarray:
    """Real-valued partial numbers n solving ``f = n f0 sqrt(1 + B n^2)``."""
    r2 = (freqs / f0) ** 2
    if B <= 0:
        return np.sqrt(r2)
    return np.sqrt((np.sqrt(1.0 + 4.0 * B * r2) - 1.0) / (2.0 * B))


def _stiff_gate(freqs: np.ndarray, powers: np.ndarray, base: _Gated, tol: float,
                max_gap: int) -> _Gated | None:
    """Re-gate on a stiff-string series fitted to the partials a harmonic-like grid kept.

    String stiffness stretches upper partials off any straight grid. Since
    ``(f/n)^2 = f0^2 + f0^2 B n^2``, one weighted linear fit gives f0 and B;
    every peak is then matched to its nearest stiff-string partial.
    """
    wrap = base.s if base.s <= base.d / 2 else base.s - base.d
    if len(base.keep) < 6 or abs(wrap) > 0.1 * base.d:
        return None
    keep = list(base.keep)
    n = base.indices + (1 if base.s > base.d / 2 else 0)
    for _ in range(2):
        f, w = freqs[keep], powers[keep]
        if np.any(n < 1):
            return None
        A = np.column_stack([np.ones(len(keep)), n * n])
        sw = np.sqrt(w / w.sum())
        (a, b), *_ = np.linalg.lstsq(A * sw[:, None], (f / n) ** 2 * sw, rcond=None)
        if not a > 0:
            return None
        f0, B = float(np.sqrt(a)), max(0.0, float(b / a))
        h = np.maximum(1.0, np.round(_stiff_numbers(freqs, f0, B)))
        dev = np.abs(cents(freqs, f0 * h * np.sqrt(1.0 + B * h * h)))
        limit = np.minimum(tol, 400.0 * np.log2((h + 1.0) / h))
        best: dict[int, int] = {}
        for i in np.flatnonzero(dev <= limit):
            k = int(h[i])
            if k not in best or dev[i] < dev[best[k]]:
                best[k] = int(i)
        if len(best) < 3:
            return None
        order = sorted(best)
        idx = np.array(order)
        runs = np.split(np.arange(idx.size), np.flatnonzero(np.diff(idx) > max_gap + 1) + 1)
        run = max(runs, key=lambda r: powers[[best[order[i]] for i in r]].sum())
        keep, n = [best[order[i]] for i in run], idx[run].astype(float)
    if len(keep) < 3 or B == 0.0:
        return None
    return _Gated(keep, f0, 0.0, n)


def _track_frame(peaks: list[Partial], cfg: TrackingConfig, prev_d: float | None):
    freqs = np.array([p.freq for p in peaks])
    powers = np.array([p.power for p in peaks])
    # energy-weighted and plain median gaps disagree on steep spectra; try both
    seeds = [None, float(np.median(np.diff(freqs)))]
    if prev_d:
        seeds.insert(0, prev_d)
    attempts = [g for g in (_gate(freqs, powers, cfg.tol_cents, sd, cfg.max_gap) for sd in seeds)
                if g is not None]

    def jump(g):
        return abs(cents(g.d, prev_d)) if prev_d else 0.0

    best = None
    if attempts:
        best = max(attempts, key=lambda g: (len(g.keep), -jump(g)))
        if jump(best) > cfg.max_delta_cents:
            smooth = [g for g in attempts if jump(g) <= cfg.max_delta_cents]
            if smooth and len(smooth[0].keep) >= 0.8 * len(best.keep):
                best = smooth[0]
    # a stiff-string series replaces a straight grid only by explaining more partials
    if best is not None and len(best.keep) < freqs.size:
        stiff = _stiff_gate(freqs, powers, best, cfg.tol_cents, cfg.max_gap)
        if stiff is not None and len(stiff.keep) > len(best.keep):
            best = stiff
    # harmonic gating wins only by explaining more partials, or as many with clearly more energy
    harm = _harmonic_gate(freqs, powers, cfg.harmonic_tol_cents, cfg.max_gap)
    if harm is not None:
        gain = 10 ** (cfg.harmonic_gain_db / 10)
        if (best is None or len(harm.keep) > len(best.keep)
                or (len(harm.keep) == len(best.keep)
                    and powers[harm.keep].sum() > gain * powers[best.keep].sum())):
            best = harm
    return best


def track_partials(spectra: Sequence[Spectrum], config: TrackingConfig = TrackingConfig()) -> list[PartialFrame]:
    """Keep, per frame, the peaks explained by a regular grid ``n * d + s``.

    Peaks are also matched against a harmonic series (for scattered
    partials) and a stiff-string series (for stretched ones); either wins
    only by explaining more peaks than the grid.

    The grid is seeded by the previous frame's spacing. The lowest peak is
    kept even when off the grid if it lies 0.5-1.5 spacings below the first
    gridded partial and is not much weaker than the strongest one: that is
    the anchor partial of a shifted-residue tone.
    """
    cfg = config
    out: list[PartialFrame] = []
    prev_d = None
    for spec in spectra:
        peaks = pick_peaks(spec, cfg.floor_db, cfg.max_candidates,
                           noise_margin_db=cfg.noise_margin_db)
        if len(peaks) < 3:
            out.append(PartialFrame(spec.time, peaks[:cfg.max_partials], cfg.max_partials, reliable=False))
            continue
        gated = _track_frame(peaks, cfg, prev_d)
        if gated is None:
            out.append(PartialFrame(spec.time, peaks[:cfg.max_partials], cfg.max_partials, reliable=False))
            continue

        keep = sorted(gated.keep)
        first = keep[0]
        if first > 0:
            strongest = max(peaks[i].power for i in keep)
            lo, hi = cfg.anchor_range
            candidates = [i for i in range(first)
                          if lo * gated.d <= peaks[first].freq - peaks[i].freq <= hi * gated.d
                          and peaks[i].power >= strongest * 10 ** (-cfg.anchor_floor_db / 10)]
            if candidates:
                keep.insert(0, max(candidates, key=lambda i: peaks[i].power))
        chosen = [peaks[i] for i in keep][:cfg.max_partials]
        out.append(PartialFrame(spec.time, chosen, cfg.max_partials,
                                reliable=len(chosen) >= 3, grid=(gated.d, gated.s)))
        prev_d = gated.d
    return out


def analysis_frame(spectra: Sequence[Spectrum], floor_db: float = 60.0, max_peaks: int = 27) -> PartialFrame:
    """Peaks of the frame-averaged spectrum, for steady tones."""
    if not spectra:
        raise ValueError("no spectra to average")
    mean = replace(spectra[0], power=np.mean([s.power for s in spectra], axis=0),
                   time=float(np.mean([s.time for s in spectra])))
    return PartialFrame(mean.time, pick_peaks(mean, floor_db, max_peaks), max_peaks)
