"""Equal-loudness-contour weighting of power spectra.

The default contour is evaluated from the ISO 226 tabulated parameters
(af, Lu, Tf) with the standard's SPL formula, then interpolated linearly in
(log-frequency, dB). A contour can be replaced by any (Hz, dB) table, e.g.
one read with :func:`load_contour_csv`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

ISO_FREQS = np.array([
    20, 25, 31.5, 40, 50, 63, 80, 100, 125, 160, 200, 250, 315, 400, 500,
    630, 800, 1000, 1250, 1600, 2000, 2500, 3150, 4000, 5000, 6300, 8000,
    10000, 12500,
])
ISO_AF = np.array([
    0.532, 0.506, 0.480, 0.455, 0.432, 0.409, 0.387, 0.367, 0.349, 0.330,
    0.315, 0.301, 0.288, 0.276, 0.267, 0.259, 0.253, 0.250, 0.246, 0.244,
    0.243, 0.243, 0.243, 0.242, 0.242, 0.245, 0.254, 0.271, 0.301,
])
ISO_LU = np.array([
    -31.6, -27.2, -23.0, -19.1, -15.9, -13.0, -10.3, -8.1, -6.2, -4.5,
    -3.1, -2.0, -1.1, -0.4, 0.0, 0.3, 0.5, 0.0, -2.7, -4.1, -1.0, 1.7,
    2.5, 1.2, -2.1, -7.1, -11.2, -10.7, -3.1,
])
ISO_TF = np.array([
    78.5, 68.7, 59.5, 51.1, 44.0, 37.5, 31.5, 26.5, 22.1, 17.9, 14.4,
    11.4, 8.6, 6.2, 4.4, 3.0, 2.2, 2.4, 3.5, 1.7, -1.3, -4.2, -6.0,
    -5.4, -1.5, 6.0, 12.6, 13.9, 12.3,
])


@dataclass(frozen=True)
class LoudnessContour:
    freqs: tuple[float, ...]
    spl_db: tuple[float, ...]
    phon: float

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        if f.size != len(self.spl_db) or f.size < 2:
            raise ValueError("contour needs matching frequency/SPL sequences of length >= 2")
        if np.any(np.diff(f) <= 0):
            raise ValueError("contour frequencies must be strictly increasing")
        if f[0] > 20 or f[-1] < 12500:
            raise ValueError("contour must cover at least 20 Hz - 12.5 kHz")
        if not 0 <= self.phon <= 90:
            raise ValueError(f"phon level must lie in 0..90, got {self.phon}")
        object.__setattr__(self, "freqs", tuple(float(v) for v in f))
        object.__setattr__(self, "spl_db", tuple(float(v) for v in self.spl_db))


def iso226_spl(phon: float) -> np.ndarray:
    """SPL at the ISO anchor frequencies for a loudness level in phon."""
    af = (4.47e-3 * (10 ** (0.025 * phon) - 1.15)
          + (0.4 * 10 ** ((ISO_TF + ISO_LU) / 10 - 9)) ** ISO_AF)
    return 10.0 / ISO_AF * np.log10(af) - ISO_LU + 94.0


@lru_cache(maxsize=None)
def iso226_contour(phon: float = 50.0) -> LoudnessContour:
    spl = iso226_spl(phon)
    # the formula lands within ~0.1 dB of the phon value at 1 kHz; pin it exactly
    k = int(np.flatnonzero(ISO_FREQS == 1000)[0])
    spl = spl + (phon - spl[k])
    spl[k] = phon
    return LoudnessContour(tuple(ISO_FREQS), tuple(spl), float(phon))


def load_contour_csv(path, phon: float = 50.0) -> LoudnessContour:
    """Read ``hz,db`` rows (an optional header line is skipped)."""
    rows = []
    with open(Path(path), newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except ValueError:
                if rows:
                    raise
                continue  # header
    if not rows:
        raise ValueError(f"no contour rows in {path}")
    f, db = zip(*rows)
    return LoudnessContour(f, db, phon)


def contour_spl(contour: LoudnessContour, f):
    """SPL (dB) needed at frequency `f` for equal loudness; clamped outside the table."""
    logf = np.log10(np.asarray(contour.freqs))
    fq = np.clip(np.asarray(f, dtype=float), contour.freqs[0], contour.freqs[-1])
    out = np.interp(np.log10(fq), logf, contour.spl_db)
    return float(out) if np.ndim(out) == 0 else out


def loudness_weight(contour: LoudnessContour, f):
    """Power weight ``10 ** ((phon - SPL(f)) / 10)``, equal to 1 at 1 kHz."""
    return 10.0 ** ((contour.phon - contour_spl(contour, f)) / 10.0)


def weight_power_spectrum(freqs, power, contour: LoudnessContour):
    """Return the weighted copy of a power spectrum given on `freqs`."""
    power = np.asarray(power, dtype=float)
    if np.any(power < 0):
        raise ValueError("power spectrum must be nonnegative")
    return power * loudness_weight(contour, freqs)
