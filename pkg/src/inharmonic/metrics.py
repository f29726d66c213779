"""Statistics over partial frames.

Consecutive-difference statistics, least-deviating f0, regular-grid
(spacing + shift) fitting, the three-type inharmonicity classifier and the
stiff-string inharmonicity fit all live here.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .partials import PartialFrame, cents


class NoRegularGridError(ValueError):
    """Raised when partials cannot be explained by ``n * d + s``."""


class FitError(ValueError):
    """Raised when the inharmonicity fit does not converge to a usable model."""


def weighted_median(values, weights=None) -> float:
    """Lower weighted median: smallest value whose cumulative weight reaches W/2."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("weighted median of an empty sequence")
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if not w.sum() > 0:
        w = np.ones_like(v)
    order = np.argsort(v, kind="stable")
    cum = np.cumsum(w[order])
    k = int(np.searchsorted(cum, 0.5 * cum[-1], side="left"))
    # searchsorted finds the first cum >= W/2 up to float rounding
    while k > 0 and math.isclose(cum[k - 1], 0.5 * cum[-1], rel_tol=1e-12):
        k -= 1
    return float(v[order][k])


def _weighted_mean(v, w) -> float:
    return float(np.average(v, weights=w)) if np.sum(w) > 0 else float(np.mean(v))


@dataclass
class DiffStats:
    diffs: np.ndarray
    weights: np.ndarray
    weighted_median: float
    weighted_mean: float
    mad_cents: float
    overtone_median: float | None
    overtone_mean: float | None
    first_diff_outlier: bool
    first_diff_cents: float


def diff_stats(frame: PartialFrame, outlier_cents: float = 40.0) -> DiffStats:
    """Energy-weighted statistics of the gaps between consecutive partials.

    Each gap is weighted by the summed power of its two partials. The first
    gap is flagged as an outlier when it sits more than `outlier_cents` away
    from the median of the remaining (overtone) gaps.
    """
    if len(frame) < 2:
        raise ValueError("diff_stats needs at least 2 partials")
    f, p = frame.freqs, frame.powers
    diffs = np.diff(f)
    weights = p[:-1] + p[1:]
    med = weighted_median(diffs, weights)
    mad = float(np.median(np.abs(cents(diffs, med))))

    if diffs.size >= 2:
        ot_med = weighted_median(diffs[1:], weights[1:])
        ot_mean = _weighted_mean(diffs[1:], weights[1:])
        first = float(cents(diffs[0], ot_med))
    else:
        ot_med = ot_mean = None
        first = 0.0
    return DiffStats(
        diffs=diffs,
        weights=weights,
        weighted_median=med,
        weighted_mean=_weighted_mean(diffs, weights),
        mad_cents=mad,
        overtone_median=ot_med,
        overtone_mean=ot_mean,
        first_diff_outlier=abs(first) > outlier_cents,
        first_diff_cents=first,
    )


def _harmonic_cost(f, w, f0):
    """Weighted RMS cents from each partial to its nearest harmonic; vectorised over `f0`."""
    f0 = np.asarray(f0, dtype=float)[..., None]
    h = np.maximum(1.0, np.round(f / f0))
    dev = 1200.0 * np.log2(f / (h * f0))
    return np.sqrt((dev * dev) @ w / np.sum(w))


def harmonic_deviations(f, f0: float) -> np.ndarray:
    """Cents from each frequency to its nearest harmonic of `f0`."""
    f = np.asarray(f, dtype=float)
    return 1200.0 * np.log2(f / (np.maximum(1.0, np.round(f / f0)) * f0))


def estimate_f0_least_deviating(frame: PartialFrame, tolerance_cents: float = 50.0,
                                resolution_cents: float = 0.1,
                                max_subharmonic: int = 8) -> tuple[float, float]:
    """Fundamental of the harmonic series that deviates least from the partials.

    The cost is the power-weighted RMS deviation (cents) of every partial
    from its nearest harmonic. Every subharmonic of a good candidate is at
    least as good, so the global minimum is useless. Instead, windows of
    +-`tolerance_cents` around ``f_lowest / k`` are searched for
    k = 1, 2, ... `max_subharmonic`, and the best candidate of the first
    window whose cost stays within `tolerance_cents` is returned; when no
    window qualifies, the best candidate overall. Returns
    ``(f0, deviation_cents)``.
    """
    if len(frame) < 2:
        raise ValueError("least-deviating f0 needs at least 2 partials")
    f = frame.freqs
    w = frame.powers
    if not w.sum() > 0:
        w = np.ones_like(f)
    steps = int(np.ceil(tolerance_cents / resolution_cents))
    offsets = 2.0 ** (np.arange(-steps, steps + 1) * resolution_cents / 1200.0)

    best = None
    for k in range(1, max_subharmonic + 1):
        grid = f[0] / k * offsets
        cost = _harmonic_cost(f, w, grid)
        i = int(np.argmin(cost))
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        res = minimize_scalar(lambda g: float(_harmonic_cost(f, w, g)), bounds=(a, b),
                              method="bounded", options={"xatol": 1e-7 * grid[i]})
        cand = (float(res.x), float(res.fun)) if res.fun <= cost[i] else (float(grid[i]), float(cost[i]))
        if cand[1] <= tolerance_cents:
            return cand
        if best is None or cand[1] < best[1]:
            best = cand
    return best


@dataclass
class GridFit:
    d: float
    s: float
    rms_cents: float
    indices: np.ndarray = field(repr=False)

    def predict(self) -> np.ndarray:
        return self.indices * self.d + self.s


def _fit_line(n, f):
    A = np.column_stack([n, np.ones_like(n)])
    (d, s), *_ = np.linalg.lstsq(A, f, rcond=None)
    return float(d), float(s)


def _nearest_indices(f, d0):
    return max(1.0, round(f[0] / d0)) + np.round((f - f[0]) / d0)


def estimate_shift(frame: PartialFrame, seed_d: float | None = None,
                   max_rms_cents: float = 50.0) -> GridFit:
    """Least-squares fit of ``f_k = n_k * d + s`` with the shift reported in ``[0, d)``.

    Harmonic indices are the nearest integers counted from the lowest
    partial in steps of a seed spacing (the energy-weighted median gap unless
    `seed_d` is given), then reassigned once from the first fit and refitted.
    """
    if len(frame) < 3:
        raise ValueError("estimate_shift needs at least 3 partials")
    f = frame.freqs
    d0 = seed_d if seed_d else diff_stats(frame).weighted_median

    n = _nearest_indices(f, d0)
    if np.unique(n).size < 2:
        raise NoRegularGridError("all partials map to one grid line")
    d, s = _fit_line(n, f)
    if not d > 0:
        raise NoRegularGridError(f"degenerate grid spacing {d:.3f} Hz")
    n2 = np.round((f - s) / d)
    if np.all(np.diff(n2) >= 0) and np.unique(n2).size >= 2 and not np.array_equal(n2, n):
        n = n2
        d, s = _fit_line(n, f)

    # fold the shift into [0, d); whole spacings move into the indices
    q = math.floor(s / d)
    s -= q * d
    n = n + q
    if d - s < 1e-9 * d:
        s, n = 0.0, n + 1
    elif s < 1e-9 * d:
        s = 0.0

    pred = n * d + s
    if np.any(pred <= 0):
        raise NoRegularGridError("grid predicts nonpositive frequencies")
    rms = float(np.sqrt(np.mean(cents(f, pred) ** 2)))
    if rms > max_rms_cents:
        raise NoRegularGridError(
            f"no regular grid: rms deviation {rms:.1f} cents exceeds {max_rms_cents:g}")
    return GridFit(d, s, rms, n)


@dataclass
class Thresholds:
    tight_cents: float = 20.0
    outlier_cents: float = 40.0
    jitter_cents: float = 8.0
    noisy_max_cents: float = 60.0
    loose_cents: float = 45.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"threshold {k} must be a positive number of cents, got {v}")
        if not self.jitter_cents < self.noisy_max_cents:
            raise ValueError("jitter_cents must be below noisy_max_cents")

    @classmethod
    def from_file(cls, path) -> "Thresholds":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        known = {f.name for f in fields(cls)}
        values = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key = key.strip()
            if not sep or key not in known:
                raise ValueError(f"{path}:{lineno}: unknown threshold entry {line!r}")
            values[key] = float(val)
        return cls(**values)

    def as_dict(self) -> dict:
        return asdict(self)


KINDS = ("harmonic", "type1_shifted_residue", "type2_regular",
         "type3_noisy_harmonic", "unclassified")


@dataclass
class ToneClassification:
    kind: str
    spacing_d: float
    shift_s: float
    jitter_cents: float
    octave_adjusted: bool
    variant: str | None = None


def scatter_half_width(dev_cents) -> float:
    """Unbiased half-width of a uniform scatter: ``(max - min) / 2 * (N + 1) / (N - 1)``.

    Shifting every deviation by the same amount leaves it unchanged, so a
    slightly wrong reference f0 does not leak into the estimate.
    """
    d = np.asarray(dev_cents, dtype=float)
    if d.size < 2:
        raise ValueError("scatter needs at least 2 deviations")
    n = d.size
    return float((d.max() - d.min()) / 2.0 * (n + 1) / (n - 1))


def classify_tone(frame: PartialFrame, thresholds: Thresholds = Thresholds()) -> ToneClassification:
    """Sort a frame into harmonic / type 1 / type 2 / type 3 / unclassified.

    The reference spacing is the energy-weighted median of the overtone gaps
    (all gaps but the first). When that spacing sits an octave above the
    lowest partial, as with odd-harmonic tones, spacing and gaps are halved
    before the checks. Jitter is the estimated half-width of the partials'
    cent deviations from the least-deviating harmonic series (see
    `scatter_half_width`), so it tracks per-partial scatter directly instead
    of growing with harmonic number as gap deviations do.
    """
    if len(frame) < 4:
        raise ValueError("classify_tone needs at least 4 partials")
    t = thresholds
    f = frame.freqs
    p = frame.powers
    diffs = np.diff(f)
    weights = p[:-1] + p[1:]
    f1 = f[0]
    c = weighted_median(diffs[1:], weights[1:])

    octave = bool(abs(cents(c, 2.0 * f1)) <= t.tight_cents)
    if octave:
        c /= 2.0
        diffs = diffs / 2.0

    dev = np.abs(cents(diffs, c))
    low_dev = abs(float(cents(c, f1)))
    all_tight = bool(np.all(dev <= t.tight_cents))
    overtones_tight = bool(np.all(dev[1:] <= t.tight_cents))
    f_ld, _ = estimate_f0_least_deviating(frame)
    j = scatter_half_width(harmonic_deviations(f, f_ld))

    def result(kind, d=c, s=0.0, variant=None):
        return ToneClassification(kind, float(d), float(s), j, octave, variant)

    if all_tight and low_dev <= t.tight_cents and j <= t.jitter_cents:
        return result("harmonic")
    if overtones_tight and dev[0] > t.outlier_cents:
        expected_second = (3.0 if octave else 2.0) * c
        return result("type1_shifted_residue", s=f[1] - expected_second)
    if all_tight and low_dev > t.tight_cents:
        variant = "stretched" if c > f1 else "compressed"
        try:
            grid = estimate_shift(frame, seed_d=2 * c if octave else c)
            return result("type2_regular", grid.d, grid.s, variant)
        except NoRegularGridError:
            return result("type2_regular", variant=variant)
    if t.jitter_cents < j <= t.noisy_max_cents and abs(cents(f_ld, f1)) <= t.loose_cents:
        return result("type3_noisy_harmonic", d=f_ld)
    return result("unclassified")


def piano_difference_model(n, f0: float, B: float):
    """Gap between partials n and n+1 of a stiff string, ``f_n = n f0 sqrt(1 + B n^2)``."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 1) or f0 <= 0 or B < 0:
        raise ValueError("need n >= 1, f0 > 0, B >= 0")
    m = n + 1.0
    d = f0 * (m * np.sqrt(1.0 + B * m * m) - n * np.sqrt(1.0 + B * n * n))
    return float(d) if d.ndim == 0 else d


def _stiff_partial(n, B):
    return n * np.sqrt(1.0 + B * n * n)


@dataclass
class InharmonicityFit:
    B: float
    f0: float
    residual_rms: float
    indices: np.ndarray = field(repr=False)


def _piano_indices(f):
    n = np.empty(f.size)
    step = f[1] - f[0]
    n[0] = max(1.0, round(f[0] / step))
    for k in range(1, f.size):
        gap = f[k] - f[k - 1]
        jump = max(1.0, round(gap / step))
        n[k] = n[k - 1] + jump
        step = gap / jump
    return n


def fit_inharmonicity_coefficient(frame: PartialFrame, b_max: float = 0.01) -> InharmonicityFit:
    """Least-squares fit of f0 and B to the gaps between consecutive partials.

    For a fixed B the optimal f0 is closed-form, so only B is searched: a
    log-spaced grid followed by bounded scalar refinement.
    """
    if len(frame) < 6:
        raise ValueError("inharmonicity fit needs at least 6 partials")
    f = frame.freqs
    n = _piano_indices(f)
    gaps = np.diff(f)

    def solve(B):
        m = np.diff(_stiff_partial(n, B))
        f0 = float(gaps @ m / (m @ m))
        r = gaps - f0 * m
        return float(r @ r), f0

    grid = np.concatenate([[0.0], np.geomspace(1e-8, b_max, 241)])
    sse = np.array([solve(b)[0] for b in grid])
    k = int(np.argmin(sse))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    res = minimize_scalar(lambda b: solve(b)[0], bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    B = float(res.x) if res.fun <= sse[k] else float(grid[k])
    if B < 1e-9 and sse[0] <= solve(B)[0] * (1 + 1e-12):
        B = 0.0
    err, f0 = solve(B)
    rms = math.sqrt(err / gaps.size)
    if k == grid.size - 1 or not f0 > 0 or rms > 0.05 * f0:
        raise FitError(f"inharmonicity fit diverged: B={B:.3g}, f0={f0:.3f}, residual rms {rms:.3f} Hz")
    return InharmonicityFit(B, f0, rms, n)
