"""Additive synthesis of harmonic and inharmonic test tones."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .audio_io import AudioBuffer

MODELS = ("harmonic", "shifted_residue", "regular_grid", "noisy_harmonic", "piano", "sweep_member")
PROFILES = ("equal", "reciprocal", "power")

SWEEP_F0 = 220.0
SWEEP_TOP = 246.94


@dataclass(frozen=True)
class ToneSpec:
    """Generative description of a tone.

    `f0` is the lowest-partial frequency for every model except
    ``regular_grid``, whose partials sit at ``n * spacing_hz + offset_hz``.
    `amplitudes` is a profile name or an explicit per-partial list.
    """

    model: str = "harmonic"
    f0: float = 110.0
    n_partials: int = 20
    amplitudes: str | tuple = "equal"
    amplitude_exponent: float = 1.0
    odd_only: bool = False
    shift_hz: float = 0.0
    spacing_hz: float = 110.0
    offset_hz: float = 0.0
    jitter_cents: float = 0.0
    inharmonicity: float = 0.0
    overtone_base_hz: float = SWEEP_F0
    duration_s: float = 1.0
    level: float = 0.5
    seed: int = 0
    snr_db: float | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown tone model {self.model!r}; expected one of {MODELS}")
        if self.n_partials < 1:
            raise ValueError("n_partials must be >= 1")
        if not 0 < self.level <= 1:
            raise ValueError("level must lie in (0, 1]")
        if self.duration_s <= 0:
            raise ValueError("duration must be positive")
        if isinstance(self.amplitudes, list):
            object.__setattr__(self, "amplitudes", tuple(self.amplitudes))
        if isinstance(self.amplitudes, tuple):
            if len(self.amplitudes) != self.n_partials:
                raise ValueError("custom amplitude list length must equal n_partials")
        elif self.amplitudes not in PROFILES:
            raise ValueError(f"unknown amplitude profile {self.amplitudes!r}")
        if self.model == "piano" and self.inharmonicity < 0:
            raise ValueError("inharmonicity coefficient must be >= 0")

    def to_json(self) -> str:
        d = asdict(self)
        if isinstance(d["amplitudes"], tuple):
            d["amplitudes"] = list(d["amplitudes"])
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ToneSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown ToneSpec fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ToneSpec":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ToneSpec":
        return cls.from_json(Path(path).read_text())


def harmonic_numbers(spec: ToneSpec) -> np.ndarray:
    if spec.odd_only:
        return 2 * np.arange(spec.n_partials) + 1.0
    return np.arange(1, spec.n_partials + 1, dtype=float)


def _amplitudes(spec: ToneSpec, n: np.ndarray) -> np.ndarray:
    if isinstance(spec.amplitudes, tuple):
        return np.asarray(spec.amplitudes, dtype=float)
    if spec.amplitudes == "equal":
        return np.ones_like(n)
    if spec.amplitudes == "reciprocal":
        return 1.0 / n
    return n ** -spec.amplitude_exponent


def partial_table(spec: ToneSpec, sample_rate: float = 44100) -> list[tuple[float, float]]:
    """Ground-truth ``(frequency, amplitude)`` pairs, ascending in frequency."""
    n = harmonic_numbers(spec)
    f0 = spec.f0
    m = spec.model
    if m == "harmonic":
        f = n * f0
    elif m == "shifted_residue":
        f = np.where(n >= 2, n * f0 + spec.shift_hz, n * f0)
    elif m == "regular_grid":
        f = n * spec.spacing_hz + spec.offset_hz
    elif m == "noisy_harmonic":
        rng = np.random.default_rng([spec.seed, 0])
        eps = rng.uniform(-spec.jitter_cents, spec.jitter_cents, n.size)
        f = n * f0 * 2.0 ** (eps / 1200.0)
    elif m == "piano":
        f = n * f0 * np.sqrt(1.0 + spec.inharmonicity * n * n)
    else:  # sweep_member
        f = np.where(n >= 2, n * spec.overtone_base_hz, f0)

    nyquist = sample_rate / 2.0
    bad = [int(i) + 1 for i in np.flatnonzero((f >= nyquist) | (f <= 0))]
    if bad:
        raise ValueError(f"partials {bad} fall outside (0, {nyquist:g}) Hz")
    a = _amplitudes(spec, n)
    order = np.argsort(f, kind="stable")
    return [(float(f[i]), float(a[i])) for i in order]


def _fade(n_samples: int, n_fade: int) -> np.ndarray:
    env = np.ones(n_samples)
    n_fade = min(n_fade, n_samples // 2)
    if n_fade > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(n_fade) / n_fade)
        env[:n_fade] = ramp
        env[n_samples - n_fade:] = ramp[::-1]
    return env


def render(spec: ToneSpec, sample_rate: int = 44100) -> AudioBuffer:
    """Sum of sinusoids with seeded random phases, 10 ms fades, peak-normalised to `level`."""
    table = partial_table(spec, sample_rate)
    n_samples = int(round(spec.duration_s * sample_rate))
    t = np.arange(n_samples) / sample_rate
    phases = np.random.default_rng([spec.seed, 1]).uniform(0, 2 * np.pi, len(table))
    x = np.zeros(n_samples)
    for (f, a), ph in zip(table, phases):
        x += a * np.sin(2 * np.pi * f * t + ph)
    if spec.snr_db is not None:
        noise = np.random.default_rng([spec.seed, 2]).standard_normal(n_samples)
        gain = np.sqrt(np.mean(x * x) / 10 ** (spec.snr_db / 10.0))
        x += gain * noise
    x *= _fade(n_samples, int(round(0.010 * sample_rate)))
    peak = np.max(np.abs(x))
    if peak > 0:
        x *= spec.level / peak
    return AudioBuffer(x, sample_rate)


def sweep_set(n_steps: int = 21, n_partials: int = 21, **overrides) -> list[tuple[float, ToneSpec]]:
    """Tones with a fixed 220 Hz fundamental and overtones at ``n * g``.

    `g` runs linearly from 220 Hz (a harmonic tone) to 246.94 Hz.
    Extra keyword arguments override the ToneSpec defaults of each member.
    """
    if n_steps < 2:
        raise ValueError("sweep needs at least 2 steps")
    base = dict(model="sweep_member", f0=SWEEP_F0, n_partials=n_partials,
                amplitudes="power", amplitude_exponent=1.5)
    base.update(overrides)
    spec = ToneSpec(**base)
    gs = np.linspace(SWEEP_F0, SWEEP_TOP, n_steps)
    return [(float(g), replace(spec, overtone_base_hz=float(g))) for g in gs]
