"""Partials, partial frames and pitch-unit conversions (12-TET, A4 = 440 Hz)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

NOTE_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")


def hz_to_midi(f):
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be positive")
    m = 69.0 + 12.0 * np.log2(f / 440.0)
    return float(m) if m.ndim == 0 else m


def midi_to_hz(m):
    f = 440.0 * 2.0 ** ((np.asarray(m, dtype=float) - 69.0) / 12.0)
    return float(f) if f.ndim == 0 else f


def cents(f, ref):
    """Interval from `ref` to `f` in cents."""
    return 1200.0 * np.log2(np.asarray(f, dtype=float) / np.asarray(ref, dtype=float))


def note_name(midi: float) -> str:
    """Nearest note with its cent deviation, e.g. ``'A1+5'``."""
    k = int(round(midi))
    dev = int(round((midi - k) * 100))
    name = f"{NOTE_NAMES[k % 12]}{k // 12 - 1}"
    return name if dev == 0 else f"{name}{dev:+d}"


@dataclass(frozen=True)
class Partial:
    freq: float
    power: float = 1.0

    def __post_init__(self):
        if not self.freq > 0:
            raise ValueError(f"partial frequency must be positive, got {self.freq}")
        if self.power < 0:
            raise ValueError("partial power must be nonnegative")

    @property
    def midi(self) -> float:
        return 69.0 + 12.0 * math.log2(self.freq / 440.0)

    @property
    def cents_dev(self) -> float:
        m = self.midi
        return (m - round(m)) * 100.0


@dataclass
class PartialFrame:
    time: float
    partials: list[Partial]
    max_partials: int = 27
    reliable: bool = True
    grid: tuple[float, float] | None = field(default=None, compare=False)

    def __post_init__(self):
        self.partials = sorted(self.partials, key=lambda p: p.freq)
        f = [p.freq for p in self.partials]
        if any(b <= a for a, b in zip(f, f[1:])):
            raise ValueError("partial frequencies must be strictly increasing")

    @classmethod
    def from_freqs(cls, freqs: Sequence[float], powers: Sequence[float] | None = None,
                   time: float = 0.0, **kw) -> "PartialFrame":
        if powers is None:
            powers = [1.0] * len(freqs)
        return cls(time, [Partial(float(f), float(p)) for f, p in zip(freqs, powers)], **kw)

    def __len__(self) -> int:
        return len(self.partials)

    @property
    def freqs(self) -> np.ndarray:
        return np.array([p.freq for p in self.partials], dtype=float)

    @property
    def powers(self) -> np.ndarray:
        return np.array([p.power for p in self.partials], dtype=float)
