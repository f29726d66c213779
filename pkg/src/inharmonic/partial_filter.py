"""STFT-domain attenuation or amplification of selected partials."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .audio_io import AudioBuffer, FrameSpec

FILTER_FRAME = FrameSpec(window_size=16384, hop_size=4096, window_kind="hann")


@dataclass(frozen=True)
class FilterSpec:
    """Gain targets ``(centre_hz, gain_db)`` with a shared bell width in cents.

    `bandwidth_cents` is the full width of each bell at half its peak gain
    (in dB). Where bells overlap, the one asking for the larger change wins.
    """

    targets: tuple[tuple[float, float], ...]
    bandwidth_cents: float = 50.0

    def __post_init__(self):
        targets = tuple((float(f), float(g)) for f, g in self.targets)
        if not targets:
            raise ValueError("filter needs at least one target")
        if any(not f > 0 for f, _ in targets):
            raise ValueError("target centres must be positive")
        if not 5.0 <= self.bandwidth_cents <= 200.0:
            raise ValueError(f"bandwidth_cents must lie in [5, 200], got {self.bandwidth_cents}")
        object.__setattr__(self, "targets", targets)

    @classmethod
    def parse(cls, targets: list[str], bandwidth_cents: float = 50.0) -> "FilterSpec":
        """Build from ``"hz:db"`` strings."""
        pairs = []
        for t in targets:
            try:
                hz, db = t.split(":")
                pairs.append((float(hz), float(db)))
            except ValueError:
                raise ValueError(f"bad target {t!r}; expected <hz>:<db>") from None
        return cls(tuple(pairs), bandwidth_cents)


def gain_mask_db(freqs: np.ndarray, spec: FilterSpec) -> np.ndarray:
    """Per-bin gain in dB: Gaussian bells in cents around each target, 0 dB elsewhere."""
    freqs = np.asarray(freqs, dtype=float)
    sigma = spec.bandwidth_cents / (2.0 * np.sqrt(2.0 * np.log(2.0)))
    safe = np.maximum(freqs, 1e-3)
    mask = np.zeros_like(freqs)
    for f0, g in spec.targets:
        bell = g * np.exp(-0.5 * (1200.0 * np.log2(safe / f0) / sigma) ** 2)
        mask = np.where(np.abs(bell) > np.abs(mask), bell, mask)
    return mask


def apply_partial_filter(buffer: AudioBuffer, spec: FilterSpec,
                         frame: FrameSpec = FILTER_FRAME) -> AudioBuffer:
    """Scale STFT bins by the gain mask and resynthesise by overlap-add.

    A Hann window at a quarter-window hop sums to a constant, so a 0 dB mask
    returns the input. Only `frame.window_size` is used; window and hop are
    fixed for perfect reconstruction.
    """
    sr = buffer.sample_rate
    nyq = sr / 2.0
    bad = [f for f, _ in spec.targets if f >= nyq]
    if bad:
        raise ValueError(f"targets {bad} Hz are at or above Nyquist ({nyq:g} Hz)")
    n = frame.window_size
    x = buffer.samples
    freqs, _, z = signal.stft(x, sr, window="hann", nperseg=n, noverlap=n - n // 4,
                              boundary="zeros", padded=True)
    gain = 10.0 ** (gain_mask_db(freqs, spec) / 20.0)
    _, y = signal.istft(z * gain[:, None], sr, window="hann", nperseg=n, noverlap=n - n // 4,
                        boundary=True)
    return AudioBuffer(y[:x.size], sr)
