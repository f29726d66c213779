import json

import numpy as np
import pytest

from inharmonic.audio_io import FrameSpec
from inharmonic.spectral import pick_peaks, stft
from inharmonic.synth import SWEEP_TOP, ToneSpec, partial_table, render, sweep_set


def freqs(spec):
    return [f for f, _ in partial_table(spec)]


def test_layout_examples():
    assert freqs(ToneSpec(f0=110, n_partials=4)) == [110, 220, 330, 440]
    assert freqs(ToneSpec(model="shifted_residue", f0=100, shift_hz=10, n_partials=4)) == [100, 210, 310, 410]
    got = freqs(ToneSpec(model="sweep_member", f0=220, overtone_base_hz=246.94, n_partials=5))
    assert got == pytest.approx([220, 493.88, 740.82, 987.76, 1234.70])
    assert freqs(ToneSpec(model="regular_grid", spacing_hz=110, offset_hz=10, n_partials=3)) == [120, 230, 340]
    got = freqs(ToneSpec(model="piano", f0=55, inharmonicity=0.00022, n_partials=3))
    assert got == pytest.approx([55 * n * np.sqrt(1 + 0.00022 * n * n) for n in (1, 2, 3)])
    assert freqs(ToneSpec(f0=100, n_partials=4, odd_only=True)) == [100, 300, 500, 700]


def test_noisy_harmonic_jitter_bounded_and_seeded():
    spec = ToneSpec(model="noisy_harmonic", f0=100, n_partials=30, jitter_cents=25, seed=4)
    f = np.array(freqs(spec))
    dev = 1200 * np.log2(f / (100 * np.arange(1, 31)))
    assert np.all(np.abs(dev) <= 25) and np.std(dev) > 5
    assert freqs(spec) == freqs(ToneSpec(model="noisy_harmonic", f0=100, n_partials=30, jitter_cents=25, seed=4))
    assert freqs(spec) != freqs(ToneSpec(model="noisy_harmonic", f0=100, n_partials=30, jitter_cents=25, seed=5))


def test_amplitude_profiles():
    n = np.arange(1, 5)
    assert [a for _, a in partial_table(ToneSpec(n_partials=4, amplitudes="reciprocal"))] == pytest.approx(1 / n)
    power = ToneSpec(n_partials=4, amplitudes="power", amplitude_exponent=1.5)
    assert [a for _, a in partial_table(power)] == pytest.approx(n ** -1.5)
    custom = ToneSpec(n_partials=2, amplitudes=[0.5, 0.25])
    assert [a for _, a in partial_table(custom)] == [0.5, 0.25]
    with pytest.raises(ValueError):
        ToneSpec(n_partials=3, amplitudes=[1.0])


def test_nyquist_error_lists_indices():
    with pytest.raises(ValueError, match=r"\[3, 4\]"):
        partial_table(ToneSpec(f0=8000, n_partials=4), sample_rate=44100)


def test_invalid_specs():
    for kw in ({"model": "fm"}, {"n_partials": 0}, {"level": 1.5}, {"duration_s": 0},
               {"model": "piano", "inharmonicity": -1.0}, {"amplitudes": "pink"}):
        with pytest.raises(ValueError):
            ToneSpec(**kw)


def test_single_partial_is_pure_sine_at_level():
    buf = render(ToneSpec(f0=220, n_partials=1, level=0.7))
    assert np.max(np.abs(buf.samples)) == pytest.approx(0.7, abs=1e-3)
    peaks = pick_peaks(stft(buf, FrameSpec(4096, 1024, "hann"))[5])
    assert len(peaks) == 1 and abs(1200 * np.log2(peaks[0].freq / 220)) < 2


def test_fades_and_determinism():
    spec = ToneSpec(duration_s=0.2, seed=9, snr_db=30)
    a, b = render(spec), render(spec)
    assert np.array_equal(a.samples, b.samples)
    assert a.samples[0] == 0.0 and abs(a.samples[-1]) < 1e-3
    assert not np.array_equal(a.samples, render(ToneSpec(duration_s=0.2, seed=10, snr_db=30)).samples)


def test_odd_only_leaves_even_bins_empty():
    buf = render(ToneSpec(f0=100, n_partials=6, odd_only=True))
    spec = stft(buf)[10]
    db = 10 * np.log10(spec.power + 1e-30)
    bin_of = lambda f: int(round(f / (spec.freqs[1] - spec.freqs[0])))
    top = db.max()
    for f in (200, 400):
        assert db[bin_of(f)] <= top - 60


def test_sweep_set():
    ends = sweep_set(2)
    assert [g for g, _ in ends] == pytest.approx([220, SWEEP_TOP])
    members = sweep_set()
    assert len(members) == 21
    assert freqs(members[0][1]) == pytest.approx(220 * np.arange(1, 22))
    assert all(freqs(s)[0] == 220 for _, s in members)
    with pytest.raises(ValueError):
        sweep_set(1)


def test_json_round_trip(tmp_path):
    spec = ToneSpec(model="regular_grid", spacing_hz=55, offset_hz=7, amplitudes=[1.0] * 20, seed=3)
    p = tmp_path / "s.json"
    p.write_text(spec.to_json())
    assert ToneSpec.load(p) == spec
    with pytest.raises(ValueError, match="unknown"):
        ToneSpec.from_dict({**json.loads(spec.to_json()), "colour": 1})
