import numpy as np
import pytest

from inharmonic.audio_io import AudioBuffer
from inharmonic.partial_filter import FilterSpec, apply_partial_filter, gain_mask_db

SR = 44100
TARGETS = (363.4, 727.5, 1128.4, 1454.7)
OTHERS = (545.0, 920.0, 1800.0, 2400.0)


def tone(freqs=TARGETS + OTHERS, dur=2.0):
    t = np.arange(int(dur * SR)) / SR
    x = sum(0.05 * np.sin(2 * np.pi * f * t + i) for i, f in enumerate(freqs))
    # 100 ms raised-cosine fades, as rendered tones have; abrupt onsets ring at the edges
    ramp = np.hanning(2 * SR // 10)
    x[:SR // 10] *= ramp[:SR // 10]
    x[-SR // 10:] *= ramp[SR // 10:]
    return AudioBuffer(x, SR)


def level_db(x, f):
    """Amplitude at f by projection onto a Hann-windowed complex exponential over the middle second."""
    seg = x[SR // 2:SR // 2 + SR]
    t = np.arange(seg.size) / SR
    w = np.hanning(seg.size)
    return 20 * np.log10(abs(np.sum(w * seg * np.exp(-2j * np.pi * f * t))) * 2 / w.sum())


def rms_err_db(a, b):
    return 20 * np.log10(np.sqrt(np.mean((a - b) ** 2)) / np.sqrt(np.mean(b ** 2)))


def test_unity_reconstruction():
    buf = tone()
    out = apply_partial_filter(buf, FilterSpec(((363.4, 0.0),)))
    assert len(out) == len(buf)
    assert rms_err_db(out.samples, buf.samples) <= -80


def test_four_target_attenuation():
    buf = tone()
    out = apply_partial_filter(buf, FilterSpec(tuple((f, -40.0) for f in TARGETS)))
    for f in TARGETS:
        assert level_db(buf.samples, f) - level_db(out.samples, f) >= 35
    for f in OTHERS:
        assert abs(level_db(buf.samples, f) - level_db(out.samples, f)) <= 1


def test_boost_and_inverse():
    buf = tone()
    up = apply_partial_filter(buf, FilterSpec(((363.4, 12.0),)))
    assert level_db(up.samples, 363.4) - level_db(buf.samples, 363.4) == pytest.approx(12, abs=1)
    back = apply_partial_filter(up, FilterSpec(((363.4, -12.0),)))
    assert rms_err_db(back.samples, buf.samples) <= -40


def test_mask_shape():
    spec = FilterSpec(((400.0, -20.0), (410.0, 10.0)), bandwidth_cents=50)
    f = np.array([400.0, 400 * 2 ** (25 / 1200), 1000.0])
    m = gain_mask_db(f, spec)
    assert m[0] == pytest.approx(-20)
    assert m[2] == pytest.approx(0)
    one = gain_mask_db(f[:2], FilterSpec(((400.0, -20.0),), 50))
    assert one[1] == pytest.approx(-10)   # half the dB gain at half the bandwidth


def test_errors():
    with pytest.raises(ValueError):
        FilterSpec(((100.0, -10.0),), bandwidth_cents=4)
    with pytest.raises(ValueError):
        FilterSpec(((-1.0, -10.0),))
    with pytest.raises(ValueError):
        FilterSpec(())
    with pytest.raises(ValueError, match="bad target"):
        FilterSpec.parse(["363.4"])
    assert FilterSpec.parse(["363.4:-40", "727.5:6"]).targets == ((363.4, -40.0), (727.5, 6.0))
    with pytest.raises(ValueError, match="Nyquist"):
        apply_partial_filter(tone(dur=0.5), FilterSpec(((30000.0, -10.0),)))
