import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from inharmonic.metrics import (KINDS, FitError, NoRegularGridError, Thresholds, classify_tone,
                                diff_stats, estimate_f0_least_deviating, estimate_shift,
                                fit_inharmonicity_coefficient, piano_difference_model,
                                scatter_half_width, weighted_median)
from inharmonic.partials import PartialFrame, cents, hz_to_midi
from tests.oracles import (grid_fit_brute, least_deviating_f0_window, stiff_string_partials,
                           weighted_median_by_expansion)


def frame(freqs, powers=None):
    return PartialFrame.from_freqs(freqs, powers)


def circular_gap(s, s_true, d):
    x = (s - s_true) % d
    return min(x, d - x)


# weighted median

@given(st.lists(st.tuples(st.integers(0, 50), st.integers(1, 6)), min_size=1, max_size=25))
def test_weighted_median_matches_expansion(pairs):
    values = [float(v) for v, _ in pairs]
    weights = [w for _, w in pairs]
    assert weighted_median(values, weights) == weighted_median_by_expansion(values, weights)


@given(st.lists(st.floats(1, 1e4), min_size=2, max_size=20),
       st.lists(st.floats(0.01, 100), min_size=20, max_size=20),
       st.floats(1e-6, 1e6))
def test_weighted_median_amplitude_scaling_invariance(f, p, k):
    f = sorted(set(f))
    assume(len(f) >= 2)
    p = p[:len(f)]
    a = diff_stats(frame(f, p)).weighted_median
    b = diff_stats(frame(f, [k * x for x in p])).weighted_median
    assert a == b


def test_weighted_median_edge_cases():
    assert weighted_median([3.0, 1.0, 2.0]) == 2.0
    assert weighted_median([1.0, 2.0]) == 1.0  # lower median
    assert weighted_median([1.0, 2.0], [0.0, 0.0]) == 1.0
    with pytest.raises(ValueError):
        weighted_median([])
    with pytest.raises(ValueError):
        weighted_median([1.0], [-1.0])


# diff statistics

def test_diff_stats_worked_layouts():
    h = diff_stats(frame([100, 200, 300, 400]))
    assert h.weighted_median == 100 and not h.first_diff_outlier
    t1 = diff_stats(frame([100, 210, 310, 410]))
    assert list(t1.diffs) == [110, 100, 100]
    assert t1.weighted_median == 100 and t1.first_diff_outlier
    t2 = diff_stats(frame([100, 210, 320, 430]))
    assert list(t2.diffs) == [110, 110, 110]
    assert t2.weighted_median == 110 and not t2.first_diff_outlier


@given(st.floats(20, 1000), st.integers(2, 27), st.data())
def test_harmonic_median_is_f0_exactly(f0, n, data):
    powers = data.draw(st.lists(st.floats(1e-6, 1.0), min_size=n, max_size=n))
    f = f0 * np.arange(1, n + 1)
    ds = diff_stats(frame(f, powers))
    assert ds.weighted_median == pytest.approx(f0, rel=1e-12)
    assert ds.diffs.size == n - 1
    assert ds.diffs.min() <= ds.weighted_median <= ds.diffs.max()


def test_diff_stats_needs_two_partials():
    with pytest.raises(ValueError):
        diff_stats(frame([100]))


# least-deviating f0

def test_least_deviating_examples():
    f0, dev = estimate_f0_least_deviating(frame([110, 220, 330]))
    assert f0 == pytest.approx(110, abs=0.1) and dev < 1e-6
    f0, _ = estimate_f0_least_deviating(frame([200, 300, 400]))
    assert f0 == pytest.approx(100, abs=0.5)


def test_least_deviating_piano_against_brute_force():
    n = np.arange(1, 25)
    f = stiff_string_partials(55.0, 0.00022, 24)
    powers = 1.0 / n ** 2
    f0, dev = estimate_f0_least_deviating(frame(f, powers))
    ref_f0, ref_dev = least_deviating_f0_window(f, powers, f[0])
    assert dev <= ref_dev + 1e-3
    assert abs(cents(f0, ref_f0)) < 0.5
    assert abs(cents(f0, 55.0)) <= 10.0


def test_least_deviating_equal_power_piano_is_biased_sharp():
    # with flat powers the stretched upper partials dominate the RMS; documented behaviour
    f = stiff_string_partials(55.0, 0.00022, 24)
    f0, dev = estimate_f0_least_deviating(frame(f))
    ref_f0, ref_dev = least_deviating_f0_window(f, np.ones(24), f[0])
    assert dev <= ref_dev + 1e-3
    assert 10 < cents(f0, 55.0) < 25


@given(st.floats(40, 400), st.integers(3, 20))
def test_least_deviating_recovers_harmonic_f0(f0, n):
    got, dev = estimate_f0_least_deviating(frame(f0 * np.arange(1, n + 1)))
    assert got == pytest.approx(f0, rel=1e-6)
    assert dev < 0.01


def test_least_deviating_prefers_missing_fundamental_over_subharmonics():
    got, _ = estimate_f0_least_deviating(frame([300, 450, 600, 750]))
    assert got == pytest.approx(150, rel=1e-6)


# regular grid

def test_estimate_shift_examples():
    g = estimate_shift(frame([110, 220, 330]))
    assert g.d == pytest.approx(110) and g.s == pytest.approx(0, abs=1e-6)
    g = estimate_shift(frame([120, 230, 340]))
    assert g.d == pytest.approx(110, abs=0.5) and g.s == pytest.approx(10, abs=0.5)


def test_shift_wrap_rule():
    # shifting a (d=110, s=5) layout by +115 gives s = (5 + 115) mod 110 = 10
    g = estimate_shift(frame(np.array([115, 225, 335]) + 115))
    assert g.d == pytest.approx(110, abs=0.5) and g.s == pytest.approx(10, abs=0.5)
    # a (d=110, s=10) layout shifted by +115 wraps to 15
    g = estimate_shift(frame(np.array([120, 230, 340]) + 115))
    assert g.s == pytest.approx(15, abs=0.5)


def test_estimate_shift_against_brute_force():
    f = [120.0, 230.0, 340.0, 450.0]
    d_ref, s_ref = grid_fit_brute(f, np.arange(100, 120.01, 0.05), np.arange(0, 30.01, 0.05))
    g = estimate_shift(frame(f))
    assert g.d == pytest.approx(d_ref, abs=0.05) and g.s == pytest.approx(s_ref, abs=0.05)


@given(st.floats(30, 300), st.floats(0, 1), st.integers(3, 25))
def test_estimate_shift_reconstructs_grid(d, s_frac, n):
    s = s_frac * d * 0.999
    f = np.arange(1, n + 1) * d + s
    g = estimate_shift(frame(f))
    assert 0 <= g.s < g.d
    assert g.d == pytest.approx(d, rel=1e-6)
    assert circular_gap(g.s, s, d) < 1e-6 * d
    assert np.max(np.abs(cents(f, g.predict()))) <= g.rms_cents + 1e-6


def test_estimate_shift_errors():
    with pytest.raises(ValueError):
        estimate_shift(frame([100, 200]))
    with pytest.raises(NoRegularGridError):
        estimate_shift(frame([100, 137, 290, 311, 500]), max_rms_cents=5)


# classifier

def test_classify_worked_layouts():
    assert classify_tone(frame([100, 200, 300, 400])).kind == "harmonic"
    t1 = classify_tone(frame([100, 210, 310, 410]))
    assert t1.kind == "type1_shifted_residue" and t1.shift_s == pytest.approx(10)
    t2 = classify_tone(frame([100, 210, 320, 430]))
    assert t2.kind == "type2_regular" and t2.variant == "stretched"
    assert t2.spacing_d == pytest.approx(110)
    t3 = classify_tone(frame([100, 201.5, 299, 402, 498]))
    assert t3.kind == "type3_noisy_harmonic"


def test_type3_rule_by_direct_evaluation():
    f = np.array([100, 201.5, 299, 402, 498])
    t = Thresholds()
    f0, _ = estimate_f0_least_deviating(frame(f))
    dev = 1200 * np.log2(f / (np.round(f / f0) * f0))
    j = (dev.max() - dev.min()) / 2 * 6 / 4
    assert t.jitter_cents < j <= t.noisy_max_cents
    assert abs(cents(f0, 100)) <= t.loose_cents
    assert classify_tone(frame(f)).jitter_cents == pytest.approx(j, rel=1e-6)


def test_type1_negative_shift_keeps_sign():
    c = classify_tone(frame([100, 192, 292, 392, 492]))
    assert c.kind == "type1_shifted_residue" and c.shift_s == pytest.approx(-8)


def test_compressed_and_odd_harmonics():
    c = classify_tone(frame(np.arange(1, 8) * 95.0 + 5.0))
    assert c.kind == "type2_regular" and c.variant == "compressed"
    odd = classify_tone(frame([100, 300, 500, 700, 900]))
    assert odd.kind == "harmonic" and odd.octave_adjusted and odd.spacing_d == pytest.approx(100)


@given(st.floats(50, 300), st.integers(4, 20), st.integers(-24, 24))
def test_transposition_keeps_harmonic(f0, n, k):
    f = f0 * np.arange(1, n + 1) * 2 ** (k / 12)
    c = classify_tone(frame(f))
    assert c.kind == "harmonic"
    assert c.spacing_d == pytest.approx(f0 * 2 ** (k / 12), rel=1e-9)


@given(st.floats(80, 300), st.integers(4, 20), st.floats(0.05, 0.45))
def test_constant_shift_of_all_partials_gives_type2(f0, n, frac):
    delta = frac * f0  # large enough to move the lowest partial off the spacing
    assume(abs(cents(f0 + delta, f0)) > 25)
    f = f0 * np.arange(1, n + 1) + delta
    assert classify_tone(frame(f)).kind == "type2_regular"


@given(st.lists(st.floats(20, 5000), min_size=4, max_size=27, unique=True),
       st.lists(st.floats(0.0, 1.0), min_size=27, max_size=27))
def test_classifier_is_total_and_deterministic(f, p):
    f = sorted(f)
    assume(np.min(np.diff(f)) > 0.5)
    fr = frame(f, p[:len(f)])
    a, b = classify_tone(fr), classify_tone(fr)
    assert a == b and a.kind in KINDS


def test_classifier_needs_four_partials():
    with pytest.raises(ValueError):
        classify_tone(frame([100, 200, 300]))


def test_scatter_half_width_is_shift_invariant():
    d = np.array([-3.0, 1.0, 5.0, 2.0])
    assert scatter_half_width(d) == scatter_half_width(d + 40.0) == pytest.approx(4 * 5 / 3)


def test_thresholds_file(tmp_path):
    p = tmp_path / "t.cfg"
    p.write_text("# classifier\ntight_cents = 15\nloose_cents=30  # wider\n")
    t = Thresholds.from_file(p)
    assert t.tight_cents == 15 and t.loose_cents == 30 and t.jitter_cents == 8
    p.write_text("tigth_cents = 15\n")
    with pytest.raises(ValueError):
        Thresholds.from_file(p)


# stiff string

def test_piano_difference_model():
    assert piano_difference_model(np.arange(1, 10), 100.0, 0.0) == pytest.approx(100.0)
    d1 = piano_difference_model(1, 55.0, 0.00022)
    assert d1 == pytest.approx(55 * (2 * np.sqrt(1 + 0.00022 * 4) - np.sqrt(1.00022)))
    d = piano_difference_model(np.arange(1, 24), 55.0, 0.00022)
    assert np.all(np.diff(d) > 0) and d[22] > d[0]
    f = stiff_string_partials(55.0, 0.00022, 24)
    assert np.allclose(np.diff(f), d)
    with pytest.raises(ValueError):
        piano_difference_model(0, 55.0, 0.0)


@pytest.mark.parametrize("f0,B", [(55.0, 0.00022), (110.0, 0.001), (110.0, 0.0), (80.0, 5e-5)])
def test_fit_recovers_model(f0, B):
    fit = fit_inharmonicity_coefficient(frame(stiff_string_partials(f0, B, 24)))
    assert fit.B == pytest.approx(B, rel=0.05, abs=1e-6)
    assert fit.f0 == pytest.approx(f0, abs=0.01)
    assert fit.residual_rms >= 0


def test_fit_skips_missing_partials():
    f = np.delete(stiff_string_partials(55.0, 0.00022, 24), [5, 11])
    fit = fit_inharmonicity_coefficient(frame(f))
    assert fit.B == pytest.approx(0.00022, rel=0.05)


def test_fit_errors():
    with pytest.raises(ValueError):
        fit_inharmonicity_coefficient(frame([100, 200, 300]))
    rng = np.random.default_rng(3)
    with pytest.raises(FitError):
        fit_inharmonicity_coefficient(frame(np.sort(rng.uniform(100, 5000, 12))))
