"""Measurement and synthesis of inharmonic complex tones.

Loudness-weighted spectral analysis, regularity-constrained partial tracking,
consecutive-partial difference statistics, a three-type inharmonicity
classifier, stiff-string fitting, and an additive synthesizer for every tone
family the analysis handles.
"""

__version__ = "0.1.0"

from .audio_io import AudioBuffer, FrameSpec, frames, load_wav, save_wav
from .loudness import LoudnessContour, iso226_contour, load_contour_csv, loudness_weight, weight_power_spectrum
from .metrics import (FitError, GridFit, InharmonicityFit, NoRegularGridError, Thresholds,
                      ToneClassification, classify_tone, diff_stats, estimate_f0_least_deviating,
                      estimate_shift, fit_inharmonicity_coefficient, piano_difference_model,
                      weighted_median)
from .partial_filter import FilterSpec, apply_partial_filter
from .partials import Partial, PartialFrame, cents, hz_to_midi, midi_to_hz, note_name
from .pitch import SweepRow, autocorr_pitch, run_sweep_experiment
from .plots import PlotRequest, render_plot
from .report import AnalysisConfig, analyze
from .spectral import Spectrum, TrackingConfig, pick_peaks, stft, track_partials
from .synth import ToneSpec, partial_table, render, sweep_set

__all__ = [
    "AnalysisConfig", "AudioBuffer", "FilterSpec", "FitError", "FrameSpec", "GridFit",
    "InharmonicityFit", "LoudnessContour", "NoRegularGridError", "Partial", "PartialFrame",
    "PlotRequest", "Spectrum", "SweepRow", "Thresholds", "ToneClassification", "ToneSpec",
    "TrackingConfig", "analyze", "apply_partial_filter", "autocorr_pitch", "cents", "classify_tone",
    "diff_stats", "estimate_f0_least_deviating", "estimate_shift", "fit_inharmonicity_coefficient",
    "frames", "hz_to_midi", "iso226_contour", "load_contour_csv", "load_wav", "loudness_weight",
    "midi_to_hz", "note_name", "partial_table", "piano_difference_model", "pick_peaks", "render",
    "render_plot", "run_sweep_experiment", "save_wav", "stft", "sweep_set", "track_partials",
    "weight_power_spectrum", "weighted_median",
]
