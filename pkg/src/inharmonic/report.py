"""Frame-by-frame analysis of a recording into a JSON-ready report."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from .audio_io import AudioBuffer, FrameSpec
from .loudness import LoudnessContour, iso226_contour
from .metrics import (KINDS, Thresholds, classify_tone, diff_stats,
                      estimate_f0_least_deviating)
from .partials import PartialFrame, hz_to_midi, note_name
from .spectral import TrackingConfig, stft, track_partials

SCHEMA_VERSION = 1
MIN_CLASSIFY_PARTIALS = 4


@dataclass
class AnalysisConfig:
    frame: FrameSpec = field(default_factory=FrameSpec)
    weighting: bool = True
    contour: LoudnessContour | None = None
    contour_source: str = "iso226:2003-parameters"
    thresholds: Thresholds = field(default_factory=Thresholds)
    tracking: TrackingConfig = field(default_factory=TrackingConfig)
    peak_bandwidth_cents: float = 5.0

    def resolved_contour(self) -> LoudnessContour | None:
        if not self.weighting:
            return None
        return self.contour or iso226_contour(50.0)

    def metadata(self) -> dict:
        c = self.resolved_contour()
        track = asdict(self.tracking)
        track["anchor_range"] = list(track["anchor_range"])
        return {
            "schema_version": SCHEMA_VERSION,
            "frame": asdict(self.frame),
            "weighting": {
                "enabled": self.weighting,
                "contour_source": self.contour_source if self.weighting else None,
                "phon": c.phon if c else None,
            },
            "thresholds": self.thresholds.as_dict(),
            "tracking": track,
            "min_classify_partials": MIN_CLASSIFY_PARTIALS,
            "peak_bandwidth_cents": self.peak_bandwidth_cents,
        }


def frame_record(frame: PartialFrame, thresholds: Thresholds) -> dict:
    ds = diff_stats(frame, thresholds.outlier_cents)
    f0, _ = estimate_f0_least_deviating(frame)
    cl = classify_tone(frame, thresholds)
    return {
        "time_s": frame.time,
        "partials": [{"freq_hz": p.freq, "midi": p.midi, "cents_dev": p.cents_dev, "power": p.power}
                     for p in frame.partials],
        "diff_median_hz": ds.weighted_median,
        "diff_median_midi": hz_to_midi(ds.weighted_median),
        "diff_mad_cents": ds.mad_cents,
        "f0_least_dev_hz": f0,
        "classification": {
            "kind": cl.kind,
            "variant": cl.variant,
            "d_hz": cl.spacing_d,
            "s_hz": cl.shift_s,
            "jitter_cents": cl.jitter_cents,
            "octave_adjusted": cl.octave_adjusted,
        },
    }


def distribution_peak(midi_values, bandwidth_cents: float = 5.0) -> float:
    """Mode of a Gaussian kernel density over MIDI values, on a 1-cent grid."""
    m = np.asarray(midi_values, dtype=float)
    h = bandwidth_cents / 100.0
    grid = np.arange(np.floor(m.min() * 100) - 50, np.ceil(m.max() * 100) + 51) / 100.0
    dens = np.exp(-0.5 * ((grid[:, None] - m[None, :]) / h) ** 2).sum(axis=1)
    return float(grid[int(np.argmax(dens))])


def summarize(records: list[dict], peak_bandwidth_cents: float = 5.0) -> dict:
    """Summary derived only from the per-frame records."""
    if not records:
        return {"no_tonal_content": True, "frames": 0, "modal_classification": None,
                "classification_counts": {}, "median_of_medians_hz": None,
                "distribution_peak": None}
    counts = Counter(r["classification"]["kind"] for r in records)
    # ties go to the earlier kind in the typology order
    modal = max(KINDS, key=lambda k: (counts.get(k, 0), -KINDS.index(k)))
    mids = [r["diff_median_midi"] for r in records]
    peak = distribution_peak(mids, peak_bandwidth_cents)
    nearest = int(round(peak))
    return {
        "no_tonal_content": False,
        "frames": len(records),
        "modal_classification": modal,
        "classification_counts": {k: counts[k] for k in KINDS if counts.get(k)},
        "median_of_medians_hz": float(np.median([r["diff_median_hz"] for r in records])),
        "distribution_peak": {
            "midi": peak,
            "note": note_name(peak),
            "nearest_midi": nearest,
            "cents": round((peak - nearest) * 100.0, 6),
        },
    }


def analyze(buffer: AudioBuffer, config: AnalysisConfig = AnalysisConfig()) -> tuple[dict, list[PartialFrame]]:
    """Track partials and build the report.

    A frame is recorded when tracking found a reliable set of at least four
    partials; silent or noisy frames are skipped. Returns the report and the
    tracked frames (all of them, for plotting).
    """
    spectra = stft(buffer, config.frame, config.resolved_contour())
    tracked = track_partials(spectra, config.tracking)
    records = [frame_record(f, config.thresholds) for f in tracked
               if f.reliable and len(f) >= MIN_CLASSIFY_PARTIALS]
    report = {
        "metadata": {
            **config.metadata(),
            "sample_rate": buffer.sample_rate,
            "duration_s": buffer.duration,
            "frame_count": len(tracked),
        },
        "records": records,
        "summary": summarize(records, config.peak_bandwidth_cents),
    }
    return report, tracked


def report_schema() -> dict:
    return json.loads(resources.files("inharmonic").joinpath("data/report.schema.json").read_text())


def validate_report(report: dict) -> None:
    """Raise ``jsonschema.ValidationError`` when the report does not match the shipped schema."""
    import jsonschema

    jsonschema.validate(report, report_schema())


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"
