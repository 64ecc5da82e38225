"""ECG preprocessing, R-peak detection, beat segmentation and synthetic recordings."""

from .beats import (
    POST_FRACTION, PRE_FRACTION, BeatSet, average_beats, beat_window, mean_segments,
    segment_beats, segment_signal,
)
from .ecg import LABELS, LEAD_NAMES, N_LEADS, N_SAMPLES, SAMPLE_RATE, EcgRecording, lead_index
from .peaks import DEFAULT_LEAD, NoPeaksError, detect_r_peaks, qrs_envelope
from .preprocess import fit_length, preprocess, resample, resample_to_length, resampled_length
from .synth import SynthConfig, beat_template, r_times, synth_ecg

__all__ = [
    "DEFAULT_LEAD", "LABELS", "LEAD_NAMES", "N_LEADS", "N_SAMPLES", "POST_FRACTION",
    "PRE_FRACTION", "SAMPLE_RATE", "BeatSet", "EcgRecording", "NoPeaksError", "SynthConfig",
    "average_beats", "beat_template", "beat_window", "detect_r_peaks", "fit_length",
    "lead_index", "mean_segments", "preprocess", "qrs_envelope", "r_times", "resample",
    "resample_to_length", "resampled_length", "segment_beats", "segment_signal", "synth_ecg",
]
