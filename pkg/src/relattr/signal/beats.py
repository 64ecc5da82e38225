"""Beat segmentation and average beats."""

from dataclasses import dataclass

import numpy as np

from .ecg import EcgRecording

PRE_FRACTION = 0.35
POST_FRACTION = 0.55


def beat_window(r_peaks, sample_rate, pre_fraction=PRE_FRACTION,
                post_fraction=POST_FRACTION):
    """``(pre, post)`` sample counts around each R-peak.

    Fractions of the median RR interval; a single peak uses the fractions
    of one second.
    """
    peaks = np.asarray(r_peaks)
    if peaks.size == 0:
        raise ValueError("at least one R-peak is required")
    rr = float(np.median(np.diff(peaks))) if peaks.size > 1 else float(sample_rate)
    return int(round(pre_fraction * rr)), int(round(post_fraction * rr))


def segment_signal(values, r_peaks, window):
    """Cut ``(pre + post + 1)``-sample segments around each peak.

    ``values`` is ``(samples, channels)``; samples outside the signal are
    zero. Returns ``(n_peaks, pre + post + 1, channels)``.
    """
    x = np.asarray(values, dtype=np.float64)
    pre, post = window
    n = x.shape[0]
    padded = np.pad(x, [(pre, post)] + [(0, 0)] * (x.ndim - 1))
    peaks = np.asarray(r_peaks, dtype=int)
    if peaks.size and (peaks.min() < 0 or peaks.max() >= n):
        raise ValueError("R-peak index outside the signal")
    # peak p sits at p + pre in the padded array
    offsets = np.arange(pre + post + 1)
    return padded[peaks[:, None] + offsets[None, :]]


@dataclass
class BeatSet:
    """Beats of one recording cut with one window at the same indices on every lead."""

    r_peaks: np.ndarray
    window: tuple
    segments: np.ndarray  # (n_beats, length, leads)

    @property
    def length(self) -> int:
        return self.window[0] + self.window[1] + 1

    @property
    def n_beats(self) -> int:
        return self.segments.shape[0]

    def lead(self, k) -> np.ndarray:
        return self.segments[:, :, k]

    def average(self) -> np.ndarray:
        return average_beats(self)


def segment_beats(recording, r_peaks, window=None, sample_rate=None) -> BeatSet:
    """Segment every lead of ``recording`` (an EcgRecording or array) around ``r_peaks``."""
    peaks = np.asarray(r_peaks, dtype=int)
    if peaks.size == 0:
        raise ValueError("at least one R-peak is required")
    if np.any(np.diff(peaks) <= 0):
        raise ValueError("R-peaks must be strictly increasing")
    if isinstance(recording, EcgRecording):
        values, fs = recording.samples, recording.sample_rate
    else:
        values, fs = np.asarray(recording, dtype=np.float64), sample_rate
    if window is None:
        if fs is None:
            raise ValueError("sample_rate is required to derive the window")
        window = beat_window(peaks, fs)
    window = (int(window[0]), int(window[1]))
    return BeatSet(r_peaks=peaks, window=window, segments=segment_signal(values, peaks, window))


def average_beats(beats: BeatSet) -> np.ndarray:
    """Per-lead mean segment, shape ``(length, leads)``.

    Averaged as deviations from the first segment, so identical segments
    reproduce that segment exactly.
    """
    return mean_segments(beats.segments)


def mean_segments(segments):
    seg = np.asarray(segments, dtype=np.float64)
    if seg.shape[0] == 0:
        raise ValueError("empty beat set")
    ref = seg[0]
    return ref + (seg - ref).mean(axis=0)
