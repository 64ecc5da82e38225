"""Average beats and average relevance traces aggregated across recordings."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..signal import (
    DEFAULT_LEAD, NoPeaksError, detect_r_peaks, lead_index, mean_segments, resample_to_length,
    segment_beats, segment_signal,
)


@dataclass
class RecordingBeat:
    """One recording's average beat and average relevance on one lead."""

    recording_id: str
    r_peaks: np.ndarray
    window: tuple
    beat: np.ndarray
    relevance: np.ndarray


@dataclass
class AverageRelevanceBeat:
    """Cross-recording mean beat and relevance for one lead.

    ``relevance_variance`` is the population variance across recordings at
    each offset. The ``*_normalized`` traces are divided by their own
    maximum absolute value (left unchanged when that is zero).
    """

    lead: int
    label: Optional[str]
    length: int
    beat_mean: np.ndarray
    relevance_mean: np.ndarray
    relevance_variance: np.ndarray
    recording_ids: list = field(default_factory=list)
    beats: np.ndarray = None        # (recordings, length) resampled beats
    relevances: np.ndarray = None   # (recordings, length) resampled relevance traces
    skipped: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.recording_ids)

    @property
    def beat_normalized(self) -> np.ndarray:
        return normalize_trace(self.beat_mean)

    @property
    def relevance_normalized(self) -> np.ndarray:
        return normalize_trace(self.relevance_mean)


def normalize_trace(trace):
    """Scale into [-1, 1] by the maximum absolute value, keeping zero at zero."""
    t = np.asarray(trace, dtype=np.float64)
    m = float(np.max(np.abs(t))) if t.size else 0.0
    return t / m if m > 0 else t.copy()


def recording_beat(recording, relevance, lead, detection_lead=DEFAULT_LEAD,
                   r_peaks=None) -> RecordingBeat:
    """Average beat and relevance of one recording, cut at the same indices."""
    rid = recording.id
    rel_id = getattr(relevance, "recording_id", None)
    if rel_id is not None and rel_id != rid:
        raise ValueError(f"relevance for {rel_id!r} paired with recording {rid!r}")
    values = np.asarray(getattr(relevance, "values", relevance), dtype=np.float64)
    if values.shape != recording.samples.shape:
        raise ValueError(f"{rid}: relevance shape {values.shape} differs from recording "
                         f"shape {recording.samples.shape}")
    peaks = detect_r_peaks(recording, detection_lead) if r_peaks is None else r_peaks
    beats = segment_beats(recording, peaks)
    k = lead_index(lead)
    rel_segments = segment_signal(values[:, k : k + 1], beats.r_peaks, beats.window)
    return RecordingBeat(recording_id=rid, r_peaks=beats.r_peaks, window=beats.window,
                         beat=mean_segments(beats.segments[:, :, k]),
                         relevance=mean_segments(rel_segments[:, :, 0]))


def _mean_var(rows):
    rows = np.asarray(rows, dtype=np.float64)
    ref = rows[0]
    dev = rows - ref
    mean_dev = dev.mean(axis=0)
    return ref + mean_dev, ((dev - mean_dev) ** 2).mean(axis=0)


def aggregate_beats(items, lead, label=None, skipped=()) -> AverageRelevanceBeat:
    """Resample per-recording traces to the median window length and reduce.

    Recordings are reduced in sorted id order so the floating-point result
    does not depend on input order.
    """
    items = sorted(items, key=lambda it: it.recording_id)
    if not items:
        raise ValueError("no beats detected in any recording")
    length = int(np.floor(np.median([it.beat.size for it in items]) + 0.5))
    beats = np.stack([resample_to_length(it.beat, length) for it in items])
    rels = np.stack([resample_to_length(it.relevance, length) for it in items])
    beat_mean, _ = _mean_var(beats)
    rel_mean, rel_var = _mean_var(rels)
    return AverageRelevanceBeat(lead=lead_index(lead), label=label, length=length,
                                beat_mean=beat_mean, relevance_mean=rel_mean,
                                relevance_variance=rel_var,
                                recording_ids=[it.recording_id for it in items],
                                beats=beats, relevances=rels, skipped=list(skipped))


def average_relevance_beats(recordings, relevances, label=None, lead=DEFAULT_LEAD,
                            detection_lead=DEFAULT_LEAD, r_peaks=None) -> AverageRelevanceBeat:
    """Per-class average beat and relevance trace on ``lead``.

    Parameters
    ----------
    recordings, relevances : sequences
        Paired element-wise; ids must agree.
    label : str, optional
        Only recordings with this ground-truth label are used.
    r_peaks : dict, optional
        Known R-peak indices per recording id; detection is skipped for those.

    Recordings where no R-peak is found are skipped and listed in
    ``skipped``; if every recording is skipped a ``ValueError`` is raised.
    """
    recordings, relevances = list(recordings), list(relevances)
    if len(recordings) != len(relevances):
        raise ValueError("recordings and relevances differ in number")
    items, skipped = [], []
    for rec, rel in zip(recordings, relevances):
        if label is not None and rec.label != label:
            continue
        peaks = None if r_peaks is None else r_peaks.get(rec.id)
        try:
            items.append(recording_beat(rec, rel, lead, detection_lead, peaks))
        except NoPeaksError:
            skipped.append(rec.id)
    if not items:
        raise ValueError("no beats detected in any recording")
    return aggregate_beats(items, lead, label, skipped)
