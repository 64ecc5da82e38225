"""Per-recording and per-lead relevance means, histograms and boxplot summaries."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


def _values(relevance):
    return np.asarray(getattr(relevance, "values", relevance), dtype=np.float64)


def mean_recording(relevance) -> float:
    """Mean relevance over all samples and leads."""
    v = _values(relevance)
    return float(v.sum() / v.size)


def mean_lead(relevance) -> np.ndarray:
    """Mean relevance of each lead over its samples, shape ``(leads,)``."""
    v = _values(relevance)
    return v.sum(axis=0) / v.shape[0]


@dataclass
class RecordingMeanRelevance:
    recording_id: str
    mean: float
    probability: Optional[float] = None
    linear_score: Optional[float] = None
    predicted: Optional[bool] = None
    label: Optional[str] = None
    lead_means: Optional[np.ndarray] = None


def summarize_recording(relevance, recording_id=None, **fields) -> RecordingMeanRelevance:
    rid = recording_id if recording_id is not None else getattr(relevance, "recording_id", None)
    return RecordingMeanRelevance(recording_id=rid, mean=mean_recording(relevance),
                                  lead_means=mean_lead(relevance), **fields)


@dataclass
class ClassHistogram:
    edges: np.ndarray
    counts: dict  # class label -> int array of len(edges) - 1

    @property
    def bins(self) -> int:
        return self.edges.size - 1

    def totals(self) -> dict:
        return {k: int(c.sum()) for k, c in self.counts.items()}


def class_histogram(relevances: dict, bins: int = 100) -> ClassHistogram:
    """Histogram every class's relevance values on one shared set of edges.

    ``relevances`` maps a class label to a collection of relevance tensors
    or arrays. Edges span the joint minimum and maximum; when all values are
    equal the range is that value +-0.5.
    """
    if bins < 1:
        raise ValueError("bins must be positive")
    if not relevances:
        raise ValueError("no classes given")
    flat = {}
    for label in sorted(relevances):
        items = list(relevances[label])
        if not items:
            raise ValueError(f"class {label!r} has no relevance tensors")
        flat[label] = np.concatenate([_values(r).ravel() for r in items])
    lo = min(float(v.min()) for v in flat.values())
    hi = max(float(v.max()) for v in flat.values())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.histogram_bin_edges(np.empty(0), bins=bins, range=(lo, hi))
    counts = {label: np.histogram(v, bins=edges)[0] for label, v in flat.items()}
    return ClassHistogram(edges=edges, counts=counts)


@dataclass
class BoxplotStats:
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: np.ndarray = field(default_factory=lambda: np.empty(0))
    n: int = 0

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def boxplot_stats(values, whisker: float = 1.5) -> BoxplotStats:
    """Quartiles by linear interpolation; whiskers at the most extreme data
    points within ``whisker * IQR`` of the quartiles, clamped to the box."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise ValueError("boxplot of an empty collection")
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - whisker * iqr, q3 + whisker * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    outliers = v[(v < lo_fence) | (v > hi_fence)]
    # a whisker never ends inside the box (interpolated quartiles can pass the data)
    return BoxplotStats(median=float(med), q1=float(q1), q3=float(q3),
                        whisker_low=float(min(inside.min(), q1)),
                        whisker_high=float(max(inside.max(), q3)),
                        outliers=outliers, n=int(v.size))
