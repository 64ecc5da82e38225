"""Relevance aggregation, rank-sum testing and beat-level relevance analysis."""

from .beats import (
    AverageRelevanceBeat, RecordingBeat, aggregate_beats, average_relevance_beats,
    normalize_trace, recording_beat,
)
from .ranksum import EXACT_MAX_N, RankSumResult, wilcoxon_rank_sum
from .stats import (
    BoxplotStats, ClassHistogram, RecordingMeanRelevance, boxplot_stats, class_histogram,
    mean_lead, mean_recording, summarize_recording,
)
from .thresholds import DEFAULT_THRESHOLDS, classify_with_threshold

__all__ = [
    "DEFAULT_THRESHOLDS", "EXACT_MAX_N", "AverageRelevanceBeat", "BoxplotStats",
    "ClassHistogram", "RankSumResult", "RecordingBeat", "RecordingMeanRelevance",
    "aggregate_beats", "average_relevance_beats", "boxplot_stats", "class_histogram",
    "classify_with_threshold", "mean_lead", "mean_recording", "normalize_trace",
    "recording_beat", "summarize_recording", "wilcoxon_rank_sum",
]

from .report import build_analysis, format_report  # noqa: E402

__all__ += ["build_analysis", "format_report"]
