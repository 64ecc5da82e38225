"""Assemble analysis results into a JSON-able summary and a text report."""

from dataclasses import asdict

import numpy as np

from ..signal.ecg import LEAD_NAMES
from .beats import aggregate_beats
from .ranksum import wilcoxon_rank_sum
from .stats import boxplot_stats, class_histogram, mean_lead, mean_recording

REPORT_TITLE = "# relattr analysis report"
BASELINE_LABEL = "Normal"


def _box_dict(values):
    b = boxplot_stats(values)
    d = asdict(b)
    d["outliers"] = [float(v) for v in b.outliers]
    return d


def build_analysis(rows, relevances, beat_items, target, bins=100, lead="II",
                   meta=None) -> dict:
    """Summarize one method's relevance over a labelled set.

    Parameters
    ----------
    rows : list of dict
        Per recording: ``id``, ``label``, ``probability``, ``linear``,
        ``predicted``.
    relevances : dict
        Recording id to relevance values ``(samples, leads)``.
    beat_items : list of RecordingBeat
        Per-recording average beats on ``lead``.
    target : str
        Interrogated class, compared against ``Normal`` recordings.
    """
    rows = sorted(rows, key=lambda r: r["id"])
    records = []
    for r in rows:
        v = relevances[r["id"]]
        rec = dict(r)
        rec["target"] = target
        rec["mean"] = mean_recording(v)
        rec["lead_means"] = [float(m) for m in mean_lead(v)]
        rec["box"] = _box_dict(v)
        records.append(rec)
    labels = sorted({r["label"] for r in records})

    lead_tests = []
    by_label = {lab: np.array([r["lead_means"] for r in records if r["label"] == lab])
                for lab in labels}
    lead_boxes = {lab: [_box_dict(by_label[lab][:, k]) for k in range(len(LEAD_NAMES))]
                  for lab in labels}
    compare = [lab for lab in (BASELINE_LABEL, target) if lab in by_label]
    for k, name in enumerate(LEAD_NAMES):
        entry = {"lead": name,
                 "medians": {lab: float(np.median(by_label[lab][:, k])) for lab in labels}}
        if len(compare) == 2 and compare[0] != compare[1]:
            res = wilcoxon_rank_sum(by_label[target][:, k], by_label[BASELINE_LABEL][:, k])
            entry.update(statistic=res.statistic, p_value=res.p_value, test=res.method)
        else:
            entry.update(statistic=None, p_value=None, test=None)
        lead_tests.append(entry)

    hist = class_histogram({lab: [relevances[r["id"]] for r in records if r["label"] == lab]
                            for lab in labels}, bins=bins) if records else None

    beats = {}
    label_of = {r["id"]: r["label"] for r in records}
    for lab in labels:
        items = [it for it in beat_items if label_of.get(it.recording_id) == lab]
        if not items:
            continue
        agg = aggregate_beats(items, lead, lab)
        beats[lab] = {"lead": LEAD_NAMES[agg.lead], "length": agg.length, "count": agg.count,
                      "beat_mean": agg.beat_mean.tolist(),
                      "relevance_mean": agg.relevance_mean.tolist(),
                      "relevance_variance": agg.relevance_variance.tolist(),
                      "beat_normalized": agg.beat_normalized.tolist(),
                      "relevance_normalized": agg.relevance_normalized.tolist()}
    return {"meta": dict(meta or {}), "target": target, "labels": labels,
            "recordings": records, "lead_tests": lead_tests, "lead_boxplots": lead_boxes,
            "histogram": None if hist is None else {
                "edges": hist.edges.tolist(),
                "counts": {k: v.tolist() for k, v in hist.counts.items()}},
            "beats": beats}


def _g(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.10g}"


def format_report(analysis: dict) -> str:
    """Plain-text report with per-recording, per-lead, histogram and beat sections."""
    out = [REPORT_TITLE]
    for key in sorted(analysis["meta"]):
        out.append(f"{key}: {analysis['meta'][key]}")
    out.append(f"target_class: {analysis['target']}")
    out.append(f"recordings: {len(analysis['recordings'])}")
    out.append("")
    out.append("[recordings]")
    out.append("id,label,C_n,linear_score,predicted,M_n," +
               ",".join(f"M_n_{name}" for name in LEAD_NAMES))
    for r in analysis["recordings"]:
        out.append(",".join([r["id"], r["label"], _g(r["probability"]), _g(r["linear"]),
                             _g(r["predicted"]), _g(r["mean"])] +
                            [_g(m) for m in r["lead_means"]]))
    out.append("")
    out.append("[lead_tests]")
    labels = analysis["labels"]
    out.append("lead," + ",".join(f"median_{lab}" for lab in labels) + ",statistic,p_value,test")
    for t in analysis["lead_tests"]:
        out.append(",".join([t["lead"]] + [_g(t["medians"][lab]) for lab in labels] +
                            [_g(t["statistic"]), _g(t["p_value"]), t["test"] or ""]))
    out.append("")
    hist = analysis["histogram"]
    out.append("[histogram]")
    if hist is not None:
        keys = sorted(hist["counts"])
        out.append("bin_low,bin_high," + ",".join(f"count_{k}" for k in keys))
        edges = hist["edges"]
        for i in range(len(edges) - 1):
            out.append(",".join([_g(edges[i]), _g(edges[i + 1])] +
                                [str(hist["counts"][k][i]) for k in keys]))
    for lab in sorted(analysis["beats"]):
        b = analysis["beats"][lab]
        out.append("")
        out.append(f"[beats {lab} lead {b['lead']} recordings {b['count']}]")
        out.append("offset,beat_mean,relevance_mean,relevance_variance")
        for i in range(b["length"]):
            out.append(",".join([str(i), _g(b["beat_mean"][i]), _g(b["relevance_mean"][i]),
                                 _g(b["relevance_variance"][i])]))
    return "\n".join(out) + "\n"
