import numpy as np
import pytest

from oracles import count_into_bins, enumerate_rank_sum_p, order_statistic_quantile
from relattr.analysis import (
    DEFAULT_THRESHOLDS, RecordingBeat, aggregate_beats, average_relevance_beats,
    boxplot_stats, build_analysis, class_histogram, classify_with_threshold, format_report,
    mean_lead, mean_recording, normalize_trace, recording_beat, summarize_recording,
    wilcoxon_rank_sum,
)
from relattr.attribution import RelevanceTensor, Method
from relattr.signal import (
    EcgRecording, SynthConfig, detect_r_peaks, resample_to_length, synth_ecg,
)


# ---- means ----------------------------------------------------------------------------

def test_mean_recording_trivial():
    assert mean_recording(np.ones((4096, 12))) == 1.0
    assert mean_recording(np.zeros((4096, 12))) == 0.0


def test_mean_lead_one_hot():
    r = np.zeros((4096, 12))
    r[:, 0] = 1.0
    m = mean_lead(r)
    assert m[0] == 1.0 and np.all(m[1:] == 0)


def test_mean_lead_matches_double_loop():
    r = np.random.default_rng(0).normal(size=(64, 12))
    loops = []
    for k in range(12):
        acc = 0.0
        for j in range(64):
            acc += r[j, k]
        loops.append(acc / 64)
    np.testing.assert_allclose(mean_lead(r), loops, rtol=1e-13, atol=1e-16)
    assert abs(np.mean(mean_lead(r)) - mean_recording(r)) < 1e-12


def test_summarize_recording_uses_tensor_id():
    t = RelevanceTensor(values=np.ones((4, 12)), method=Method.IG, class_index=0,
                        recording_id="r9", config={})
    s = summarize_recording(t, label="AF")
    assert s.recording_id == "r9" and s.mean == 1.0 and s.label == "AF"
    assert s.mean * 4 * 12 == pytest.approx(t.total(), rel=1e-9)


# ---- histogram ------------------------------------------------------------------------

def test_histogram_of_zeros():
    h = class_histogram({"Normal": [np.zeros((4096, 12))]}, bins=10)
    counts = h.counts["Normal"]
    zero_bin = np.searchsorted(h.edges, 0.0, side="right") - 1
    assert counts[zero_bin] == 4096 * 12 and counts.sum() == 4096 * 12


def test_histogram_conserves_counts_and_matches_naive():
    rng = np.random.default_rng(2)
    data = {"Normal": [rng.normal(size=(50, 12)) for _ in range(3)],
            "AF": [rng.normal(0.5, 2, size=(50, 12)) for _ in range(2)]}
    h = class_histogram(data, bins=17)
    assert h.totals() == {"Normal": 3 * 600, "AF": 2 * 600}
    edges = h.edges.tolist()
    for label, tensors in data.items():
        flat = np.concatenate([t.ravel() for t in tensors]).tolist()
        assert h.counts[label].tolist() == count_into_bins(flat, edges)
    lo = min(t.min() for ts in data.values() for t in ts)
    hi = max(t.max() for ts in data.values() for t in ts)
    assert edges[0] == lo and edges[-1] == hi


def test_histogram_errors():
    with pytest.raises(ValueError):
        class_histogram({"AF": []})
    with pytest.raises(ValueError):
        class_histogram({})


# ---- boxplots -------------------------------------------------------------------------

def test_boxplot_small():
    b = boxplot_stats([1, 2, 3, 4, 5])
    assert (b.median, b.q1, b.q3) == (3, 2, 4)
    assert (b.whisker_low, b.whisker_high) == (1, 5) and b.outliers.size == 0


def test_boxplot_whisker_clamped_to_box():
    b = boxplot_stats([0.0, 1.0, 1.0, 1.0])
    assert b.q1 == 0.75 and b.whisker_low == 0.75 and b.outliers.tolist() == [0.0]


def test_boxplot_all_equal():
    b = boxplot_stats([2.5] * 9)
    assert b.median == b.q1 == b.q3 == b.whisker_low == b.whisker_high == 2.5
    assert b.outliers.size == 0


def test_boxplot_matches_order_statistics():
    v = np.random.default_rng(4).standard_t(2, size=200).tolist()
    b = boxplot_stats(v)
    q1, med, q3 = (order_statistic_quantile(v, q) for q in (0.25, 0.5, 0.75))
    assert b.q1 == pytest.approx(q1, abs=1e-12)
    assert b.median == pytest.approx(med, abs=1e-12)
    assert b.q3 == pytest.approx(q3, abs=1e-12)
    fence = 1.5 * (q3 - q1)
    inside = [x for x in v if q1 - fence <= x <= q3 + fence]
    assert b.whisker_low == min(min(inside), q1) and b.whisker_high == max(max(inside), q3)
    assert sorted(b.outliers.tolist()) == sorted(x for x in v if x not in inside)


def test_boxplot_empty():
    with pytest.raises(ValueError):
        boxplot_stats([])


# ---- rank-sum test --------------------------------------------------------------------

def test_ranksum_identical_samples():
    assert wilcoxon_rank_sum([1, 2, 3], [1, 2, 3]).p_value == 1.0


def test_ranksum_fully_separated():
    r = wilcoxon_rank_sum([1, 2, 3, 4, 5], [6, 7, 8, 9, 10])
    assert r.method == "exact" and r.statistic == 15
    assert r.p_value == pytest.approx(2 / 252, abs=1e-15)


def test_ranksum_exact_matches_enumeration_small_splits():
    rng = np.random.default_rng(7)
    for n_a in range(1, 6):
        for n_b in range(1, 7):
            # rounded values force ties
            a = np.round(rng.normal(size=n_a), 1)
            b = np.round(rng.normal(size=n_b), 1)
            got = wilcoxon_rank_sum(a, b).p_value
            assert got == pytest.approx(enumerate_rank_sum_p(a.tolist(), b.tolist()),
                                        abs=1e-15)


def test_ranksum_normal_close_to_exact_at_6_6():
    rng = np.random.default_rng(11)
    for _ in range(20):
        a, b = rng.normal(size=6), rng.normal(0.8, 1, size=6)
        exact = wilcoxon_rank_sum(a, b, method="exact").p_value
        approx = wilcoxon_rank_sum(a, b, method="normal").p_value
        assert abs(exact - approx) < 0.02


def test_ranksum_method_switch_and_errors():
    assert wilcoxon_rank_sum(range(10), range(10, 20)).method == "exact"
    assert wilcoxon_rank_sum(range(10), range(10, 21)).method == "normal"
    with pytest.raises(ValueError):
        wilcoxon_rank_sum([], [1])
    with pytest.raises(ValueError):
        wilcoxon_rank_sum([1], [2], method="t")


def test_ranksum_against_scipy_normal():
    from scipy.stats import mannwhitneyu
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=40), rng.normal(0.3, 1, size=35)
    ours = wilcoxon_rank_sum(a, b).p_value
    ref = mannwhitneyu(a, b, alternative="two-sided", method="asymptotic").pvalue
    assert ours == pytest.approx(ref, rel=1e-10)


def test_ranksum_all_tied_large():
    assert wilcoxon_rank_sum([1.0] * 15, [1.0] * 15).p_value == 1.0


# ---- thresholds -----------------------------------------------------------------------

def test_thresholds_strict():
    assert DEFAULT_THRESHOLDS == {"AF": 0.39, "LBBB": 0.05}
    assert not classify_with_threshold(0.39, "AF")
    assert classify_with_threshold(0.40, "AF")
    assert not classify_with_threshold(0.05, "LBBB")
    assert classify_with_threshold(0.06, "lbbb")
    with pytest.raises(ValueError):
        classify_with_threshold(0.5, "RBBB")
    with pytest.raises(ValueError):
        classify_with_threshold(1.5, "AF")
    assert classify_with_threshold(0.2, "AF", {"AF": 0.1})


# ---- beat aggregation -----------------------------------------------------------------

def test_normalize_trace():
    np.testing.assert_array_equal(normalize_trace([0.0, -2.0, 1.0]), [0.0, -1.0, 0.5])
    np.testing.assert_array_equal(normalize_trace([0.0, 0.0]), [0.0, 0.0])


def test_constant_relevance_single_recording():
    rec, _ = synth_ecg(SynthConfig(heart_rate=60))
    rel = np.full((4096, 12), 0.25)
    out = average_relevance_beats([rec], [rel])
    # the windows of the first/last beats stay inside the signal at 60 bpm
    assert np.all(out.relevance_mean == 0.25)
    assert np.all(out.relevance_variance == 0)


def test_opposite_traces_give_zero_mean_and_square_variance():
    r = np.random.default_rng(3).normal(size=50)
    items = [RecordingBeat("a", np.array([10]), (20, 29), np.ones(50), r),
             RecordingBeat("b", np.array([10]), (20, 29), np.ones(50), -r)]
    out = aggregate_beats(items, "II")
    assert np.all(out.relevance_mean == 0)
    np.testing.assert_allclose(out.relevance_variance, r ** 2, rtol=1e-15)


def test_identical_traces_give_exactly_zero_variance():
    r = np.random.default_rng(5).normal(size=41)
    items = [RecordingBeat(f"r{i}", np.array([5]), (20, 20), r * 3, r) for i in range(7)]
    out = aggregate_beats(items, "V1")
    assert np.all(out.relevance_variance == 0)
    assert out.relevance_mean.tobytes() == r.tobytes()
    assert out.lead == 6 and out.count == 7


def test_aggregation_is_order_independent():
    rng = np.random.default_rng(0)
    items = [RecordingBeat(f"r{i}", np.array([5]), (10, 10), rng.normal(size=21 + i % 3),
                           rng.normal(size=21 + i % 3)) for i in range(9)]
    a = aggregate_beats(items, "II")
    b = aggregate_beats(items[::-1], "II")
    assert a.relevance_mean.tobytes() == b.relevance_mean.tobytes()
    assert a.length == 22  # median of lengths 21, 22, 23


def test_average_relevance_beats_matches_straight_line_rewrite():
    recs, rels = [], []
    for i, bpm in enumerate((58, 66, 73)):
        rec, _ = synth_ecg(SynthConfig(heart_rate=bpm, noise=0.02, mode="af", seed=i),
                           id=f"af-{i}")
        recs.append(rec)
        rels.append(np.random.default_rng(i).normal(size=(4096, 12)))
    out = average_relevance_beats(recs, rels, label="AF", lead="II")
    # rewrite: per-recording loops over beats, then resample and average
    beat_traces, rel_traces = [], []
    for rec, rel in zip(recs, rels):
        peaks = detect_r_peaks(rec, "II")
        rr = np.median(np.diff(peaks))
        pre, post = int(round(0.35 * rr)), int(round(0.55 * rr))
        segs_b, segs_r = [], []
        for p in peaks:
            sb, sr = np.zeros(pre + post + 1), np.zeros(pre + post + 1)
            for o in range(-pre, post + 1):
                if 0 <= p + o < 4096:
                    sb[o + pre] = rec.samples[p + o, 1]
                    sr[o + pre] = rel[p + o, 1]
            segs_b.append(sb)
            segs_r.append(sr)
        beat_traces.append(np.mean(segs_b, axis=0))
        rel_traces.append(np.mean(segs_r, axis=0))
    length = int(np.floor(np.median([t.size for t in beat_traces]) + 0.5))
    rs = np.array([resample_to_length(t, length) for t in rel_traces])
    bs = np.array([resample_to_length(t, length) for t in beat_traces])
    assert out.length == length and out.count == 3
    np.testing.assert_allclose(out.relevance_mean, rs.mean(axis=0), rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(out.relevance_variance, rs.var(axis=0), rtol=1e-9, atol=1e-13)
    np.testing.assert_allclose(out.beat_mean, bs.mean(axis=0), rtol=1e-10, atol=1e-13)


def test_mean_beat_of_noisy_recordings_matches_template():
    noise = 0.02
    recs, rels, peaks = [], [], {}
    for i in range(30):
        rec, truth = synth_ecg(SynthConfig(heart_rate=60, noise=noise, seed=i), id=f"n{i}")
        recs.append(rec)
        rels.append(np.zeros((4096, 12)))
        peaks[rec.id] = truth
    out = average_relevance_beats(recs, rels, lead="II", r_peaks=peaks)
    from relattr.signal import beat_template
    cfg = SynthConfig(heart_rate=60)
    template = beat_template(cfg, np.arange(-140, 221) / 400.0)[:, 1]
    assert out.length == 361
    assert np.sqrt(np.mean((out.beat_mean - template) ** 2)) < noise


def test_recording_relevance_mismatch_rejected():
    rec, _ = synth_ecg(SynthConfig(), id="x")
    t = RelevanceTensor(values=np.zeros((4096, 12)), method=Method.IG, class_index=0,
                        recording_id="y", config={})
    with pytest.raises(ValueError):
        recording_beat(rec, t, "II")
    with pytest.raises(ValueError):
        recording_beat(rec, np.zeros((100, 12)), "II")


def test_all_flat_recordings_raise():
    flat = EcgRecording("f", np.zeros((4096, 12)))
    with pytest.raises(ValueError):
        average_relevance_beats([flat], [np.zeros((4096, 12))])


def test_flat_recordings_are_skipped():
    rec, _ = synth_ecg(SynthConfig(), id="ok")
    flat = EcgRecording("flat", np.zeros((4096, 12)))
    out = average_relevance_beats([rec, flat], [np.zeros((4096, 12))] * 2)
    assert out.recording_ids == ["ok"] and out.skipped == ["flat"]


# ---- report ---------------------------------------------------------------------------

def _toy_analysis():
    rng = np.random.default_rng(0)
    rows, rels, beats = [], {}, []
    for label in ("Normal", "AF"):
        for i in range(6):
            rid = f"{label.lower()}-{i}"
            rows.append({"id": rid, "label": label, "probability": 0.3 + 0.02 * i,
                         "linear": -0.5 + i, "predicted": label == "AF"})
            rels[rid] = rng.normal(0.1 if label == "AF" else 0.0, 1.0, size=(32, 12))
            beats.append(RecordingBeat(rid, np.array([5]), (3, 4), rng.normal(size=8),
                                       rng.normal(size=8)))
    return build_analysis(rows, rels, beats, "AF", bins=5, meta={"method": "IG"}), rels


def test_build_analysis_structure():
    analysis, rels = _toy_analysis()
    assert analysis["labels"] == ["AF", "Normal"]
    assert len(analysis["lead_tests"]) == 12
    assert all(t["p_value"] is not None for t in analysis["lead_tests"])
    for rec in analysis["recordings"]:
        assert rec["mean"] == mean_recording(rels[rec["id"]])
    h = analysis["histogram"]
    assert sum(h["counts"]["AF"]) == 6 * 32 * 12
    assert set(analysis["beats"]) == {"AF", "Normal"}


def test_format_report_sections():
    analysis, _ = _toy_analysis()
    text = format_report(analysis)
    for section in ("[recordings]", "[lead_tests]", "[histogram]", "[beats AF lead II"):
        assert section in text
    lines = text.splitlines()
    start = lines.index("[recordings]")
    assert lines[start + 1].startswith("id,label,C_n,linear_score,predicted,M_n,M_n_I")
    assert len([ln for ln in lines if ln.startswith("af-")]) == 6
    assert format_report(analysis) == text


def test_mn_times_jk_matches_completeness(resnet):
    from relattr.attribution import AttributionConfig, check_completeness, integrated_gradients
    x = np.random.default_rng(12).normal(size=(4096, 12))
    cfg = AttributionConfig(class_index=4)
    rel = integrated_gradients(resnet, x, cfg)
    rep = check_completeness(resnet, x, rel, cfg)
    gap = abs(4096 * 12 * mean_recording(rel) - rep.score_difference)
    assert gap / max(1.0, abs(rep.score_difference)) < rep.tolerance
