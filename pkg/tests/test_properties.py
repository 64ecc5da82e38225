"""Property-based checks of the package invariants."""

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import enumerate_rank_sum_p
from relattr import render
from relattr.analysis import (
    RecordingBeat, aggregate_beats, boxplot_stats, class_histogram, classify_with_threshold,
    mean_lead, mean_recording, normalize_trace, wilcoxon_rank_sum,
)
from relattr.attribution import AttributionConfig, Method, RelevanceTensor, attribute, lrp
from relattr.io import read_recording, read_relevance, write_recording, write_relevance
from relattr.nn import forward, predict
from relattr.nn.fixtures import conv_dense_net, relu_net
from relattr.nn.model import DENSE, Layer, Model
from relattr.nn.ops import sigmoid
from relattr.signal import (
    BeatSet, EcgRecording, SynthConfig, average_beats, detect_r_peaks, fit_length, resample,
    segment_beats, synth_ecg,
)

# normal-range magnitudes keep scaled values from underflowing to zero
finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False, allow_subnormal=False)
seeds = st.integers(0, 2 ** 31 - 1)


def vectors(n_min=1, n_max=30):
    return st.lists(finite, min_size=n_min, max_size=n_max)


# ---- nn engine ------------------------------------------------------------------------

@given(seeds, seeds)
def test_forward_is_bitwise_deterministic(model_seed, x_seed):
    model = relu_net((6, 5, 4, 3), seed=model_seed % 1000)
    x = np.random.default_rng(x_seed).normal(size=(4, 6))
    a, b = predict(model, x), predict(model, x.copy())
    assert a.tobytes() == b.tobytes()


@given(arrays(np.float64, st.integers(2, 20), elements=st.floats(-30, 30)))
def test_sigmoid_keeps_ranking(z):
    p = sigmoid(z)
    assert np.all((p >= 0) & (p <= 1))
    order = np.argsort(z, kind="stable")
    assert np.all(np.diff(p[order]) >= 0)


# ---- attribution ----------------------------------------------------------------------

@given(arrays(np.float64, 5, elements=finite), arrays(np.float64, 5, elements=finite),
       st.integers(1, 200))
def test_ig_on_linear_model_is_input_times_weight(weights, x, steps):
    model = Model(layers=(Layer(DENSE, {"kernel": weights[:, None], "bias": [0.3]}),),
                  input_shape=(5,), output_dim=1)
    rel = attribute(model, x, AttributionConfig(steps=steps))
    np.testing.assert_allclose(rel.values, x * weights, rtol=1e-12, atol=1e-9)


@given(seeds, st.sampled_from(list(Method)))
def test_relevance_shape_and_finiteness(seed, method):
    model = conv_dense_net(seed=seed % 1000, length=12, channels=2, filters=3, size=3)
    x = np.random.default_rng(seed).normal(size=(12, 2)) * 3
    rel = attribute(model, x, AttributionConfig(method=method, steps=16))
    assert rel.values.shape == x.shape and np.all(np.isfinite(rel.values))


@given(seeds)
def test_alpha_beta_equals_basic_rule_for_nonnegative_contributions(seed):
    rng = np.random.default_rng(seed)
    model = Model(layers=(Layer(DENSE, {"kernel": np.abs(rng.normal(size=(6, 2)))}),),
                  input_shape=(6,), output_dim=2)
    x = np.abs(rng.normal(size=6)) + 1e-3
    for c in range(2):
        a = lrp(model, x, AttributionConfig(method="LRP-alphabeta", class_index=c))
        e = lrp(model, x, AttributionConfig(method="LRP-epsilon", epsilon=0.0, class_index=c))
        np.testing.assert_allclose(a.values, e.values, rtol=1e-12)


@given(seeds)
def test_bias_free_basic_rule_conserves(seed):
    model = relu_net((7, 5, 4, 1), seed=seed % 1000, bias=False)
    x = np.random.default_rng(seed).normal(size=7)
    f = forward(model, x).linear[0]
    assume(abs(f) > 1e-6)
    rel = lrp(model, x, AttributionConfig(method="LRP-epsilon", epsilon=0.0))
    assert abs(rel.total() - f) <= 1e-9 * abs(f)


@given(seeds, seeds)
def test_wsquare_ignores_the_input(model_seed, x_seed):
    model = conv_dense_net(seed=model_seed % 1000, length=10, channels=2, filters=3, size=4)
    cfg = AttributionConfig(method="LRP-wsquare")
    ref = lrp(model, np.ones((10, 2)), cfg, initial_relevance=1.0).values
    x = np.random.default_rng(x_seed).normal(size=(10, 2)) * 4
    assert lrp(model, x, cfg, initial_relevance=1.0).values.tobytes() == ref.tobytes()


@settings(max_examples=25)
@given(st.sampled_from(list(Method)), st.integers(0, 5), seeds)
def test_method_tag_survives_persistence(tmp_path_factory, method, class_index, seed):
    values = np.random.default_rng(seed).normal(size=(8, 3))
    t = RelevanceTensor(values=values, method=method, class_index=class_index,
                        recording_id="r", config={"method": method.value})
    path = tmp_path_factory.mktemp("rel") / "r.txt"
    back = read_relevance(write_relevance(t, path))
    assert back.method is method and back.class_index == class_index
    assert back.values.tobytes() == values.tobytes()


# ---- signal ---------------------------------------------------------------------------

@given(st.integers(1, 9000), st.integers(1, 3))
def test_fit_length_is_idempotent(n, leads):
    x = np.random.default_rng(n).normal(size=(n, leads))
    once = fit_length(x)
    assert once.shape == (4096, leads)
    assert fit_length(once).tobytes() == once.tobytes()


@given(arrays(np.float64, st.integers(1, 50), elements=finite), st.floats(1, 2000))
def test_resample_identity_at_equal_rates(x, rate):
    assert resample(x, rate, rate).tobytes() == x.tobytes()


@given(arrays(np.float64, (1, 9, 2), elements=finite), st.integers(1, 12))
def test_average_of_copies_is_the_copy(segment, n):
    beats = BeatSet(r_peaks=np.arange(n) * 10 + 5, window=(4, 4),
                    segments=np.repeat(segment, n, axis=0))
    # exact value equality; -0.0 and 0.0 may differ in their sign bit only
    np.testing.assert_array_equal(average_beats(beats), segment[0])


@settings(max_examples=20)
@given(st.floats(40, 180), st.sampled_from(["normal", "af", "lbbb"]), seeds)
def test_detected_peaks_are_ordered_and_in_range(bpm, mode, seed):
    rec, truth = synth_ecg(SynthConfig(heart_rate=bpm, mode=mode, seed=seed % 10000))
    peaks = detect_r_peaks(rec)
    assert peaks.size == truth.size
    assert np.all(np.diff(peaks) > 0) and peaks[0] >= 0 and peaks[-1] < 4096


@given(st.lists(st.integers(0, 4095), min_size=1, max_size=12, unique=True))
def test_segments_have_window_length_and_shared_indices(peaks):
    peaks = sorted(peaks)
    x = np.random.default_rng(len(peaks)).normal(size=(4096, 12))
    beats = segment_beats(x, peaks, sample_rate=400)
    pre, post = beats.window
    assert beats.segments.shape == (len(peaks), pre + post + 1, 12)
    for i, p in enumerate(peaks):
        for o in (-pre, 0, post):
            expect = x[p + o] if 0 <= p + o < 4096 else np.zeros(12)
            np.testing.assert_array_equal(beats.segments[i, o + pre], expect)


# ---- analysis -------------------------------------------------------------------------

@given(arrays(np.float64, st.tuples(st.integers(1, 40), st.integers(1, 12)), elements=finite))
def test_recording_and_lead_means(r):
    m = mean_recording(r)
    assert abs(m * r.size - r.sum()) <= 1e-9 * max(1.0, np.abs(r).sum())
    assert abs(np.mean(mean_lead(r)) - m) <= 1e-12 * max(1.0, np.abs(r).max())


@given(st.dictionaries(st.sampled_from(["Normal", "AF", "LBBB"]),
                       st.lists(arrays(np.float64, st.integers(1, 20), elements=finite),
                                min_size=1, max_size=3), min_size=1),
       st.integers(1, 50))
def test_histogram_conserves_counts(data, bins):
    h = class_histogram(data, bins=bins)
    for label, tensors in data.items():
        assert int(h.counts[label].sum()) == sum(t.size for t in tensors)


@given(vectors(1, 12), vectors(1, 12))
def test_ranksum_symmetry(a, b):
    assert wilcoxon_rank_sum(a, b).p_value == wilcoxon_rank_sum(b, a).p_value


@settings(max_examples=40)
@given(st.lists(st.integers(-3, 3), min_size=1, max_size=6),
       st.lists(st.integers(-3, 3), min_size=1, max_size=6))
def test_ranksum_exact_equals_enumeration(a, b):
    got = wilcoxon_rank_sum(a, b)
    assert got.method == "exact"
    assert abs(got.p_value - enumerate_rank_sum_p(a, b)) <= 1e-15


@given(vectors(1, 60))
def test_boxplot_ordering(values):
    b = boxplot_stats(values)
    assert b.whisker_low <= b.q1 <= b.median <= b.q3 <= b.whisker_high
    assert b.whisker_low >= b.q1 - 1.5 * b.iqr - 1e-9
    assert b.whisker_high <= b.q3 + 1.5 * b.iqr + 1e-9
    assert b.n == len(values)


@given(st.lists(st.integers(5, 30), min_size=1, max_size=6), seeds)
def test_beat_variance_nonnegative_and_lengths_match(lengths, seed):
    rng = np.random.default_rng(seed)
    items = [RecordingBeat(f"r{i}", np.array([10]), (n // 2, n - n // 2 - 1),
                           rng.normal(size=n), rng.normal(size=n) * 1e-3)
             for i, n in enumerate(lengths)]
    out = aggregate_beats(items, "II")
    assert np.all(out.relevance_variance >= 0)
    assert out.beat_mean.size == out.relevance_mean.size == out.length


@given(arrays(np.float64, st.integers(1, 30), elements=finite), st.integers(1, 5))
def test_identical_traces_have_zero_variance(trace, n):
    items = [RecordingBeat(f"r{i}", np.array([0]), (0, trace.size - 1), trace, trace)
             for i in range(n)]
    assert np.all(aggregate_beats(items, "II").relevance_variance == 0)


@given(arrays(np.float64, st.integers(1, 30), elements=finite))
def test_normalized_trace_in_unit_range(trace):
    t = normalize_trace(trace)
    assert np.all(np.abs(t) <= 1.0) and np.array_equal(np.sign(t), np.sign(trace))


@given(st.floats(0, 1), st.floats(0, 1), st.sampled_from(["AF", "LBBB"]))
def test_threshold_decision_is_monotone(p, q, label):
    lo, hi = sorted((p, q))
    assert classify_with_threshold(lo, label) <= classify_with_threshold(hi, label)


# ---- io and rendering -----------------------------------------------------------------

@settings(max_examples=15)
@given(seeds)
def test_recording_round_trip_at_declared_precision(tmp_path_factory, seed):
    x = np.random.default_rng(seed).normal(size=(4096, 12))
    rec = EcgRecording("p", x, label="LBBB")
    path = tmp_path_factory.mktemp("rec") / "p.csv"
    back = read_recording(write_recording(rec, path))
    np.testing.assert_allclose(back.samples, x, rtol=1e-8, atol=1e-300)
    before = path.read_bytes()
    read_recording(path)
    assert path.read_bytes() == before


@given(arrays(np.float64, (6, 3), elements=finite))
def test_zero_stays_grey_under_per_lead_scaling(r):
    r = r.copy()
    r[0] = 0.0
    pos = render.lead_color_positions(r)
    assert np.all(pos[0] == 0) and np.all(np.abs(pos) <= 1)
    assert all(render.level_color(q) == render.diverging_color(0) for q in
               render.quantize(pos[0]))


@given(st.floats(-1, 1))
def test_colour_map_symmetric_distance_from_grey(p):
    assert render.quantize(p) == -render.quantize(-p)
