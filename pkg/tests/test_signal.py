import numpy as np
import pytest

from relattr.signal import (
    LEAD_NAMES, N_SAMPLES, EcgRecording, NoPeaksError, SynthConfig, average_beats,
    beat_template, beat_window, detect_r_peaks, fit_length, lead_index, preprocess,
    r_times, resample, resample_to_length, resampled_length, segment_beats, segment_signal,
    synth_ecg,
)
from relattr.signal.synth import DEFAULT_WAVES, LEAD_SCALES, effective_waves, with_mode


# ---- recordings -----------------------------------------------------------------------

def test_lead_lookup():
    assert lead_index("II") == 1 and lead_index("v1") == 6 and lead_index(11) == 11
    with pytest.raises(ValueError):
        lead_index("V7")
    with pytest.raises(ValueError):
        lead_index(12)


def test_recording_validation():
    with pytest.raises(ValueError):
        EcgRecording("a", np.zeros((10, 11)))
    bad = np.zeros((10, 12))
    bad[3, 2] = np.nan
    with pytest.raises(ValueError):
        EcgRecording("a", bad)
    with pytest.raises(ValueError):
        EcgRecording("a", np.zeros((10, 12)), label="RBBB")


# ---- resampling -----------------------------------------------------------------------

def test_resample_identity():
    x = np.random.default_rng(0).normal(size=(37, 2))
    np.testing.assert_array_equal(resample(x, 400, 400), x)


def test_resample_length_arithmetic():
    assert resample(np.zeros(5000), 500, 400).shape == (4000,)
    assert resampled_length(5, 3, 2) == 3  # 3.33 -> 3
    assert resampled_length(3, 2, 1) == 2  # 1.5 rounds half up


def test_resample_sine_oracle():
    n, f = 5000, 5.0
    x = np.sin(2 * np.pi * f * np.arange(n) / 500.0)
    y = resample(x, 500.0, 400.0)
    truth = np.sin(2 * np.pi * f * np.arange(y.size) / 400.0)
    rms = np.sqrt(np.mean((y - truth) ** 2))
    assert rms < 1e-3


def test_resample_upsampling_hits_original_samples():
    x = np.random.default_rng(1).normal(size=20)
    y = resample(x, 100, 300)
    np.testing.assert_allclose(y[::3][: x.size], x, atol=1e-15)


def test_resample_errors():
    with pytest.raises(ValueError):
        resample(np.zeros(0), 1, 2)
    with pytest.raises(ValueError):
        resample(np.zeros(4), 0, 2)


def test_resample_to_length_aligns_endpoints():
    x = np.array([0.0, 1.0, 4.0])
    np.testing.assert_allclose(resample_to_length(x, 5), [0.0, 0.5, 1.0, 2.5, 4.0])


# ---- length fitting -------------------------------------------------------------------

def test_fit_length_cases():
    x = np.arange(4096.0)
    np.testing.assert_array_equal(fit_length(x), x)
    short = fit_length(np.ones((3000, 2)))
    assert short.shape == (4096, 2)
    assert np.all(short[:548] == 0) and np.all(short[-548:] == 0)
    assert np.all(short[548:-548] == 1)
    long = fit_length(np.arange(5000.0))
    assert long[0] == 452 and long[-1] == 4547
    odd = fit_length(np.ones(4093))
    assert odd[:1].sum() == 0 and odd[-2:].sum() == 0 and odd[1] == 1


def test_preprocess_resamples_and_fits():
    rec = EcgRecording("a", np.ones((5000, 12)), sample_rate=500.0)
    out = preprocess(rec)
    assert out.samples.shape == (4096, 12) and out.sample_rate == 400.0
    same = EcgRecording("b", np.ones((4096, 12)))
    assert preprocess(same) is same


# ---- synthetic generator --------------------------------------------------------------

def test_synth_zero_amplitudes_give_zeros():
    waves = {k: (0.0, w, o) for k, (_, w, o) in DEFAULT_WAVES.items()}
    rec, _ = synth_ecg(SynthConfig(waves=waves))
    assert rec.samples.shape == (4096, 12)
    assert np.all(rec.samples == 0)


def test_synth_60_bpm_timing():
    cfg = SynthConfig(heart_rate=60, duration=10.24)
    times = r_times(cfg)
    assert times.size == 10
    _, peaks = synth_ecg(cfg)
    np.testing.assert_array_equal(np.diff(peaks), 400)


def test_synth_deterministic_per_seed():
    cfg = SynthConfig(noise=0.05, mode="af", seed=3)
    a, pa = synth_ecg(cfg)
    b, pb = synth_ecg(cfg)
    assert a.samples.tobytes() == b.samples.tobytes()
    np.testing.assert_array_equal(pa, pb)
    c, _ = synth_ecg(with_mode(cfg, "af", seed=4))
    assert c.samples.tobytes() != a.samples.tobytes()


def test_synth_noise_is_bounded():
    clean, _ = synth_ecg(SynthConfig(seed=1))
    noisy, _ = synth_ecg(SynthConfig(seed=1, noise=0.03))
    dev = np.abs(noisy.samples - clean.samples)
    assert dev.max() <= 0.03 and dev.max() > 0.02


def test_af_mode_has_no_p_wave_and_irregular_rhythm():
    cfg = SynthConfig(mode="af", seed=2)
    assert effective_waves(cfg)["P"][0] == 0.0
    _, peaks = synth_ecg(cfg)
    assert np.std(np.diff(peaks)) > 10
    # template at the P offset equals the Q-R-S-T tails only
    normal = beat_template(SynthConfig(), [-0.2])[0]
    af = beat_template(cfg, [-0.2])[0]
    np.testing.assert_allclose(normal - af, DEFAULT_WAVES["P"][0] * LEAD_SCALES[:, 0])


def test_lbbb_mode_widens_qrs_and_flips_t():
    normal, lbbb = effective_waves(SynthConfig()), effective_waves(SynthConfig(mode="lbbb"))
    assert lbbb["R"][1] == pytest.approx(2.5 * normal["R"][1])
    assert lbbb["T"][0] == -normal["T"][0]
    assert SynthConfig(mode="lbbb").label == "LBBB"


def test_lead_morphology_table():
    t = beat_template(SynthConfig(), [0.03])[0]  # S-wave time
    v1 = LEAD_NAMES.index("V1")
    assert t[v1] < 0 and abs(t[v1]) > abs(t[1])
    r = beat_template(SynthConfig(), [0.0])[0]
    assert r[LEAD_NAMES.index("aVR")] < 0


def test_synth_config_validation():
    for kwargs in ({"heart_rate": 0}, {"noise": -1}, {"mode": "rbbb"}, {"rr_jitter": 1.5}):
        with pytest.raises(ValueError):
            SynthConfig(**kwargs)


# ---- R-peak detection -----------------------------------------------------------------

def test_detect_clean_60_bpm():
    rec, truth = synth_ecg(SynthConfig(heart_rate=60))
    peaks = detect_r_peaks(rec)
    assert peaks.size == 10
    assert np.all(np.abs(peaks - truth) <= 10)


@pytest.mark.parametrize("mode", ["normal", "af", "lbbb"])
@pytest.mark.parametrize("bpm", [40, 60, 75, 100, 130, 160, 180])
def test_detect_counts_across_rates(mode, bpm):
    rec, truth = synth_ecg(SynthConfig(heart_rate=bpm, mode=mode, seed=bpm))
    peaks = detect_r_peaks(rec)
    assert peaks.size == truth.size
    assert np.all(np.abs(peaks - truth) <= 10)


def test_detect_with_noise():
    rec, truth = synth_ecg(SynthConfig(heart_rate=72, noise=0.05, seed=5))
    peaks = detect_r_peaks(rec)
    assert peaks.size == truth.size and np.all(np.abs(peaks - truth) <= 10)


def test_single_beat():
    rec, truth = synth_ecg(SynthConfig(r_peaks=(2048,)))
    peaks = detect_r_peaks(rec)
    assert peaks.size == 1 and abs(peaks[0] - 2048) <= 10


def test_flat_signal_raises_no_peaks():
    rec = EcgRecording("flat", np.zeros((4096, 12)))
    with pytest.raises(NoPeaksError):
        detect_r_peaks(rec)


def test_short_signal_rejected():
    with pytest.raises(ValueError):
        detect_r_peaks(np.ones(100), sample_rate=400)


def test_detect_other_lead_and_raw_array():
    rec, truth = synth_ecg(SynthConfig(heart_rate=80))
    a = detect_r_peaks(rec, lead="V5")
    b = detect_r_peaks(rec.samples[:, LEAD_NAMES.index("V5")], sample_rate=400)
    np.testing.assert_array_equal(a, b)
    assert np.all(np.abs(a - truth) <= 10)


# ---- segmentation ---------------------------------------------------------------------

def test_window_from_median_rr():
    assert beat_window([400, 800, 1200], 400) == (140, 220)
    assert beat_window([1000], 400) == (140, 220)
    assert beat_window([1000], 500) == (175, 275)


def test_segment_shapes_and_zero_fill():
    x = np.arange(1, 4097, dtype=float)[:, None] * np.ones(12)
    beats = segment_beats(x, [400, 800, 1200], sample_rate=400)
    assert beats.window == (140, 220)
    assert beats.segments.shape == (3, 361, 12) and beats.length == 361
    edge = segment_signal(x, [50], (140, 220))
    assert np.all(edge[0, :90] == 0) and edge[0, 90, 0] == 1.0


def test_segments_use_same_indices_on_all_leads():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(4096, 12))
    beats = segment_beats(x, [500, 1000, 1600], sample_rate=400)
    pre = beats.window[0]
    for i, p in enumerate(beats.r_peaks):
        np.testing.assert_array_equal(beats.segments[i, pre], x[p])


def test_segment_errors():
    with pytest.raises(ValueError):
        segment_beats(np.zeros((100, 12)), [], sample_rate=400)
    with pytest.raises(ValueError):
        segment_beats(np.zeros((100, 12)), [50, 40], sample_rate=400)


def test_periodic_segments_pairwise_equal():
    rec, truth = synth_ecg(SynthConfig(heart_rate=60, noise=0.01, seed=2))
    beats = segment_beats(rec, truth)
    inner = beats.segments[1:-1]
    spread = np.abs(inner - inner[0]).max()
    assert spread <= 2 * 0.01 + 1e-12


def test_average_identical_and_two_segment_cases():
    seg = np.random.default_rng(3).normal(size=(1, 7, 12))
    beats = segment_beats(np.zeros((10, 12)), [5], window=(2, 2))
    same = type(beats)(r_peaks=np.array([1, 2, 3]), window=(3, 3),
                       segments=np.repeat(seg, 3, axis=0))
    assert average_beats(same).tobytes() == seg[0].tobytes()
    two = type(beats)(r_peaks=np.array([1, 2]), window=(0, 1),
                      segments=np.array([[[0.0], [2.0]], [[2.0], [0.0]]]))
    np.testing.assert_array_equal(average_beats(two), [[1.0], [1.0]])


def test_average_of_noisy_beats_near_template():
    noise = 0.05
    cfg = SynthConfig(heart_rate=60, duration=30.72, noise=noise, seed=9)
    rec, truth = synth_ecg(cfg)
    assert truth.size == 30
    beats = segment_beats(rec, truth)
    pre, post = beats.window
    template = beat_template(cfg, np.arange(-pre, post + 1) / cfg.sample_rate)
    rms = np.sqrt(np.mean((average_beats(beats) - template) ** 2))
    assert rms < noise / np.sqrt(30)


def test_n_samples_constant():
    assert N_SAMPLES == 4096
