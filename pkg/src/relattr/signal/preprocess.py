"""Resampling and length fitting."""

import numpy as np

from .ecg import N_SAMPLES, SAMPLE_RATE, EcgRecording


def resampled_length(n, from_rate, to_rate) -> int:
    """``round(n * to / from)`` with halves rounded up."""
    return int(np.floor(n * to_rate / from_rate + 0.5))


def resample(signal, from_rate, to_rate):
    """Linear-interpolation resampling along the first axis.

    Output sample ``i`` sits at time ``i / to_rate``; times past the last
    input sample hold its value.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("cannot resample an empty signal")
    if from_rate <= 0 or to_rate <= 0:
        raise ValueError("sample rates must be positive")
    if from_rate == to_rate:
        return x.copy()
    n_out = resampled_length(x.shape[0], from_rate, to_rate)
    return resample_to_length(x, n_out, scale=from_rate / to_rate)


def resample_to_length(signal, n_out, scale=None):
    """Linearly interpolate ``signal`` onto ``n_out`` points.

    By default endpoints are aligned; ``scale`` sets the input-sample step
    per output sample instead.
    """
    x = np.asarray(signal, dtype=np.float64)
    n = x.shape[0]
    if n_out == n and scale is None:
        return x.copy()
    if scale is None:
        scale = (n - 1) / (n_out - 1) if n_out > 1 else 0.0
    pos = np.minimum(np.arange(n_out) * scale, n - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n - 1)
    frac = pos - lo
    if x.ndim > 1:
        frac = frac.reshape((-1,) + (1,) * (x.ndim - 1))
    return x[lo] * (1.0 - frac) + x[hi] * frac


def fit_length(signal, target=N_SAMPLES):
    """Trim or zero-pad along the first axis to exactly ``target`` samples.

    The cut or padding is split between start and end, the odd sample
    going to the end.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("cannot fit an empty signal")
    n = x.shape[0]
    if n == target:
        return x.copy()
    if n > target:
        front = (n - target) // 2
        return x[front : front + target].copy()
    front = (target - n) // 2
    pad = [(front, target - n - front)] + [(0, 0)] * (x.ndim - 1)
    return np.pad(x, pad)


def preprocess(recording: EcgRecording, sample_rate=SAMPLE_RATE, n_samples=N_SAMPLES):
    """Resample to ``sample_rate`` and fit to ``n_samples``."""
    samples = recording.samples
    if recording.sample_rate != sample_rate:
        samples = resample(samples, recording.sample_rate, sample_rate)
    if samples.shape[0] != n_samples:
        samples = fit_length(samples, n_samples)
    if samples is recording.samples:
        return recording
    return EcgRecording(id=recording.id, samples=samples, sample_rate=sample_rate,
                        label=recording.label)
