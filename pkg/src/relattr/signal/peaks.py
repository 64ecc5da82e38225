"""R-peak detection with an energy-envelope adaptive threshold.

Band-pass filtering, differentiation, squaring and moving-window
integration produce an envelope whose local maxima are classified as QRS
or noise by running signal/noise level estimates, with a refractory period
and a search-back for missed beats.
"""

import numpy as np
from scipy.signal import butter, find_peaks, sosfiltfilt

from .ecg import EcgRecording, lead_index

DEFAULT_LEAD = "II"
REFRACTORY_S = 0.2
INTEGRATION_S = 0.15
BAND_HZ = (5.0, 15.0)
SEARCHBACK_RR = 1.66
REFINE_S = 0.075
BASELINE_S = 0.25


class NoPeaksError(ValueError):
    """No R-peak could be found (flat or degenerate signal)."""


def qrs_envelope(signal, sample_rate):
    """Integrated squared slope of the band-passed signal."""
    x = np.asarray(signal, dtype=np.float64)
    nyq = 0.5 * sample_rate
    sos = butter(2, [BAND_HZ[0] / nyq, min(BAND_HZ[1] / nyq, 0.99)], btype="band",
                 output="sos")
    filtered = sosfiltfilt(sos, x - np.median(x))
    # five-point derivative
    slope = np.convolve(filtered, np.array([1.0, 2.0, 0.0, -2.0, -1.0]) * sample_rate / 8.0,
                        mode="same")
    width = max(1, int(round(INTEGRATION_S * sample_rate)))
    return np.convolve(slope ** 2, np.ones(width) / width, mode="same")


def _classify(env, candidates, sample_rate):
    """Running-threshold pass over envelope maxima; returns accepted positions."""
    heights = env[candidates]
    spki = 0.25 * heights.max()
    npki = 0.5 * float(np.mean(env))
    accepted = []
    rr = []
    i = 0
    while i < len(candidates):
        pos, h = candidates[i], heights[i]
        thr1 = npki + 0.25 * (spki - npki)
        if h > thr1:
            accepted.append(pos)
            spki = 0.125 * h + 0.875 * spki
            if len(accepted) > 1:
                rr.append(accepted[-1] - accepted[-2])
        else:
            npki = 0.125 * h + 0.875 * npki
        # look back for a missed beat when the gap grows too long
        if rr and i + 1 < len(candidates):
            gap_limit = SEARCHBACK_RR * np.mean(rr[-8:])
            nxt = candidates[i + 1]
            if accepted and nxt - accepted[-1] > gap_limit:
                thr2 = 0.5 * (npki + 0.25 * (spki - npki))
                between = [j for j in range(i + 1, len(candidates))
                           if candidates[j] - accepted[-1] <= gap_limit
                           and heights[j] > thr2]
                if between:
                    j = max(between, key=lambda k: heights[k])
                    accepted.append(candidates[j])
                    spki = 0.25 * heights[j] + 0.75 * spki
                    rr.append(accepted[-1] - accepted[-2])
                    i = j
        i += 1
    return np.array(accepted, dtype=int)


def detect_r_peaks(recording, lead=DEFAULT_LEAD, sample_rate=None) -> np.ndarray:
    """Sample indices of R-peaks, strictly increasing.

    Parameters
    ----------
    recording : EcgRecording or array
        A recording, or a 1-D lead signal (then ``sample_rate`` is required).
    lead : str or int
        Detection lead, lead II by default.

    Raises
    ------
    NoPeaksError
        If the envelope is flat or no candidate passes the threshold.
    """
    if isinstance(recording, EcgRecording):
        x = recording.lead(lead)
        fs = recording.sample_rate
    else:
        x = np.asarray(recording, dtype=np.float64)
        if x.ndim == 2:
            x = x[:, lead_index(lead)]
        if sample_rate is None:
            raise ValueError("sample_rate is required for raw arrays")
        fs = float(sample_rate)
    if x.size < 2 * fs:
        raise ValueError(f"need at least 2 s of signal, got {x.size / fs:.2f} s")
    env = qrs_envelope(x, fs)
    peak = env.max()
    if not np.isfinite(peak) or peak <= 1e-12 * max(1.0, float(np.abs(x).max())) ** 2:
        raise NoPeaksError("signal is flat; no R-peaks found")
    refractory = max(1, int(round(REFRACTORY_S * fs)))
    candidates, _ = find_peaks(env, distance=refractory)
    if candidates.size == 0:
        raise NoPeaksError("no envelope maxima found")
    qrs = _classify(env, candidates, fs)
    if qrs.size == 0:
        raise NoPeaksError("no envelope maximum passed the QRS threshold")
    return refine_peaks(x, qrs, fs)


def refine_peaks(signal, positions, sample_rate):
    """Move each position to the largest deviation from the local baseline.

    The search spans 75 ms either side; the baseline is the median over a
    wider 250 ms neighbourhood so a wide QRS does not shift it.
    """
    x = np.asarray(signal, dtype=np.float64)
    half = max(1, int(round(REFINE_S * sample_rate)))
    wide = max(half, int(round(BASELINE_S * sample_rate)))
    refined = []
    for p in positions:
        lo, hi = max(0, p - half), min(x.size, p + half + 1)
        base = np.median(x[max(0, p - wide) : min(x.size, p + wide + 1)])
        refined.append(lo + int(np.argmax(np.abs(x[lo:hi] - base))))
    refined = np.unique(np.array(refined, dtype=int))
    # two envelope maxima may land on the same complex
    refractory = int(round(REFRACTORY_S * sample_rate))
    keep = [refined[0]]
    for p in refined[1:]:
        if p - keep[-1] >= refractory:
            keep.append(p)
        elif abs(x[p]) > abs(x[keep[-1]]):
            keep[-1] = p
    return np.array(keep, dtype=int)
