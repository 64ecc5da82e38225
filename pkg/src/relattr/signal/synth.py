"""Synthetic 12-lead ECG built from Gaussian P, Q, R, S and T bumps.

Each beat is a sum of five Gaussians placed relative to the R time. A
per-lead table scales every wave so leads differ in morphology (aVR is
inverted, V1 has a small R and a deep S). Two abnormal modes are provided:
``"af"`` drops the P wave and jitters RR intervals, ``"lbbb"`` widens the
QRS and inverts the T wave.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .ecg import LEAD_NAMES, N_LEADS, SAMPLE_RATE, EcgRecording

WAVES = ("P", "Q", "R", "S", "T")

# (amplitude mV, width s, offset from R s) on lead II
DEFAULT_WAVES = {
    "P": (0.15, 0.025, -0.20),
    "Q": (-0.10, 0.010, -0.030),
    "R": (1.00, 0.012, 0.0),
    "S": (-0.25, 0.010, 0.030),
    "T": (0.30, 0.060, 0.30),
}

# per-lead multipliers for (P, Q, R, S, T)
LEAD_SCALES = np.array([
    [0.6, 0.5, 0.6, 0.4, 0.6],     # I
    [1.0, 1.0, 1.0, 1.0, 1.0],     # II
    [0.4, 0.5, 0.4, 0.6, 0.4],     # III
    [-0.8, -0.3, -0.8, -0.3, -0.8],  # aVR
    [0.2, 0.3, 0.2, 0.3, 0.2],     # aVL
    [0.7, 0.7, 0.7, 0.7, 0.7],     # aVF
    [0.5, 0.0, 0.3, 3.0, -0.3],    # V1
    [0.5, 0.0, 0.6, 3.0, 0.8],     # V2
    [0.5, 0.2, 0.9, 2.0, 1.0],     # V3
    [0.5, 0.5, 1.3, 1.2, 1.0],     # V4
    [0.5, 0.8, 1.2, 0.6, 0.8],     # V5
    [0.5, 0.8, 1.0, 0.3, 0.7],     # V6
])

MODES = ("normal", "af", "lbbb")
MODE_LABELS = {"normal": "Normal", "af": "AF", "lbbb": "LBBB"}
LBBB_QRS_WIDENING = 2.5


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings.

    ``waves`` maps each of P, Q, R, S, T to ``(amplitude, width, offset)``.
    ``noise`` is the half-width of uniform additive noise, so every sample
    deviates from the clean signal by at most ``noise``. ``rr_jitter`` is
    the relative RR spread used in AF mode. ``r_peaks`` places R times at
    explicit sample indices instead of the regular rhythm.
    """

    heart_rate: float = 60.0
    duration: float = 10.24
    sample_rate: float = SAMPLE_RATE
    waves: dict = field(default_factory=lambda: dict(DEFAULT_WAVES))
    noise: float = 0.0
    mode: str = "normal"
    rr_jitter: float = 0.2
    seed: int = 0
    r_peaks: Optional[tuple] = None
    n_samples: Optional[int] = None

    def __post_init__(self):
        if self.heart_rate <= 0 or self.duration <= 0 or self.sample_rate <= 0:
            raise ValueError("heart rate, duration and sample rate must be positive")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 <= self.rr_jitter < 1:
            raise ValueError("rr_jitter must be in [0, 1)")
        missing = set(WAVES) - set(self.waves)
        if missing:
            raise ValueError(f"missing wave parameters for {sorted(missing)}")
        for name in WAVES:
            amp, width, _ = self.waves[name]
            if width <= 0:
                raise ValueError(f"wave {name} width must be positive")

    @property
    def rr(self) -> float:
        return 60.0 / self.heart_rate

    @property
    def length(self) -> int:
        if self.n_samples is not None:
            return int(self.n_samples)
        return int(round(self.duration * self.sample_rate))

    @property
    def label(self) -> str:
        return MODE_LABELS[self.mode]


def effective_waves(config: SynthConfig) -> dict:
    """Wave parameters after applying the mode."""
    waves = {k: tuple(v) for k, v in config.waves.items()}
    if config.mode == "af":
        amp, width, offset = waves["P"]
        waves["P"] = (0.0, width, offset)
    elif config.mode == "lbbb":
        for name in ("Q", "R", "S"):
            amp, width, offset = waves[name]
            waves[name] = (amp, width * LBBB_QRS_WIDENING, offset * LBBB_QRS_WIDENING)
        amp, width, offset = waves["T"]
        waves["T"] = (-amp, width, offset)
    return waves


def r_times(config: SynthConfig, rng=None) -> np.ndarray:
    """R times in seconds.

    Regular rhythm: ``(k + 1/2) * RR`` for ``k < floor(duration / RR)``.
    AF: successive intervals ``RR * (1 + jitter * u)``, ``u ~ U(-1, 1)``,
    starting at ``RR / 2`` and stopping half an interval before the end.
    """
    if config.r_peaks is not None:
        return np.asarray(config.r_peaks, dtype=np.float64) / config.sample_rate
    rr = config.rr
    if config.mode != "af":
        return (np.arange(int(np.floor(config.duration / rr + 1e-9))) + 0.5) * rr
    rng = np.random.default_rng(config.seed) if rng is None else rng
    times = []
    t = 0.5 * rr
    while t <= config.duration - 0.5 * rr:
        times.append(t)
        t += rr * (1.0 + config.rr_jitter * rng.uniform(-1.0, 1.0))
    return np.array(times)


def beat_template(config: SynthConfig, offsets) -> np.ndarray:
    """Clean single-beat waveform at ``offsets`` (seconds from R), ``(n, 12)``."""
    t = np.asarray(offsets, dtype=np.float64)
    waves = effective_waves(config)
    out = np.zeros((t.size, N_LEADS))
    for w, name in enumerate(WAVES):
        amp, width, offset = waves[name]
        if amp == 0.0:
            continue
        bump = amp * np.exp(-0.5 * ((t - offset) / width) ** 2)
        out += bump[:, None] * LEAD_SCALES[:, w][None, :]
    return out


def synth_ecg(config: SynthConfig = SynthConfig(), id: Optional[str] = None):
    """Generate one recording.

    Returns
    -------
    recording : EcgRecording
    r_peaks : ndarray of int
        Ground-truth R-peak sample indices.
    """
    rng = np.random.default_rng(config.seed)
    n = config.length
    fs = config.sample_rate
    times = r_times(config, rng)
    t = np.arange(n) / fs
    clean = np.zeros((n, N_LEADS))
    # each beat only touches samples within a few widths of its waves
    reach = max(abs(o) + 5 * w for _, w, o in effective_waves(config).values())
    for rt in times:
        lo = max(0, int(np.floor((rt - reach) * fs)))
        hi = min(n, int(np.ceil((rt + reach) * fs)) + 1)
        if lo < hi:
            clean[lo:hi] += beat_template(config, t[lo:hi] - rt)
    if config.noise > 0:
        clean += rng.uniform(-config.noise, config.noise, size=clean.shape)
    peaks = np.round(times * fs).astype(int)
    peaks = peaks[(peaks >= 0) & (peaks < n)]
    rid = id if id is not None else f"synth-{config.mode}-{config.seed}"
    rec = EcgRecording(id=rid, samples=clean, sample_rate=fs, label=config.label)
    return rec, peaks


def with_mode(config: SynthConfig, mode: str, **changes) -> SynthConfig:
    return replace(config, mode=mode, **changes)


__all__ = ["DEFAULT_WAVES", "LEAD_NAMES", "LEAD_SCALES", "MODES", "SynthConfig",
           "beat_template", "effective_waves", "r_times", "synth_ecg", "with_mode"]
