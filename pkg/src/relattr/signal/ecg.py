"""The 12-lead recording container."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

LEAD_NAMES = ("I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6")
N_LEADS = len(LEAD_NAMES)
SAMPLE_RATE = 400.0
N_SAMPLES = 4096
LABELS = ("Normal", "AF", "LBBB")


def lead_index(lead) -> int:
    """Position of a lead given by name (case-insensitive) or integer index."""
    if isinstance(lead, (int, np.integer)):
        if not 0 <= lead < N_LEADS:
            raise ValueError(f"lead index {lead} out of range")
        return int(lead)
    key = str(lead).strip().lower()
    for i, name in enumerate(LEAD_NAMES):
        if name.lower() == key:
            return i
    raise ValueError(f"unknown lead {lead!r}; expected one of {', '.join(LEAD_NAMES)}")


@dataclass
class EcgRecording:
    """One recording, ``samples`` shaped ``(n_samples, 12)`` in millivolts.

    ``label`` is the ground-truth class (one of :data:`LABELS`) or ``None``
    when unknown.
    """

    id: str
    samples: np.ndarray
    sample_rate: float = SAMPLE_RATE
    label: Optional[str] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[1] != N_LEADS:
            raise ValueError(f"recording {self.id}: expected (samples, {N_LEADS}) array, "
                             f"got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError(f"recording {self.id}: non-finite sample values")
        if self.sample_rate <= 0:
            raise ValueError(f"recording {self.id}: sample rate must be positive")
        if self.label is not None and self.label not in LABELS:
            raise ValueError(f"recording {self.id}: unknown label {self.label!r}")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    def lead(self, lead) -> np.ndarray:
        return self.samples[:, lead_index(lead)]
