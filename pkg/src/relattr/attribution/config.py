"""Attribution method selection, hyperparameters and the relevance container."""

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np


class Method(str, Enum):
    IG = "IG"
    LRP_EPSILON = "LRP-epsilon"
    LRP_ALPHA_BETA = "LRP-alphabeta"
    LRP_WSQUARE = "LRP-wsquare"
    LRP_COMPOSITE = "LRP-composite"

    @property
    def is_lrp(self) -> bool:
        return self is not Method.IG

    @property
    def short_code(self) -> str:
        return _SHORT_CODES[self]

    @classmethod
    def parse(cls, text) -> "Method":
        """Accept the canonical tag, a CLI spelling, or a legend code."""
        if isinstance(text, Method):
            return text
        key = str(text).strip().lower()
        for method in cls:
            if key == method.value.lower():
                return method
        try:
            return _ALIASES[key]
        except KeyError:
            raise ValueError(f"unknown attribution method {text!r}") from None


_SHORT_CODES = {
    Method.IG: "IGR",
    Method.LRP_EPSILON: "EPS",
    Method.LRP_ALPHA_BETA: "AB0",
    Method.LRP_WSQUARE: "WSQ",
    Method.LRP_COMPOSITE: "PSA",
}

_ALIASES = {
    "ig": Method.IG, "igr": Method.IG, "integrated-gradients": Method.IG,
    "lrp-eps": Method.LRP_EPSILON, "eps": Method.LRP_EPSILON,
    "lrp-ab": Method.LRP_ALPHA_BETA, "ab0": Method.LRP_ALPHA_BETA,
    "lrp-w2": Method.LRP_WSQUARE, "wsq": Method.LRP_WSQUARE,
    "psa": Method.LRP_COMPOSITE, "lrp-preset-a": Method.LRP_COMPOSITE,
}

RIEMANN_SCHEMES = ("right", "trapezoid")


@dataclass(frozen=True)
class AttributionConfig:
    """Method selector and hyperparameters.

    ``baseline`` of ``None`` means the all-zeros input. The composite preset
    applies the alpha-beta rule with ``composite_alpha``/``composite_beta``
    to Conv1D layers and the epsilon rule with ``composite_epsilon`` to
    Dense layers.
    """

    method: Method = Method.IG
    class_index: int = 0
    baseline: Optional[np.ndarray] = None
    steps: int = 64
    riemann: str = "right"
    epsilon: float = 1e-7
    alpha: float = 1.0
    beta: float = 0.0
    composite_alpha: float = 1.0
    composite_beta: float = 0.0
    composite_epsilon: float = 0.1
    output_mode: str = "linear"
    batch_size: int = 8

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        if self.baseline is not None:
            base = np.array(self.baseline, dtype=np.float64)
            base.setflags(write=False)
            object.__setattr__(self, "baseline", base)
        if not isinstance(self.steps, (int, np.integer)) or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps!r}")
        if self.riemann not in RIEMANN_SCHEMES:
            raise ValueError(f"riemann must be one of {RIEMANN_SCHEMES}")
        if self.epsilon < 0 or self.composite_epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.alpha + self.beta != 1.0:
            raise ValueError(f"alpha + beta must equal 1, got {self.alpha} + {self.beta}")
        if self.composite_alpha + self.composite_beta != 1.0:
            raise ValueError("composite_alpha + composite_beta must equal 1")
        if self.output_mode not in ("linear", "sigmoid"):
            raise ValueError(f"unknown output mode {self.output_mode!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")

    def baseline_for(self, shape) -> np.ndarray:
        if self.baseline is None:
            return np.zeros(shape)
        if self.baseline.shape != tuple(shape):
            raise ValueError(f"baseline shape {self.baseline.shape} does not match "
                             f"input shape {tuple(shape)}")
        return self.baseline

    def snapshot(self) -> dict:
        """JSON-serializable description of the settings that shaped a result."""
        snap = {"method": self.method.value, "class_index": int(self.class_index),
                "output_mode": self.output_mode}
        if self.method is Method.IG:
            if self.baseline is None:
                snap["baseline"] = "zeros"
            else:
                digest = hashlib.sha256(np.ascontiguousarray(self.baseline).tobytes())
                snap["baseline"] = "sha256:" + digest.hexdigest()
            snap.update(steps=int(self.steps), riemann=self.riemann)
        elif self.method is Method.LRP_EPSILON:
            snap["epsilon"] = self.epsilon
        elif self.method is Method.LRP_ALPHA_BETA:
            snap.update(alpha=self.alpha, beta=self.beta)
        elif self.method is Method.LRP_COMPOSITE:
            snap.update(conv_alpha=self.composite_alpha, conv_beta=self.composite_beta,
                        dense_epsilon=self.composite_epsilon)
        return snap


@dataclass
class RelevanceTensor:
    """Signed relevance per input sample, tagged with how it was produced."""

    values: np.ndarray
    method: Method
    class_index: int
    recording_id: Optional[str] = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.method = Method.parse(self.method)
        self.class_index = int(self.class_index)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("relevance contains non-finite values")

    @property
    def shape(self):
        return self.values.shape

    def total(self) -> float:
        return float(self.values.sum())
