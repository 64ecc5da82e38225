"""Completeness checks for IG and conservation checks for LRP."""

import math
from dataclasses import dataclass, field

import numpy as np

from ..nn import forward
from .config import AttributionConfig, Method

# relative-gap tolerance at m = 64; tightens by 10x per 16x more steps
BASE_TOLERANCE = 1e-2
BASE_STEPS = 64
_DECAY = math.log(10.0) / math.log(16.0)


def completeness_tolerance(steps: int) -> float:
    """Relative-gap tolerance for an ``steps``-interval Riemann sum.

    ``1e-2`` at 64 steps and ``1e-3`` at 1024, interpolated as a power law.
    """
    return BASE_TOLERANCE * (BASE_STEPS / steps) ** _DECAY


@dataclass
class CompletenessReport:
    relevance_sum: float
    score_difference: float
    absolute_gap: float
    relative_gap: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.relative_gap < self.tolerance

    def as_dict(self) -> dict:
        return {"relevance_sum": self.relevance_sum, "score_difference": self.score_difference,
                "absolute_gap": self.absolute_gap, "relative_gap": self.relative_gap,
                "tolerance": self.tolerance, "passed": self.passed}


def check_completeness(model, x, relevance, config: AttributionConfig,
                       tolerance=None) -> CompletenessReport:
    """Compare the relevance total with ``f(x) - f(baseline)``.

    The relative gap divides by ``max(1, |f(x) - f(baseline)|)``. Without an
    explicit ``tolerance`` the step-dependent schedule is used.
    """
    x = np.asarray(x, dtype=np.float64)
    baseline = config.baseline_for(x.shape)
    c = config.class_index
    diff = (forward(model, x).score(c, config.output_mode)
            - forward(model, baseline).score(c, config.output_mode))
    values = relevance.values if hasattr(relevance, "values") else np.asarray(relevance)
    total = float(np.sum(values))
    gap = abs(total - diff)
    tol = completeness_tolerance(config.steps) if tolerance is None else float(tolerance)
    return CompletenessReport(relevance_sum=total, score_difference=float(diff),
                              absolute_gap=gap, relative_gap=gap / max(1.0, abs(diff)),
                              tolerance=tol)


@dataclass
class LayerConservation:
    index: int
    kind: str
    relevance_out: float
    relevance_in: float
    bias_absorbed: float
    stabilizer_absorbed: float
    relative_error: float

    @property
    def leak(self) -> float:
        return self.relevance_out - self.relevance_in


@dataclass
class ConservationReport:
    """Per-layer relevance totals along an LRP pass.

    ``relative_error`` of a layer is ``|out - in| / max(|f(x)|, tiny)`` where
    ``f(x)`` is the starting relevance. ``bias_leak`` and ``stabilizer_leak``
    total the shares absorbed by biases and epsilon stabilizers.
    """

    start_relevance: float
    input_relevance: float
    layers: list = field(default_factory=list)
    tolerance: float = 1e-9

    @property
    def total_leak(self) -> float:
        return self.start_relevance - self.input_relevance

    @property
    def bias_leak(self) -> float:
        return sum(row.bias_absorbed for row in self.layers)

    @property
    def stabilizer_leak(self) -> float:
        return sum(row.stabilizer_absorbed for row in self.layers)

    @property
    def max_relative_error(self) -> float:
        return max((row.relative_error for row in self.layers), default=0.0)

    @property
    def conserved(self) -> bool:
        return self.max_relative_error < self.tolerance

    @property
    def unaccounted(self) -> float:
        """Relative leak not explained by bias and stabilizer shares."""
        scale = max(abs(self.start_relevance), np.finfo(float).tiny)
        return abs(self.total_leak - self.bias_leak - self.stabilizer_leak) / scale

    @property
    def accounted(self) -> bool:
        return self.unaccounted < self.tolerance

    def as_dict(self) -> dict:
        return {"start_relevance": self.start_relevance,
                "input_relevance": self.input_relevance,
                "total_leak": self.total_leak, "bias_leak": self.bias_leak,
                "stabilizer_leak": self.stabilizer_leak,
                "max_relative_error": self.max_relative_error, "conserved": self.conserved,
                "unaccounted": self.unaccounted, "accounted": self.accounted}


def check_conservation(result, tolerance: float = 1e-9) -> ConservationReport:
    """Build a conservation report from an :class:`LrpResult`."""
    scale = max(abs(result.start_relevance), np.finfo(float).tiny)
    rows = [LayerConservation(index=r.index, kind=r.kind, relevance_out=r.relevance_out,
                              relevance_in=r.relevance_in, bias_absorbed=r.bias_absorbed,
                              stabilizer_absorbed=r.stabilizer_absorbed,
                              relative_error=abs(r.leak) / scale)
            for r in result.layers]
    return ConservationReport(start_relevance=result.start_relevance,
                              input_relevance=result.relevance.total(), layers=rows,
                              tolerance=tolerance)


def method_check(model, x, config, outcome) -> dict:
    """Completeness report for IG, conservation report for LRP, as a dict."""
    if config.method is Method.IG:
        return check_completeness(model, x, outcome, config).as_dict()
    return check_conservation(outcome).as_dict()
