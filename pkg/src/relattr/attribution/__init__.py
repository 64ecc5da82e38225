"""Integrated Gradients and LRP attribution with completeness/conservation checks."""

from .checks import (
    CompletenessReport, ConservationReport, LayerConservation, check_completeness,
    check_conservation, completeness_tolerance, method_check,
)
from .config import RIEMANN_SCHEMES, AttributionConfig, Method, RelevanceTensor
from .ig import integrated_gradients, path_weights
from .lrp import (
    LayerRelevance, LrpResult, UnsupportedLayerError, alpha_beta_rule, epsilon_rule, lrp,
    relevance_propagation, wsquare_rule,
)


def attribute(model, x, config: AttributionConfig, recording_id=None) -> RelevanceTensor:
    """Dispatch to IG or LRP according to ``config.method``."""
    if config.method is Method.IG:
        return integrated_gradients(model, x, config, recording_id)
    return lrp(model, x, config, recording_id)


__all__ = [
    "RIEMANN_SCHEMES", "AttributionConfig", "CompletenessReport", "ConservationReport",
    "LayerConservation", "LayerRelevance", "LrpResult", "Method", "RelevanceTensor",
    "UnsupportedLayerError", "alpha_beta_rule", "attribute", "check_completeness",
    "check_conservation", "completeness_tolerance", "epsilon_rule", "integrated_gradients",
    "lrp", "method_check", "path_weights", "relevance_propagation", "wsquare_rule",
]
