"""Layer-wise relevance propagation over the layer graph.

Relevance starts at the selected class score and flows backwards layer by
layer. Conv1D and Dense layers redistribute it with the configured rule;
ReLU, Flatten and the output activation pass it through unchanged; max-pool
routes it to the winning position; residual junctions split it in
proportion to each branch's activation.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..nn import ops
from ..nn.engine import forward
from ..nn.model import (
    BATCHNORM, CONV1D, DENSE, FLATTEN, MAXPOOL1D, MODEL_INPUT, OUTPUT_ACTIVATION, RELU,
    RESIDUAL_ADD, Model, ModelValidationError,
)
from .config import AttributionConfig, Method, RelevanceTensor


class UnsupportedLayerError(ModelValidationError):
    """A layer cannot take part in relevance propagation as configured."""


@dataclass
class LayerRelevance:
    """Relevance bookkeeping for one layer.

    ``relevance_out`` is the total relevance assigned to the layer's output,
    ``relevance_in`` the total it passed to its inputs. The difference is
    the leak; ``bias_absorbed`` and ``stabilizer_absorbed`` are the shares
    taken by the bias terms and the epsilon stabilizer.
    """

    index: int
    kind: str
    rule: Optional[str]
    relevance_out: float
    relevance_in: float
    bias_absorbed: float = 0.0
    stabilizer_absorbed: float = 0.0

    @property
    def leak(self) -> float:
        return self.relevance_out - self.relevance_in


@dataclass
class LrpResult:
    relevance: RelevanceTensor
    start_layer: int
    start_relevance: float
    layers: list = field(default_factory=list)
    layer_relevance: dict = field(default_factory=dict)


def _safe_divide(num, den):
    return np.divide(num, den, out=np.zeros(np.broadcast_shapes(num.shape, den.shape)),
                     where=den != 0)


class _Affine:
    """Forward/transpose pair for a Conv1D or Dense layer without its bias."""

    def __init__(self, layer, in_length=None):
        self.kind = layer.kind
        self.kernel = layer.params["kernel"]
        bias = layer.params.get("bias")
        self.bias = np.zeros(self.kernel.shape[-1]) if bias is None else bias
        self.stride = layer.params.get("stride", 1)
        self.padding = layer.params.get("padding", "same")
        self.in_length = in_length

    def apply(self, x, kernel):
        if self.kind == CONV1D:
            return ops.conv1d(x, kernel, None, self.stride, self.padding)
        return ops.dense(x, kernel)

    def transpose(self, s, kernel):
        if self.kind == CONV1D:
            return ops.conv1d_transpose(s, kernel, self.in_length, self.stride, self.padding)
        return ops.dense_transpose(s, kernel)


def epsilon_rule(affine, x, R, epsilon):
    """Returns ``(R_in, bias_absorbed, stabilizer_absorbed)``.

    ``z = 0`` takes the non-negative branch (denominator ``z + epsilon``).
    """
    z = affine.apply(x, affine.kernel) + affine.bias
    sign = np.where(z >= 0, 1.0, -1.0)
    s = _safe_divide(R, z + epsilon * sign)
    R_in = x * affine.transpose(s, affine.kernel)
    return R_in, float(np.sum(affine.bias * s)), float(np.sum(epsilon * sign * s))


def alpha_beta_rule(affine, x, R, alpha, beta):
    """Positive and negative contributions ``x_i w_ij`` are redistributed
    separately, weighted by ``alpha`` and ``beta``. Bias parts join the
    matching denominator and keep their share."""
    W = affine.kernel
    xp, xn = np.maximum(x, 0.0), np.minimum(x, 0.0)
    Wp, Wn = np.maximum(W, 0.0), np.minimum(W, 0.0)
    bp, bn = np.maximum(affine.bias, 0.0), np.minimum(affine.bias, 0.0)
    zp = affine.apply(xp, Wp) + affine.apply(xn, Wn) + bp
    sp = _safe_divide(alpha * R, zp)
    R_in = xp * affine.transpose(sp, Wp) + xn * affine.transpose(sp, Wn)
    absorbed = float(np.sum(bp * sp))
    if beta != 0:
        zn = affine.apply(xp, Wn) + affine.apply(xn, Wp) + bn
        sn = _safe_divide(beta * R, zn)
        R_in = R_in + xp * affine.transpose(sn, Wn) + xn * affine.transpose(sn, Wp)
        absorbed += float(np.sum(bn * sn))
    return R_in, absorbed, 0.0


def wsquare_rule(affine, x, R):
    """Redistribute by squared weights; the activations are not used.

    Denominators only count connections to real inputs, so padded border
    taps of a convolution do not swallow relevance.
    """
    W2 = affine.kernel ** 2
    den = affine.apply(np.ones_like(x), W2)
    s = _safe_divide(R, den)
    return affine.transpose(s, W2), 0.0, 0.0


def _layer_rule(layer, config):
    method = config.method
    if method is Method.LRP_EPSILON:
        return "epsilon", (config.epsilon,)
    if method is Method.LRP_ALPHA_BETA:
        return "alphabeta", (config.alpha, config.beta)
    if method is Method.LRP_WSQUARE:
        return "wsquare", ()
    if method is Method.LRP_COMPOSITE:
        if layer.kind == CONV1D:
            return "alphabeta", (config.composite_alpha, config.composite_beta)
        return "epsilon", (config.composite_epsilon,)
    raise ValueError(f"{method.value} is not an LRP method")


_RULES = {"epsilon": epsilon_rule, "alphabeta": alpha_beta_rule, "wsquare": wsquare_rule}


def _residual_split(a, b, R, stabilizer):
    total = a + b
    zero = total == 0
    sign = np.where(total >= 0, 1.0, -1.0)
    frac = _safe_divide(R, total + stabilizer * sign)
    Ra = np.where(zero, 0.5 * R, a * frac)
    Rb = np.where(zero, 0.5 * R, b * frac)
    absorbed = float(np.sum(np.where(zero, 0.0, stabilizer * sign * frac)))
    return Ra, Rb, absorbed


def relevance_propagation(model: Model, x, config: AttributionConfig, recording_id=None,
                          initial_relevance: Optional[float] = None) -> LrpResult:
    """Run LRP and keep per-layer bookkeeping.

    ``initial_relevance`` replaces the class score as the starting relevance
    when given.
    """
    if not config.method.is_lrp:
        raise ValueError(f"relevance_propagation called with method {config.method.value}")
    for i, layer in enumerate(model.layers):
        if layer.kind == BATCHNORM:
            raise UnsupportedLayerError(
                "unfolded BatchNorm encountered; apply fold_batchnorm first", i)
    c = config.class_index
    if not 0 <= c < model.output_dim:
        raise IndexError(f"class index {c} out of range for {model.output_dim} outputs")
    trace = forward(model, x)
    last = len(model.layers) - 1
    if config.output_mode == "linear":
        start, value = model.score_layer, trace.linear[c]
    else:
        start = last if model.layers[last].kind == OUTPUT_ACTIVATION else model.score_layer
        value = trace.probability[c]
    if initial_relevance is not None:
        value = float(initial_relevance)
    seed = np.zeros((1, model.output_dim))
    seed[0, c] = value

    def act(ref):
        return (trace.input if ref == MODEL_INPUT else trace.outputs[ref])[None]

    residual_eps = config.epsilon if config.method is Method.LRP_EPSILON else 0.0
    acc = {start: seed}
    rows = []
    kept = {}
    for i in range(start, -1, -1):
        R = acc.pop(i, None)
        if R is None:
            continue
        kept[i] = R[0]
        layer = model.layers[i]
        refs = layer.inputs
        x_in = act(refs[0])
        rule, bias_abs, stab_abs = None, 0.0, 0.0
        kind = layer.kind
        if kind in (CONV1D, DENSE):
            rule, args = _layer_rule(layer, config)
            affine = _Affine(layer, x_in.shape[1] if kind == CONV1D else None)
            R_in, bias_abs, stab_abs = _RULES[rule](affine, x_in, R, *args)
            outs = [R_in]
        elif kind in (RELU, OUTPUT_ACTIVATION):
            outs = [R]
        elif kind == FLATTEN:
            outs = [R.reshape(x_in.shape)]
        elif kind == MAXPOOL1D:
            p = layer.params
            _, idx = ops.maxpool1d(x_in, p["pool_size"], p["stride"])
            outs = [ops.maxpool1d_transpose(R, idx, x_in.shape[1], p["pool_size"], p["stride"])]
        elif kind == RESIDUAL_ADD:
            Ra, Rb, stab_abs = _residual_split(x_in, act(refs[1]), R, residual_eps)
            outs = [Ra, Rb]
        else:
            raise UnsupportedLayerError(f"layer kind {kind} is not supported by LRP", i)
        rows.append(LayerRelevance(
            index=i, kind=kind, rule=rule, relevance_out=float(R.sum()),
            relevance_in=float(sum(o.sum() for o in outs)),
            bias_absorbed=bias_abs, stabilizer_absorbed=stab_abs))
        for ref, Ri in zip(refs, outs):
            acc[ref] = acc[ref] + Ri if ref in acc else Ri
    values = acc.get(MODEL_INPUT)
    values = np.zeros(model.input_shape) if values is None else values[0]
    rel = RelevanceTensor(values=values, method=config.method, class_index=c,
                          recording_id=recording_id, config=config.snapshot())
    return LrpResult(relevance=rel, start_layer=start, start_relevance=float(value),
                     layers=rows, layer_relevance=kept)


def lrp(model: Model, x, config: AttributionConfig, recording_id=None,
        initial_relevance: Optional[float] = None) -> RelevanceTensor:
    """Relevance of each input sample under the configured LRP rule.

    The model must have its batch normalization folded
    (:func:`relattr.nn.fold_batchnorm`).
    """
    return relevance_propagation(model, x, config, recording_id, initial_relevance).relevance
