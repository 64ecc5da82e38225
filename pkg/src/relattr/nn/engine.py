"""Forward inference, reverse-mode input gradients and batch-norm folding."""

from dataclasses import dataclass

import numpy as np

from . import ops
from .model import (
    BATCHNORM, CONV1D, DENSE, FLATTEN, MAXPOOL1D, MODEL_INPUT, OUTPUT_ACTIVATION,
    RELU, RESIDUAL_ADD, Layer, Model, ModelValidationError,
)

OUTPUT_MODES = ("linear", "sigmoid")


@dataclass
class ForwardTrace:
    """Per-layer outputs of a single forward pass.

    ``outputs[i]`` is the output of ``model.layers[i]``. ``linear`` holds
    the pre-activation class scores and ``probability`` their sigmoid.
    """

    input: np.ndarray
    outputs: list
    linear: np.ndarray
    probability: np.ndarray
    score_layer: int

    def __len__(self):
        return len(self.outputs)

    def layer_input(self, model, index, position=0):
        ref = model.layers[index].inputs[position]
        return self.input if ref == MODEL_INPUT else self.outputs[ref]

    def score(self, class_index, output_mode="linear"):
        if output_mode == "linear":
            return float(self.linear[class_index])
        if output_mode == "sigmoid":
            return float(self.probability[class_index])
        raise ValueError(f"unknown output mode {output_mode!r}")


def _as_input(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != model.input_shape:
        raise ValueError(f"input shape {x.shape} does not match model input "
                         f"shape {model.input_shape}")
    return x


def _run(model, batch, keep=None):
    """Run the graph on a batch. Returns per-layer outputs and pooling indices.

    With ``keep`` set to the score layer index, layers after it are skipped.
    """
    outs = [None] * len(model.layers)
    pool_idx = {}
    stop = len(model.layers) if keep is None else keep + 1
    for i in range(stop):
        layer = model.layers[i]
        p = layer.params
        xs = [batch if r == MODEL_INPUT else outs[r] for r in layer.inputs]
        x = xs[0]
        kind = layer.kind
        if kind == CONV1D:
            y = ops.conv1d(x, p["kernel"], p.get("bias"), p["stride"], p["padding"])
        elif kind == DENSE:
            y = ops.dense(x, p["kernel"], p.get("bias"))
        elif kind == BATCHNORM:
            y = ops.batchnorm(x, p["gamma"], p["beta"], p["mean"], p["variance"], p["epsilon"])
        elif kind == RELU:
            y = np.maximum(x, 0.0)
        elif kind == MAXPOOL1D:
            y, pool_idx[i] = ops.maxpool1d(x, p["pool_size"], p["stride"])
        elif kind == RESIDUAL_ADD:
            y = xs[0] + xs[1]
        elif kind == FLATTEN:
            y = x.reshape(x.shape[0], -1)
        elif kind == OUTPUT_ACTIVATION:
            y = ops.sigmoid(x) if p["activation"] == "sigmoid" else x.copy()
        else:  # pragma: no cover - rejected by validation
            raise ModelValidationError(f"unsupported layer kind {kind!r}", i)
        outs[i] = y
    return outs, pool_idx


def forward(model: Model, x) -> ForwardTrace:
    """Run ``model`` on one input and keep every layer's output."""
    x = _as_input(model, x)
    outs, _ = _run(model, x[None])
    outputs = [o[0] for o in outs]
    linear = outputs[model.score_layer].copy()
    return ForwardTrace(input=x, outputs=outputs, linear=linear,
                        probability=ops.sigmoid(linear), score_layer=model.score_layer)


def predict(model: Model, batch, output_mode="linear") -> np.ndarray:
    """Class scores for a batch of inputs, shape ``(batch, output_dim)``."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.shape[1:] != model.input_shape:
        raise ValueError(f"batch shape {batch.shape} does not match model input "
                         f"shape {model.input_shape}")
    outs, _ = _run(model, batch, keep=model.score_layer)
    scores = outs[model.score_layer]
    return scores if output_mode == "linear" else ops.sigmoid(scores)


def backward(model, batch, outs, pool_idx, seed, start):
    """Vector-Jacobian product from layer ``start`` back to the input.

    ``seed`` is the cotangent of ``outs[start]``.
    """
    grads = {start: seed}
    for i in range(start, -1, -1):
        g = grads.pop(i, None)
        if g is None:
            continue
        layer = model.layers[i]
        p = layer.params
        kind = layer.kind
        refs = layer.inputs
        x = batch if refs[0] == MODEL_INPUT else outs[refs[0]]
        if kind == CONV1D:
            gs = [ops.conv1d_transpose(g, p["kernel"], x.shape[1], p["stride"], p["padding"])]
        elif kind == DENSE:
            gs = [ops.dense_transpose(g, p["kernel"])]
        elif kind == BATCHNORM:
            gs = [g * ops.batchnorm_scale(p["gamma"], p["variance"], p["epsilon"])]
        elif kind == RELU:
            gs = [np.where(outs[i] > 0, g, 0.0)]
        elif kind == MAXPOOL1D:
            gs = [ops.maxpool1d_transpose(g, pool_idx[i], x.shape[1],
                                          p["pool_size"], p["stride"])]
        elif kind == RESIDUAL_ADD:
            gs = [g, g]
        elif kind == FLATTEN:
            gs = [g.reshape(x.shape)]
        elif kind == OUTPUT_ACTIVATION:
            if p["activation"] == "sigmoid":
                s = outs[i]
                gs = [g * s * (1.0 - s)]
            else:
                gs = [g]
        for ref, gi in zip(refs, gs):
            if ref in grads:
                grads[ref] = grads[ref] + gi
            else:
                grads[ref] = gi
    dx = grads.get(MODEL_INPUT)
    return np.zeros_like(batch) if dx is None else np.ascontiguousarray(dx)


def batch_gradient(model: Model, batch, class_index, output_mode="linear") -> np.ndarray:
    """Gradient of one class score for every input in ``batch``."""
    if not 0 <= class_index < model.output_dim:
        raise IndexError(f"class index {class_index} out of range for "
                         f"{model.output_dim} outputs")
    if output_mode not in OUTPUT_MODES:
        raise ValueError(f"unknown output mode {output_mode!r}")
    start = model.score_layer
    outs, pool_idx = _run(model, batch, keep=start)
    seed = np.zeros_like(outs[start])
    if output_mode == "linear":
        seed[:, class_index] = 1.0
    else:
        s = ops.sigmoid(outs[start][:, class_index])
        seed[:, class_index] = s * (1.0 - s)
    return backward(model, batch, outs, pool_idx, seed, start)


def gradient(model: Model, x, class_index: int, output_mode="linear") -> np.ndarray:
    """d f_c / d x at ``x``; ``f`` is the linear score unless ``output_mode="sigmoid"``."""
    x = _as_input(model, x)
    return batch_gradient(model, x[None], class_index, output_mode)[0]


def fold_batchnorm(model: Model) -> Model:
    """Fold every BatchNorm into the Conv1D/Dense layer feeding it.

    Raises
    ------
    ModelValidationError
        If a BatchNorm is not fed by a Conv1D or Dense layer, or that layer's
        output is also consumed elsewhere.
    """
    layers = list(model.layers)
    consumers = [0] * len(layers)
    for layer in layers:
        for ref in layer.inputs:
            if ref >= 0:
                consumers[ref] += 1

    replaced = {}
    for i, layer in enumerate(layers):
        if layer.kind != BATCHNORM:
            continue
        ref = layer.inputs[0]
        if ref == MODEL_INPUT or layers[ref].kind not in (CONV1D, DENSE):
            raise ModelValidationError(
                "BatchNorm is not preceded by a Conv1D or Dense layer", i)
        if consumers[ref] != 1:
            raise ModelValidationError(
                "BatchNorm input layer has other consumers; cannot fold", i)
        bn = layer.params
        src = layers[ref]
        scale = ops.batchnorm_scale(bn["gamma"], bn["variance"], bn["epsilon"])
        bias = src.params.get("bias")
        bias = np.zeros(src.params["kernel"].shape[-1]) if bias is None else bias
        params = dict(src.params)
        params["kernel"] = src.params["kernel"] * scale
        params["bias"] = (bias - bn["mean"]) * scale + bn["beta"]
        layers[ref] = Layer(src.kind, params, src.inputs)
        replaced[i] = ref

    if not replaced:
        return model

    def resolve(ref):
        while ref in replaced:
            ref = replaced[ref]
        return ref

    new_index = {}
    kept = []
    for i, layer in enumerate(layers):
        if i in replaced:
            continue
        new_index[i] = len(kept)
        kept.append(layer)
    out = []
    for layer in kept:
        refs = tuple(r if r == MODEL_INPUT else new_index[resolve(r)] for r in layer.inputs)
        out.append(Layer(layer.kind, layer.params, refs))
    return Model(layers=tuple(out), input_shape=model.input_shape,
                 output_dim=model.output_dim, name=model.name, seed=model.seed,
                 class_names=model.class_names, metadata=dict(model.metadata),
                 format_version=model.format_version)
