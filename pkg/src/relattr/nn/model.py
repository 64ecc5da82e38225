"""Layer graph and model container with structural validation."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ops import conv_geometry

CONV1D = "Conv1D"
DENSE = "Dense"
BATCHNORM = "BatchNorm"
RELU = "ReLU"
MAXPOOL1D = "MaxPool1D"
RESIDUAL_ADD = "ResidualAdd"
FLATTEN = "Flatten"
OUTPUT_ACTIVATION = "OutputActivation"

LAYER_KINDS = (CONV1D, DENSE, BATCHNORM, RELU, MAXPOOL1D, RESIDUAL_ADD,
               FLATTEN, OUTPUT_ACTIVATION)

#: Input reference meaning "the model input".
MODEL_INPUT = -1

FORMAT_VERSION = 1


class ModelError(ValueError):
    """Base class for model parse and validation failures."""


class ModelFormatError(ModelError):
    """The model file could not be parsed."""


class ModelValidationError(ModelError):
    """A structural invariant of the layer graph is violated."""

    def __init__(self, message, layer_index=None):
        self.layer_index = layer_index
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message)


_ARRAY_PARAMS = {
    CONV1D: ("kernel", "bias"),
    DENSE: ("kernel", "bias"),
    BATCHNORM: ("gamma", "beta", "mean", "variance"),
}


@dataclass(frozen=True)
class Layer:
    """One node of the layer graph.

    ``params`` holds numpy arrays (kernels, biases, batch-norm statistics)
    and scalar settings (``stride``, ``padding``, ``pool_size``,
    ``epsilon``, ``activation``). ``inputs`` references earlier layers by
    index, or :data:`MODEL_INPUT`.
    """

    kind: str
    params: dict = field(default_factory=dict)
    inputs: tuple = ()

    def __post_init__(self):
        params = {}
        for key, value in self.params.items():
            if key in _ARRAY_PARAMS.get(self.kind, ()) and value is not None:
                value = np.array(value, dtype=np.float64)
                value.setflags(write=False)
            params[key] = value
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "inputs", tuple(int(i) for i in self.inputs))

    def array(self, name) -> Optional[np.ndarray]:
        return self.params.get(name)


@dataclass(frozen=True)
class Model:
    """A validated, immutable layer graph.

    Layers are topologically ordered; the last layer is the single output.
    Construction validates every invariant and infers per-layer output
    shapes (available as :attr:`shapes`).
    """

    layers: tuple
    input_shape: tuple
    output_dim: int
    name: str = "model"
    seed: Optional[int] = None
    class_names: Optional[tuple] = None
    metadata: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        layers = []
        for i, layer in enumerate(self.layers):
            if not isinstance(layer, Layer):
                raise ModelValidationError("not a Layer", i)
            if not layer.inputs:
                layer = Layer(layer.kind, layer.params, (i - 1,) if i else (MODEL_INPUT,))
            layers.append(layer)
        object.__setattr__(self, "layers", tuple(layers))
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        if self.class_names is not None:
            object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "shapes", tuple(_infer_shapes(self)))

    @property
    def score_layer(self) -> int:
        """Index of the layer emitting the linear (pre-activation) scores."""
        last = len(self.layers) - 1
        if self.layers[last].kind == OUTPUT_ACTIVATION:
            return self.layers[last].inputs[0]
        return last

    def class_index(self, name) -> int:
        """Look up an output index by class name (case-insensitive)."""
        names = self.class_names or ()
        for i, n in enumerate(names):
            if n.lower() == str(name).lower():
                return i
        raise KeyError(f"model {self.name!r} has no class named {name!r}")


def _require(cond, message, index):
    if not cond:
        raise ModelValidationError(message, index)


def _infer_shapes(model):
    _require(len(model.layers) > 0, "model has no layers", None)
    _require(1 <= len(model.input_shape) <= 2,
             f"input shape {model.input_shape} must have rank 1 or 2", None)
    shapes = []
    consumers = [0] * len(model.layers)
    for i, layer in enumerate(model.layers):
        kind = layer.kind
        _require(kind in LAYER_KINDS, f"unknown layer kind {kind!r}", i)
        for ref in layer.inputs:
            _require(ref == MODEL_INPUT or 0 <= ref < i,
                     f"input reference {ref} is not an earlier layer (graph must be acyclic "
                     "and topologically ordered)", i)
            if ref >= 0:
                consumers[ref] += 1
        ins = [model.input_shape if r == MODEL_INPUT else shapes[r] for r in layer.inputs]
        n_inputs = 2 if kind == RESIDUAL_ADD else 1
        _require(len(ins) == n_inputs,
                 f"{kind} takes {n_inputs} input(s), got {len(ins)}", i)
        shapes.append(_layer_shape(layer, ins, i))
        _require(all(s > 0 for s in shapes[-1]), f"empty output shape {shapes[-1]}", i)

    last = len(model.layers) - 1
    for i, count in enumerate(consumers[:-1]):
        _require(count > 0, "output is never consumed (model must have a single output)", i)
    for i, layer in enumerate(model.layers[:-1]):
        _require(layer.kind != OUTPUT_ACTIVATION,
                 "OutputActivation is only allowed as the final layer", i)
    _require(shapes[last] == (model.output_dim,),
             f"final output shape {shapes[last]} does not match output_dim {model.output_dim}",
             last)
    if model.class_names is not None:
        _require(len(model.class_names) == model.output_dim,
                 "class_names length does not match output_dim", None)
    return shapes


def _layer_shape(layer, ins, i):
    kind, p = layer.kind, layer.params
    shape = ins[0]
    if kind == CONV1D:
        _require(len(shape) == 2, f"Conv1D needs (length, channels) input, got {shape}", i)
        kernel = p.get("kernel")
        _require(kernel is not None and kernel.ndim == 3,
                 "Conv1D kernel must have shape (size, in_channels, out_channels)", i)
        _require(kernel.shape[1] == shape[1],
                 f"Conv1D kernel expects {kernel.shape[1]} input channels, got {shape[1]}", i)
        _check_bias(p.get("bias"), kernel.shape[2], i)
        stride = p.setdefault("stride", 1)
        padding = p.setdefault("padding", "same")
        _require(isinstance(stride, int) and stride >= 1, f"bad stride {stride!r}", i)
        _require(padding in ("same", "valid"), f"bad padding {padding!r}", i)
        try:
            out = conv_geometry(shape[0], kernel.shape[0], stride, padding)[2]
        except ValueError as exc:
            raise ModelValidationError(str(exc), i) from None
        return (out, kernel.shape[2])
    if kind == DENSE:
        _require(len(shape) == 1, f"Dense needs a flat input, got {shape}", i)
        kernel = p.get("kernel")
        _require(kernel is not None and kernel.ndim == 2,
                 "Dense kernel must have shape (in_features, out_features)", i)
        _require(kernel.shape[0] == shape[0],
                 f"Dense kernel expects {kernel.shape[0]} inputs, got {shape[0]}", i)
        _check_bias(p.get("bias"), kernel.shape[1], i)
        return (kernel.shape[1],)
    if kind == BATCHNORM:
        channels = shape[-1]
        for name in ("gamma", "beta", "mean", "variance"):
            arr = p.get(name)
            _require(arr is not None and arr.shape == (channels,),
                     f"BatchNorm {name} must have shape ({channels},)", i)
        _require(np.all(p["variance"] > 0), "BatchNorm variance must be strictly positive", i)
        eps = p.setdefault("epsilon", 1e-3)
        _require(eps >= 0, "BatchNorm epsilon must be non-negative", i)
        return shape
    if kind == MAXPOOL1D:
        _require(len(shape) == 2, f"MaxPool1D needs (length, channels) input, got {shape}", i)
        size = p.get("pool_size")
        _require(isinstance(size, int) and size >= 1, f"bad pool_size {size!r}", i)
        stride = p.setdefault("stride", size)
        _require(isinstance(stride, int) and stride >= 1, f"bad stride {stride!r}", i)
        _require(shape[0] >= size, "pool window longer than input", i)
        return ((shape[0] - size) // stride + 1, shape[1])
    if kind == RESIDUAL_ADD:
        _require(ins[0] == ins[1],
                 f"ResidualAdd inputs have different shapes {ins[0]} and {ins[1]}", i)
        return shape
    if kind == FLATTEN:
        return (int(np.prod(shape)),)
    if kind == OUTPUT_ACTIVATION:
        act = p.setdefault("activation", "sigmoid")
        _require(act in ("sigmoid", "linear"), f"bad activation {act!r}", i)
        _require(len(shape) == 1, "OutputActivation needs a flat input", i)
        return shape
    return shape  # ReLU


def _check_bias(bias, n, i):
    if bias is not None:
        _require(bias.shape == (n,), f"bias must have shape ({n},)", i)


def array_params(kind) -> tuple:
    return _ARRAY_PARAMS.get(kind, ())

