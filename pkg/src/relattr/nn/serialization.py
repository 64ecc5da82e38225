"""JSON model file format.

A model file is one JSON document::

    {
      "format": "relattr-model",
      "version": 1,
      "name": "resnet_mini",
      "seed": 0,
      "input_shape": [4096, 12],
      "output_dim": 6,
      "class_names": ["1dAVb", "RBBB", "LBBB", "SB", "AF", "ST"],
      "metadata": {},
      "layers": [
        {"kind": "Conv1D", "inputs": [-1],
         "params": {"stride": 8, "padding": "same"},
         "arrays": {"kernel": {"shape": [16, 12, 8], "values": [[[...]]]},
                    "bias": {"shape": [8], "values": [...]}}},
        ...
      ]
    }

Arrays are nested lists in row-major order; values are read as 64-bit
floats whatever precision they were written with. Floats are written with
``repr`` so save -> load is lossless.
"""

import json
from pathlib import Path

import numpy as np

from .model import (
    FORMAT_VERSION, LAYER_KINDS, Layer, Model, ModelFormatError, array_params,
)

FORMAT_NAME = "relattr-model"


def model_to_dict(model: Model) -> dict:
    layers = []
    for layer in model.layers:
        params, arrays = {}, {}
        for key, value in layer.params.items():
            if key in array_params(layer.kind):
                if value is not None:
                    arrays[key] = {"shape": list(value.shape), "values": value.tolist()}
            else:
                params[key] = value
        layers.append({"kind": layer.kind, "inputs": list(layer.inputs),
                       "params": params, "arrays": arrays})
    return {
        "format": FORMAT_NAME,
        "version": model.format_version,
        "name": model.name,
        "seed": model.seed,
        "input_shape": list(model.input_shape),
        "output_dim": model.output_dim,
        "class_names": list(model.class_names) if model.class_names else None,
        "metadata": model.metadata,
        "layers": layers,
    }


def model_from_dict(doc) -> Model:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ModelFormatError(f"not a {FORMAT_NAME} document")
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {version!r}")
    try:
        raw_layers = doc["layers"]
        input_shape = tuple(doc["input_shape"])
        output_dim = int(doc["output_dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"missing or malformed header field: {exc}") from None
    if not isinstance(raw_layers, list):
        raise ModelFormatError("'layers' must be a list")
    layers = []
    for i, entry in enumerate(raw_layers):
        layers.append(_layer_from_dict(entry, i))
    return Model(layers=tuple(layers), input_shape=input_shape, output_dim=output_dim,
                 name=doc.get("name") or "model", seed=doc.get("seed"),
                 class_names=doc.get("class_names"), metadata=doc.get("metadata") or {},
                 format_version=version)


def _layer_from_dict(entry, i):
    if not isinstance(entry, dict) or entry.get("kind") not in LAYER_KINDS:
        raise ModelFormatError(f"layer {i}: missing or unknown 'kind'")
    kind = entry["kind"]
    params = dict(entry.get("params") or {})
    for name, spec in (entry.get("arrays") or {}).items():
        if name not in array_params(kind):
            raise ModelFormatError(f"layer {i}: unexpected array {name!r} for {kind}")
        try:
            shape = tuple(int(s) for s in spec["shape"])
            values = np.array(spec["values"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"layer {i}: malformed array {name!r}: {exc}") from None
        if values.shape != shape:
            raise ModelFormatError(
                f"layer {i}: array {name!r} has shape {values.shape}, declared {shape}")
        params[name] = values
    inputs = entry.get("inputs") or ()
    return Layer(kind, params, tuple(inputs))


def load_model(path) -> Model:
    """Read and validate a model file.

    Raises
    ------
    ModelFormatError
        The file is not valid JSON or not a model document.
    ModelValidationError
        The layer graph violates an invariant; the message names the layer.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return model_from_dict(doc)


def save_model(model: Model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)) + "\n")
