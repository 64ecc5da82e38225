"""Minimal 1-D convolutional inference engine with input gradients."""

from .engine import (
    OUTPUT_MODES, ForwardTrace, batch_gradient, fold_batchnorm, forward, gradient, predict,
)
from .model import (
    BATCHNORM, CONV1D, DENSE, FLATTEN, LAYER_KINDS, MAXPOOL1D, MODEL_INPUT,
    OUTPUT_ACTIVATION, RELU, RESIDUAL_ADD, Layer, Model, ModelError, ModelFormatError,
    ModelValidationError,
)
from .serialization import load_model, model_from_dict, model_to_dict, save_model

__all__ = [
    "BATCHNORM", "CONV1D", "DENSE", "FLATTEN", "LAYER_KINDS", "MAXPOOL1D", "MODEL_INPUT",
    "OUTPUT_ACTIVATION", "OUTPUT_MODES", "RELU", "RESIDUAL_ADD",
    "ForwardTrace", "Layer", "Model", "ModelError", "ModelFormatError",
    "ModelValidationError", "batch_gradient", "fold_batchnorm", "forward", "gradient",
    "load_model", "model_from_dict", "model_to_dict", "predict", "save_model",
]
