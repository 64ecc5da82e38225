"""Integrated Gradients along the straight path from a baseline."""

import numpy as np

from ..nn import Model, batch_gradient
from .config import AttributionConfig, Method, RelevanceTensor


def path_weights(steps, riemann="right"):
    """Interpolation coefficients and quadrature weights for the path sum.

    ``"right"`` is the right-endpoint sum over ``k = 1..m`` with weight
    ``1/m`` each; ``"trapezoid"`` uses ``k = 0..m`` with halved endpoints.
    """
    if riemann == "right":
        alphas = np.arange(1, steps + 1) / steps
        weights = np.full(steps, 1.0 / steps)
    elif riemann == "trapezoid":
        alphas = np.arange(0, steps + 1) / steps
        weights = np.full(steps + 1, 1.0 / steps)
        weights[[0, -1]] *= 0.5
    else:
        raise ValueError(f"unknown riemann scheme {riemann!r}")
    return alphas, weights


def path_gradient_sum(model, x, baseline, class_index, steps, riemann="right",
                      output_mode="linear", batch_size=8):
    """Weighted sum of gradients at the interpolation points.

    Points are evaluated in fixed-size chunks, so the result does not depend
    on how many inputs are attributed together.
    """
    alphas, weights = path_weights(steps, riemann)
    delta = x - baseline
    total = np.zeros_like(x)
    for start in range(0, alphas.size, batch_size):
        a = alphas[start : start + batch_size]
        w = weights[start : start + batch_size]
        points = baseline + a.reshape((-1,) + (1,) * x.ndim) * delta
        grads = batch_gradient(model, points, class_index, output_mode)
        total += np.tensordot(w, grads, axes=1)
    return total


def integrated_gradients(model: Model, x, config: AttributionConfig,
                         recording_id=None) -> RelevanceTensor:
    """Attribute ``f_c(x) - f_c(baseline)`` to the input samples.

    Parameters
    ----------
    model : Model
        Classifier; batch normalization may be folded or not.
    x : array
        One input with the model's input shape.
    config : AttributionConfig
        ``method`` must be IG. ``steps`` is the number of path intervals.

    Returns
    -------
    RelevanceTensor
        ``(x - baseline) * sum_k grad f(baseline + k/m (x - baseline)) / m``.
    """
    if config.method is not Method.IG:
        raise ValueError(f"integrated_gradients called with method {config.method.value}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != model.input_shape:
        raise ValueError(f"input shape {x.shape} does not match model input "
                         f"shape {model.input_shape}")
    baseline = config.baseline_for(x.shape)
    avg = path_gradient_sum(model, x, baseline, config.class_index, config.steps,
                            config.riemann, config.output_mode, config.batch_size)
    values = (x - baseline) * avg
    return RelevanceTensor(values=values, method=Method.IG, class_index=config.class_index,
                           recording_id=recording_id, config=config.snapshot())
