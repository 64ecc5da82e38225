"""Deterministic model generators used by the tests and the CLI."""

import numpy as np

from .model import (
    BATCHNORM, CONV1D, DENSE, FLATTEN, MAXPOOL1D, OUTPUT_ACTIVATION, RELU,
    RESIDUAL_ADD, Layer, Model,
)

#: Output order of the six-class ECG classifier mirrored by ``resnet_mini``.
ECG_CLASSES = ("1dAVb", "RBBB", "LBBB", "SB", "AF", "ST")

N_SAMPLES = 4096
N_LEADS = 12


def tiny_linear() -> Model:
    """One dense layer ``f(x) = 1*x0 + 2*x1``."""
    return Model(
        layers=(Layer(DENSE, {"kernel": [[1.0], [2.0]], "bias": [0.0]}),),
        input_shape=(2,), output_dim=1, name="tiny_linear", seed=None,
    )


def _he(rng, shape, fan_in):
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def _conv(rng, size, cin, cout, stride=1, padding="same", inputs=(), shift=1.0):
    return Layer(CONV1D, {
        "kernel": _he(rng, (size, cin, cout), size * cin),
        "bias": rng.normal(0.0, 0.05 * shift, size=cout),
        "stride": stride, "padding": padding,
    }, inputs)


def _bn(rng, channels, shift=1.0):
    return Layer(BATCHNORM, {
        "gamma": rng.uniform(0.5, 1.5, size=channels),
        "beta": rng.normal(0.0, 0.1 * shift, size=channels),
        "mean": rng.normal(0.0, 0.1 * shift, size=channels),
        "variance": rng.uniform(0.5, 1.5, size=channels),
        "epsilon": 1e-3,
    })


def resnet_mini(seed: int = 0, input_length: int = N_SAMPLES,
                n_leads: int = N_LEADS, n_classes: int = 6,
                shift_scale: float = 1e-4) -> Model:
    """Two-residual-block 1-D ResNet with 8 and 16 channels.

    A non-overlapping stem convolution (width 8, stride 8) and a max-pool
    of width 2 reduce 4096 samples to 256 steps before the first block.
    Each block ends in a max-pool of width 4; the second block projects its
    skip path with a 1x1 convolution.

    ``shift_scale`` multiplies the spread of every bias and batch-norm
    shift. Small shifts keep ReLU on/off patterns driven by the input rather
    than by the offsets, which keeps the path integral well resolved by a
    64-step Riemann sum; ``shift_scale=1`` gives offsets of order 0.1.
    """
    rng = np.random.default_rng(seed)
    sh = shift_scale
    L = []
    L.append(_conv(rng, 8, n_leads, 8, stride=8, shift=sh))  # 0
    L.append(_bn(rng, 8, sh))                                # 1
    L.append(Layer(RELU))                                    # 2
    L.append(Layer(MAXPOOL1D, {"pool_size": 2}))             # 3
    L.append(_conv(rng, 5, 8, 8, shift=sh))                  # 4
    L.append(_bn(rng, 8, sh))                                # 5
    L.append(Layer(RELU))                                    # 6
    L.append(_conv(rng, 5, 8, 8, shift=sh))                  # 7
    L.append(_bn(rng, 8, sh))                                # 8
    L.append(Layer(RESIDUAL_ADD, {}, (8, 3)))                # 9
    L.append(Layer(RELU))                                    # 10
    L.append(Layer(MAXPOOL1D, {"pool_size": 4}))             # 11
    L.append(_conv(rng, 5, 8, 16, shift=sh))                 # 12
    L.append(_bn(rng, 16, sh))                               # 13
    L.append(Layer(RELU))                                    # 14
    L.append(_conv(rng, 5, 16, 16, shift=sh))                # 15
    L.append(_bn(rng, 16, sh))                               # 16
    L.append(_conv(rng, 1, 8, 16, inputs=(11,), shift=sh))   # 17 skip projection
    L.append(Layer(RESIDUAL_ADD, {}, (16, 17)))              # 18
    L.append(Layer(RELU))                                    # 19
    L.append(Layer(MAXPOOL1D, {"pool_size": 4}))             # 20
    L.append(Layer(FLATTEN))                                 # 21
    flat = (input_length // 8 // 2 // 4 // 4) * 16
    L.append(Layer(DENSE, {
        "kernel": rng.normal(0.0, np.sqrt(1.0 / flat), size=(flat, n_classes)),
        "bias": rng.normal(0.0, 0.05 * sh, size=n_classes),
    }))                                                      # 22
    L.append(Layer(OUTPUT_ACTIVATION, {"activation": "sigmoid"}))  # 23
    names = ECG_CLASSES if n_classes == len(ECG_CLASSES) else None
    return Model(layers=tuple(L), input_shape=(input_length, n_leads),
                 output_dim=n_classes, name="resnet_mini", seed=seed,
                 class_names=names, metadata={"generator": "relattr.nn.fixtures.resnet_mini",
                           "shift_scale": sh})


def relu_net(sizes=(6, 5, 4, 1), seed: int = 0, bias: bool = True) -> Model:
    """Fully connected ReLU network on a flat input of ``sizes[0]`` features."""
    rng = np.random.default_rng(seed)
    layers = []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        params = {"kernel": rng.normal(0.0, 1.0, size=(n_in, n_out))}
        if bias:
            params["bias"] = rng.normal(0.0, 0.5, size=n_out)
        layers.append(Layer(DENSE, params))
        if i < len(sizes) - 2:
            layers.append(Layer(RELU))
    return Model(layers=tuple(layers), input_shape=(sizes[0],),
                 output_dim=sizes[-1], name="relu_net", seed=seed)


def conv_dense_net(seed: int = 0, length: int = 4, channels: int = 1,
                   filters: int = 2, size: int = 2, bias: bool = True) -> Model:
    """Conv1D(valid) -> ReLU -> Flatten -> Dense(1): a two-layer net."""
    rng = np.random.default_rng(seed)
    conv = {"kernel": rng.normal(0.0, 1.0, size=(size, channels, filters)),
            "stride": 1, "padding": "valid"}
    out_len = length - size + 1
    dense = {"kernel": rng.normal(0.0, 1.0, size=(out_len * filters, 1))}
    if bias:
        conv["bias"] = rng.normal(0.0, 0.5, size=filters)
        dense["bias"] = rng.normal(0.0, 0.5, size=1)
    layers = (Layer(CONV1D, conv), Layer(RELU), Layer(FLATTEN), Layer(DENSE, dense))
    return Model(layers=layers, input_shape=(length, channels), output_dim=1,
                 name="conv_dense_net", seed=seed)


def p_wave_detector(lead: int = 1, sample_rate: float = 400.0, width_s: float = 0.025,
                    threshold: float = 0.02, n_samples: int = N_SAMPLES,
                    n_leads: int = N_LEADS) -> Model:
    """Hand-weighted model whose score grows with P-wave energy on one lead.

    A 1x1 convolution selects ``lead``. A zero-mean matched filter shaped
    like a P bump (Gaussian of standard deviation ``width_s``, minus a wider
    Gaussian so baseline offsets cancel) follows, then a ReLU with bias
    ``-threshold`` and a dense average over time. Output 0 is the score.
    """
    sigma = width_s * sample_rate
    half = int(np.ceil(4 * sigma))
    t = np.arange(-half, half + 1, dtype=np.float64)
    narrow = np.exp(-0.5 * (t / sigma) ** 2)
    wide = np.exp(-0.5 * (t / (2.5 * sigma)) ** 2)
    template = narrow / narrow.sum() - wide / wide.sum()
    template /= np.sqrt(np.sum(template ** 2))
    select = np.zeros((1, n_leads, 1))
    select[0, lead, 0] = 1.0
    layers = (
        Layer(CONV1D, {"kernel": select, "stride": 1, "padding": "same"}),
        Layer(CONV1D, {"kernel": template[:, None, None], "bias": [-threshold],
                       "stride": 1, "padding": "same"}),
        Layer(RELU),
        Layer(FLATTEN),
        Layer(DENSE, {"kernel": np.full((n_samples, 1), 100.0 / n_samples), "bias": [0.0]}),
    )
    return Model(layers=layers, input_shape=(n_samples, n_leads), output_dim=1,
                 name="p_wave_detector", class_names=("P",),
                 metadata={"lead": lead, "threshold": threshold, "width_s": width_s})
