"""Batched array kernels for the layer kinds.

Every function takes arrays with a leading batch axis. Sequence tensors are
laid out channels-last, ``(batch, length, channels)``; dense tensors are
``(batch, features)``. Conv kernels are ``(kernel_size, in_channels,
out_channels)`` and dense kernels ``(in_features, out_features)``.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv_geometry(length, kernel_size, stride, padding):
    """Return ``(pad_left, pad_right, out_length)`` for a 1-D convolution.

    ``"same"`` follows the usual convention of ``ceil(length / stride)``
    outputs with the odd padding sample placed on the right.
    """
    if padding == "valid":
        if length < kernel_size:
            raise ValueError(
                f"input length {length} shorter than kernel {kernel_size}")
        return 0, 0, (length - kernel_size) // stride + 1
    if padding == "same":
        out = -(-length // stride)
        total = max((out - 1) * stride + kernel_size - length, 0)
        return total // 2, total - total // 2, out
    raise ValueError(f"unknown padding mode {padding!r}")


def conv1d(x, kernel, bias=None, stride=1, padding="same"):
    batch, length, cin = x.shape
    size, _, cout = kernel.shape
    left, right, out = conv_geometry(length, size, stride, padding)
    if left or right:
        x = np.pad(x, ((0, 0), (left, right), (0, 0)))
    if stride > 1 and size % stride == 0:
        # kernel spans whole stride blocks: one matmul per block offset
        nb = size // stride
        n_blocks = out + nb - 1
        xb = x[:, : n_blocks * stride].reshape(batch * n_blocks, stride * cin)
        wb = kernel.reshape(nb, stride * cin, cout)
        y = (xb @ wb[0]).reshape(batch, n_blocks, cout)[:, :out]
        for r in range(1, nb):
            y += (xb @ wb[r]).reshape(batch, n_blocks, cout)[:, r : r + out]
        if bias is not None:
            y += bias
        return y
    windows = sliding_window_view(x, size, axis=1)
    windows = windows[:, : (out - 1) * stride + 1 : stride]
    # (batch, out, cin, size) -> rows ordered like kernel.reshape(size*cin, cout)
    cols = windows.transpose(0, 1, 3, 2).reshape(batch * out, size * cin)
    y = (cols @ kernel.reshape(size * cin, cout)).reshape(batch, out, cout)
    if bias is not None:
        y += bias
    return y


def conv1d_transpose(grad, kernel, length, stride=1, padding="same"):
    """Adjoint of :func:`conv1d` with respect to its input (no bias)."""
    batch, out, cout = grad.shape
    size, cin, _ = kernel.shape
    left, right, n_out = conv_geometry(length, size, stride, padding)
    if n_out != out:
        raise ValueError(f"gradient length {out} does not match {n_out}")
    padded_len = length + left + right
    if stride > 1 and size % stride == 0:
        # kernel spans whole stride blocks: add contiguous (stride, cin) blocks
        nb = size // stride
        wb = kernel.reshape(nb, stride * cin, cout)
        flat = grad.reshape(batch * out, cout)
        if nb == 1:
            blocks = (flat @ wb[0].T).reshape(batch, out, stride * cin)
        else:
            blocks = np.zeros((batch, out + nb - 1, stride * cin))
            for r in range(nb):
                blocks[:, r : r + out] += (flat @ wb[r].T).reshape(batch, out, stride * cin)
        padded = blocks.reshape(batch, (out + nb - 1) * stride, cin)
        if padded.shape[1] < padded_len:
            padded = np.pad(padded, ((0, 0), (0, padded_len - padded.shape[1]), (0, 0)))
        return padded[:, left : left + length]
    cols = grad.reshape(batch * out, cout) @ kernel.reshape(size * cin, cout).T
    cols = cols.reshape(batch, out, size, cin)
    padded = np.zeros((batch, padded_len, cin))
    span = (out - 1) * stride + 1
    for k in range(size):
        padded[:, k : k + span : stride] += cols[:, :, k]
    return padded[:, left : left + length]


def dense(x, kernel, bias=None):
    y = x @ kernel
    if bias is not None:
        y += bias
    return y


def dense_transpose(grad, kernel):
    return grad @ kernel.T


def batchnorm_scale(gamma, variance, epsilon):
    return gamma / np.sqrt(variance + epsilon)


def batchnorm(x, gamma, beta, mean, variance, epsilon):
    scale = batchnorm_scale(gamma, variance, epsilon)
    return (x - mean) * scale + beta


def maxpool1d(x, pool_size, stride):
    """Max pooling over the length axis, ``valid`` padding.

    Returns the pooled values and the within-window argmax (ties resolve to
    the lowest index).
    """
    batch, length, channels = x.shape
    out = (length - pool_size) // stride + 1
    windows = sliding_window_view(x, pool_size, axis=1)[:, ::stride][:, :out]
    idx = windows.argmax(axis=-1)
    y = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]
    return y, idx


def maxpool1d_transpose(grad, idx, length, pool_size, stride):
    """Route ``grad`` back to the argmax position of each pooling window."""
    batch, out, channels = grad.shape
    dx = np.zeros((batch, length, channels))
    if stride == pool_size:
        block = np.zeros((batch, out, pool_size, channels))
        np.put_along_axis(block, idx[:, :, None, :], grad[:, :, None, :], axis=2)
        dx[:, : out * pool_size] = block.reshape(batch, out * pool_size, channels)
        return dx
    pos = np.arange(out)[None, :, None] * stride + idx
    b = np.broadcast_to(np.arange(batch)[:, None, None], pos.shape)
    c = np.broadcast_to(np.arange(channels)[None, None, :], pos.shape)
    np.add.at(dx, (b, pos, c), grad)
    return dx


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
