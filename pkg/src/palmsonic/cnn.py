"""Small from-scratch convolutional net over combined feature images.

Fixed architecture: grayscale input downsampled 4x, two conv(3x3)+ReLU+
maxpool(2x2) stages with 8 and 16 channels (convolutions zero-pad to keep
height/width), then a dense layer to 2 classes with softmax. For the default
three-slab 224x672 input the shapes run 56x168 -> 28x84x8 -> 14x42x16 ->
flatten 9408 -> 2.

Everything is float64 numpy with explicit backprop; cnn_loss_grad is the
seam the finite-difference gradient tests drive.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

INPUT_DOWNSAMPLE = 4
CONV1_CHANNELS = 8
CONV2_CHANNELS = 16
KERNEL = 3

__all__ = [
    "INPUT_DOWNSAMPLE",
    "images_to_batch",
    "init_params",
    "forward",
    "cnn_loss_grad",
    "param_names",
]

param_names = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "dense_w", "dense_b")


def images_to_batch(images) -> np.ndarray:
    """Grayscale + 4x average-pool a list of equally sized images.

    Returns (batch, 1, h/4, w/4) float64 in [0, 1].
    """
    widths = {img.pixels.shape[1] for img in images}
    if len(widths) != 1:
        raise ValueError(f"mixed image widths: {sorted(widths)}")
    out = []
    d = INPUT_DOWNSAMPLE
    for img in images:
        gray = img.pixels.astype(np.float64).mean(axis=2) / 255.0
        h, w = gray.shape
        pooled = gray.reshape(h // d, d, w // d, d).mean(axis=(1, 3))
        out.append(pooled[None, :, :])
    return np.stack(out)


def _glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(rng, input_hw):
    """Glorot-uniform conv/dense weights, zero biases, fixed draw order."""
    h, w = input_hw
    flat = (h // 4) * (w // 4) * CONV2_CHANNELS
    k2 = KERNEL * KERNEL
    return [
        _glorot(rng, (CONV1_CHANNELS, 1, KERNEL, KERNEL), k2, CONV1_CHANNELS * k2),
        np.zeros(CONV1_CHANNELS),
        _glorot(
            rng,
            (CONV2_CHANNELS, CONV1_CHANNELS, KERNEL, KERNEL),
            CONV1_CHANNELS * k2,
            CONV2_CHANNELS * k2,
        ),
        np.zeros(CONV2_CHANNELS),
        _glorot(rng, (2, flat), flat, 2),
        np.zeros(2),
    ]


def _conv_same(x, w, b):
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (KERNEL, KERNEL), axis=(2, 3))
    return np.einsum("bchwij,fcij->bfhw", win, w) + b[None, :, None, None]


def _conv_same_backward(x, w, dout):
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (KERNEL, KERNEL), axis=(2, 3))
    dw = np.einsum("bchwij,bfhw->fcij", win, dout)
    db = dout.sum(axis=(0, 2, 3))
    dp = np.pad(dout, ((0, 0), (0, 0), (1, 1), (1, 1)))
    dwin = sliding_window_view(dp, (KERNEL, KERNEL), axis=(2, 3))
    dx = np.einsum("bfhwij,fcij->bchw", dwin, w[:, :, ::-1, ::-1])
    return dx, dw, db


def _maxpool(x):
    b, c, h, w = x.shape
    xr = x.reshape(b, c, h // 2, 2, w // 2, 2)
    out = xr.max(axis=(3, 5))
    return out, xr


def _maxpool_backward(xr, out, dout):
    mask = xr == out[:, :, :, None, :, None]
    counts = mask.sum(axis=(3, 5), keepdims=True)
    dxr = mask * dout[:, :, :, None, :, None] / counts
    b, c, h2, _, w2, _ = xr.shape
    return dxr.reshape(b, c, h2 * 2, w2 * 2)


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(params, x, want_cache=False):
    """Class probabilities (batch, 2) for a (batch, 1, h, w) input."""
    w1, b1, w2, b2, wd, bd = params
    z1 = _conv_same(x, w1, b1)
    a1 = np.maximum(z1, 0.0)
    p1, xr1 = _maxpool(a1)
    z2 = _conv_same(p1, w2, b2)
    a2 = np.maximum(z2, 0.0)
    p2, xr2 = _maxpool(a2)
    flat = p2.reshape(x.shape[0], -1)
    logits = flat @ wd.T + bd
    probs = _softmax(logits)
    if not want_cache:
        return probs
    return probs, (x, z1, a1, p1, xr1, z2, a2, p2, xr2, flat)


def cnn_loss_grad(params, x, y):
    """Mean cross-entropy and gradients for every parameter tensor.

    y holds class indices (0 = not infested, 1 = infested).
    """
    w1, b1, w2, b2, wd, bd = params
    probs, cache = forward(params, x, want_cache=True)
    x_in, z1, a1, p1, xr1, z2, a2, p2, xr2, flat = cache
    batch = x.shape[0]
    picked = probs[np.arange(batch), y]
    loss = float(-np.mean(np.log(np.maximum(picked, 1e-300))))

    dlogits = probs.copy()
    dlogits[np.arange(batch), y] -= 1.0
    dlogits /= batch
    dwd = dlogits.T @ flat
    dbd = dlogits.sum(axis=0)
    dflat = dlogits @ wd
    dp2 = dflat.reshape(p2.shape)
    da2 = _maxpool_backward(xr2, p2, dp2)
    dz2 = da2 * (z2 > 0)
    dp1, dw2, db2 = _conv_same_backward(p1, w2, dz2)
    da1 = _maxpool_backward(xr1, p1, dp1)
    dz1 = da1 * (z1 > 0)
    _, dw1, db1 = _conv_same_backward(x_in, w1, dz1)
    return loss, [dw1, db1, dw2, db2, dwd, dbd]
