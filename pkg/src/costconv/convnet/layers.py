"""Layer primitives on (batch, rows, time) arrays.

Every function also accepts a single 2-D (rows, time) matrix.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

LRELU_SLOPE = 0.01


class ShapeError(ValueError):
    pass


def _batched(x):
    x = np.asarray(x)
    if x.ndim == 2:
        return x[None], True
    if x.ndim != 3:
        raise ShapeError(f"expected a (rows, time) or (batch, rows, time) array, got shape {x.shape}")
    return x, False


def same_padding(k: int) -> tuple[int, int]:
    left = (k - 1) // 2
    return left, k - 1 - left


def conv_forward(x, kernels, biases, return_cols: bool = False):
    """Full-height convolution along time with 'same' zero padding and stride 1.

    ``kernels`` is (n_filters, f_in, k).  Output[d, j] = b_d + sum_{r,c}
    kernels[d, r, c] * padded[r, j + c], the padding being on the time axis.
    """
    xb, squeeze = _batched(x)
    n_f, f_in, k = kernels.shape
    B, rows, t = xb.shape
    if rows != f_in:
        raise ShapeError(f"conv input has {rows} rows but kernels expect {f_in} (kernel shape {kernels.shape})")
    if biases.shape != (n_f,):
        raise ShapeError(f"bias shape {biases.shape} does not match {n_f} filters")
    left, right = same_padding(k)
    xp = np.pad(xb, ((0, 0), (0, 0), (left, right)))
    # (B, f_in, t, k) -> (B, t, f_in, k)
    cols = sliding_window_view(xp, k, axis=2).transpose(0, 2, 1, 3).reshape(B * t, f_in * k)
    out = cols @ kernels.reshape(n_f, f_in * k).T + biases
    out = out.reshape(B, t, n_f).transpose(0, 2, 1)
    if squeeze:
        out = out[0]
    if return_cols:
        return out, cols
    return out


def conv_backward(dout, cols, kernels, input_shape, need_input: bool = True):
    """Gradients (d_input, d_kernels, d_biases) of a conv_forward call.

    d_input is None when ``need_input`` is false.
    """
    dob, squeeze = _batched(dout)
    n_f, f_in, k = kernels.shape
    B, _, t = dob.shape
    d2 = dob.transpose(0, 2, 1).reshape(B * t, n_f)
    dk = (d2.T @ cols).reshape(n_f, f_in, k)
    db = dob.sum(axis=(0, 2))
    if not need_input:
        return None, dk, db
    dcols = (d2 @ kernels.reshape(n_f, f_in * k)).reshape(B, t, f_in, k)
    left, _ = same_padding(k)
    dxp = np.zeros((B, f_in, t + k - 1), dtype=dcols.dtype)
    for c in range(k):
        dxp[:, :, c:c + t] += dcols[:, :, :, c].transpose(0, 2, 1)
    dx = dxp[:, :, left:left + t]
    if squeeze or len(input_shape) == 2:
        dx = dx[0]
    return dx, dk, db


def lrelu(x):
    x = np.asarray(x)
    return np.where(x > 0, x, x * LRELU_SLOPE)


def lrelu_grad(x):
    # slope 0.01 at exactly zero
    x = np.asarray(x)
    one = np.ones((), dtype=x.dtype)
    return np.where(x > 0, one, one * LRELU_SLOPE)


def relu(x):
    return np.maximum(x, 0.0)


def relu_grad(x):
    return (np.asarray(x) > 0).astype(np.result_type(x, np.float32))


def sigmoid(x):
    x = np.asarray(x)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid_grad(x):
    s = sigmoid(x)
    return s * (1.0 - s)


def tanh_grad(x):
    return 1.0 - np.tanh(x) ** 2


ACTIVATIONS = {
    "lrelu": (lrelu, lrelu_grad),
    "relu": (relu, relu_grad),
    "sigmoid": (sigmoid, sigmoid_grad),
    "tanh": (np.tanh, tanh_grad),
}


def avg_pool(x):
    """Average pooling of width 2 and stride 2 along time; an odd last column is dropped."""
    x = np.asarray(x)
    t = x.shape[-1]
    if t < 2:
        raise ShapeError(f"average pooling needs at least 2 time steps, got {t}")
    h = t // 2
    return (x[..., 0:2 * h:2] + x[..., 1:2 * h:2]) / 2


def avg_pool_backward(dout, t_in: int):
    dx = np.zeros(dout.shape[:-1] + (t_in,), dtype=dout.dtype)
    h = dout.shape[-1]
    dx[..., 0:2 * h:2] = dout / 2
    dx[..., 1:2 * h:2] = dout / 2
    return dx


def dropout_forward(flat, rate: float, mode: str, rng: np.random.Generator | None = None):
    """Inverted dropout.  Returns (output, mask); the mask is None in eval mode or at rate 0."""
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    flat = np.asarray(flat)
    if mode == "eval" or rate == 0:
        return flat, None
    if mode != "train":
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    keep = rng.random(flat.shape) >= rate
    mask = keep.astype(flat.dtype) / (1.0 - rate)
    return flat * mask, mask
