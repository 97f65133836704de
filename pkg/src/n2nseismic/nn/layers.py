"""Forward/backward primitives on channels-last tensors of shape (B, H, W, C).

Each ``*_forward`` returns ``(out, cache)``; the matching ``*_backward``
takes the upstream gradient and that cache.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BN_EPS = 1e-5


def _pad1(x):
    return np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))


def _shifted_matmul(xp, w, H, W):
    out = np.zeros(xp.shape[:1] + (H, W, w.shape[3]), dtype=np.result_type(xp, w))
    for dy in range(3):
        for dx in range(3):
            out += xp[:, dy:dy + H, dx:dx + W, :] @ w[dy, dx]
    return out


def conv3x3_forward(x, w, b=None, keep_cache=True):
    """'Same' 3x3 convolution (cross-correlation) with zero padding.

    x: (B, H, W, Cin), w: (3, 3, Cin, Cout), b: (Cout,) or None. The cache
    holds the im2col matrix so the weight gradient is a single matmul.
    """
    B, H, W, C = x.shape
    xp = _pad1(x)
    if keep_cache:
        cols = sliding_window_view(xp, (3, 3), axis=(1, 2))  # (B, H, W, C, 3, 3)
        cols = cols.transpose(0, 1, 2, 4, 5, 3).reshape(B * H * W, 9 * C)
        out = (cols @ w.reshape(9 * C, -1)).reshape(B, H, W, -1)
    else:
        cols = None
        out = _shifted_matmul(xp, w, H, W)
    if b is not None:
        out += b
    return out, (cols, w, b is not None)


def conv3x3_backward(dout, cache):
    cols, w, has_bias = cache
    B, H, W, Co = dout.shape
    dw = (cols.T @ dout.reshape(-1, Co)).reshape(w.shape)
    # input gradient = 'same' convolution with the flipped, transposed kernel
    w_flip = w[::-1, ::-1].transpose(0, 1, 3, 2)
    dx = _shifted_matmul(_pad1(dout), w_flip, H, W)
    db = dout.sum(axis=(0, 1, 2)) if has_bias else None
    return dx, dw, db


def batchnorm_forward(x, gamma, beta, running_mean, running_var, train):
    """Per-channel batch normalization over (B, H, W).

    In train mode the batch statistics are used and returned in the cache
    (the caller folds them into the running estimates); in infer mode the
    running statistics are used.
    """
    if train:
        mean = x.mean(axis=(0, 1, 2))
        var = x.var(axis=(0, 1, 2))
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mean) * inv_std
    out = gamma * xhat + beta
    return out, (xhat, inv_std, gamma, mean, var)


def batchnorm_backward(dout, cache):
    xhat, inv_std, gamma, _, _ = cache
    n = xhat.shape[0] * xhat.shape[1] * xhat.shape[2]
    dgamma = (dout * xhat).sum(axis=(0, 1, 2))
    dbeta = dout.sum(axis=(0, 1, 2))
    dxhat = dout * gamma
    dx = (inv_std / n) * (n * dxhat - dxhat.sum(axis=(0, 1, 2)) - xhat * (dxhat * xhat).sum(axis=(0, 1, 2)))
    return dx, dgamma, dbeta


def prelu_forward(x, a):
    """Parametric ReLU with one learned negative-side slope ``a`` (shape (1,))."""
    pos = x > 0
    out = np.where(pos, x, a * x)
    return out, (x, pos, a)


def prelu_backward(dout, cache):
    x, pos, a = cache
    dx = np.where(pos, dout, a * dout)
    da = np.array([np.sum(np.where(pos, 0, dout * x))], dtype=a.dtype)
    return dx, da
