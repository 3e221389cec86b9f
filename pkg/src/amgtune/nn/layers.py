"""Layer primitives with explicit forward and backward passes.

Images are channel-first, ``(N, C, H, W)``; dense activations are ``(N, D)``.
Every ``*_backward`` takes the upstream gradient and the cache returned by the
matching forward call.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "conv2d_forward",
    "conv2d_backward",
    "maxpool2_forward",
    "maxpool2_backward",
    "dense_forward",
    "dense_backward",
    "relu",
    "softplus",
    "sigmoid",
    "clamp01",
]


def _same_pad(k: int) -> tuple[int, int]:
    left = (k - 1) // 2
    return left, k - 1 - left


def conv2d_forward(X, W, b):
    """Stride-1 convolution with zero 'same' padding (extra pad on the
    right/bottom for even kernels).

    Parameters
    ----------
    X : (N, C, H, W) array
    W : (F, C, k, k) array
    b : (F,) array
    """
    N, C, H, Wd = X.shape
    F, Cw, k, _ = W.shape
    if Cw != C:
        raise ValueError(f"conv expects {Cw} input channels, got {C}")
    lo, hi = _same_pad(k)
    Xp = np.pad(X, ((0, 0), (0, 0), (lo, hi), (lo, hi))).transpose(0, 2, 3, 1)
    win = sliding_window_view(np.ascontiguousarray(Xp), (k, k), axis=(1, 2))  # (N, H, W, C, k, k)
    # rows ordered (i, j, c) so the copy moves contiguous channel vectors
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(N * H * Wd, k * k * C)
    Wc = W.transpose(0, 2, 3, 1).reshape(F, -1)
    out = cols @ Wc.T + b
    out = out.reshape(N, H, Wd, F).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out), (cols, X.shape, W)


def conv2d_backward(dout, cache, need_dx: bool = True):
    cols, xshape, W = cache
    N, C, H, Wd = xshape
    F, _, k, _ = W.shape
    d2 = dout.transpose(0, 2, 3, 1).reshape(-1, F)
    dW = (d2.T @ cols).reshape(F, k, k, C).transpose(0, 3, 1, 2)
    db = d2.sum(axis=0)
    if not need_dx:
        return None, np.ascontiguousarray(dW), db
    dcols = (d2 @ W.transpose(0, 2, 3, 1).reshape(F, -1)).reshape(N, H, Wd, k, k, C)
    lo, hi = _same_pad(k)
    dXp = np.zeros((N, C, H + k - 1, Wd + k - 1))
    for i in range(k):
        for j in range(k):
            dXp[:, :, i:i + H, j:j + Wd] += dcols[:, :, :, i, j, :].transpose(0, 3, 1, 2)
    return dXp[:, :, lo:lo + H, lo:lo + Wd], np.ascontiguousarray(dW), db


def maxpool2_forward(X):
    """2x2 max-pool with stride 2; odd trailing rows/columns are dropped."""
    N, C, H, W = X.shape
    Ho, Wo = H // 2, W // 2
    if Ho == 0 or Wo == 0:
        raise ValueError(f"cannot max-pool a {H}x{W} map")
    win = X[:, :, :2 * Ho, :2 * Wo].reshape(N, C, Ho, 2, Wo, 2)
    win = win.transpose(0, 1, 2, 4, 3, 5).reshape(N, C, Ho, Wo, 4)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    return out, (arg, X.shape)


def maxpool2_backward(dout, cache):
    arg, (N, C, H, W) = cache
    Ho, Wo = arg.shape[2:]
    dwin = np.zeros((N, C, Ho, Wo, 4))
    np.put_along_axis(dwin, arg[..., None], dout[..., None], axis=-1)
    dwin = dwin.reshape(N, C, Ho, Wo, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    dX = np.zeros((N, C, H, W))
    dX[:, :, :2 * Ho, :2 * Wo] = dwin.reshape(N, C, 2 * Ho, 2 * Wo)
    return dX


def dense_forward(x, W, b):
    return x @ W + b, x


def dense_backward(dout, x, W, need_dx: bool = True):
    dW = x.T @ dout
    db = dout.sum(axis=0)
    dx = dout @ W.T if need_dx else None
    return dx, dW, db


def relu(z):
    return np.maximum(z, 0.0)


def softplus(z):
    return np.logaddexp(0.0, z)


def sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def clamp01(z):
    return np.clip(z, 0.0, 1.0)
