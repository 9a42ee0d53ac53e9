"""Differentiable building blocks, batched over the leading axis.

All arrays are float64. ReLU's subgradient at exactly zero is taken as
zero, and max-pool ties resolve to the earliest time index, so analytic
gradients are reproducible and finite-difference checkable.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv1d_same(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Same-padded 1-D convolution along time. x [B,T,C], w [K,C,F] -> [B,T,F]."""
    k = w.shape[0]
    pad = k // 2
    t = x.shape[1]
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    out = np.zeros((x.shape[0], t, w.shape[2]), dtype=np.result_type(x, w))
    for d in range(k):
        out += xp[:, d:d + t, :] @ w[d]
    return out + b


def conv1d_same_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray):
    """Gradients of conv1d_same. Returns (dx, dw, db)."""
    k = w.shape[0]
    pad = k // 2
    t = x.shape[1]
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    flat_dy = dy.reshape(-1, dy.shape[2])
    for d in range(k):
        dw[d] = xp[:, d:d + t, :].reshape(-1, x.shape[2]).T @ flat_dy
        dxp[:, d:d + t, :] += dy @ w[d].T
    dx = dxp[:, pad:pad + t, :] if pad else dxp
    return dx, dw, dy.sum(axis=(0, 1))


def maxpool3_same(x: np.ndarray):
    """Width-3 max pool along time, stride 1, same length. Returns (y, argmax)."""
    xp = np.pad(x, ((0, 0), (1, 1), (0, 0)), constant_values=-np.inf)
    win = sliding_window_view(xp, 3, axis=1)  # [B,T,C,3], window offsets -1,0,+1
    arg = win.argmax(axis=3)
    return win.max(axis=3), arg


def maxpool3_same_backward(x: np.ndarray, arg: np.ndarray, dy: np.ndarray) -> np.ndarray:
    b, t, c = x.shape
    positions = arg + np.arange(t)[None, :, None] - 1
    flat = (np.arange(b)[:, None, None] * t + positions) * c + np.arange(c)[None, None, :]
    summed = np.bincount(flat.ravel(), weights=dy.ravel(), minlength=b * t * c)
    return summed.reshape(b, t, c)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return dy * (x > 0.0)


def sigmoid(z: np.ndarray) -> np.ndarray:
    # Preactivations here stay far from the exp overflow range (~709), so
    # the one-branch form is safe and much cheaper than a masked version.
    return 1.0 / (1.0 + np.exp(-z))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood of integer labels under probs [B,K]."""
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(picked, 1e-300))))


def softmax_xent_backward(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(mean cross-entropy)/d(logits) for a softmax head."""
    d = probs.copy()
    d[np.arange(len(labels)), labels] -= 1.0
    return d / len(labels)
