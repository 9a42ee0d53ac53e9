"""Model definitions: Inception-style 1-D feature extractor, bidirectional
LSTM, and the softmax heads, with exact analytic gradients.

Traces enter time-major with velocity bins as input channels. The Inception
block runs kernel 3/5/7 convolutions plus a pooled 1x1 branch in parallel
and concatenates along channels, preserving sequence length; the BiLSTM
digests the sequence in both directions and classifies from the
concatenated final states. The baseline variant replaces the recurrence
with global average pooling over time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch
from . import layers as L
from .lstm import bilstm_backprop, bilstm_run

NUM_CLASSES = 5
KERNEL_SIZES = (3, 5, 7)


@dataclass
class InceptionBlockParams:
    """Three parallel convolutions (kernels 3/5/7, filters each) plus a
    width-3 max-pool branch followed by a 1x1 convolution."""

    w3: np.ndarray
    b3: np.ndarray
    w5: np.ndarray
    b5: np.ndarray
    w7: np.ndarray
    b7: np.ndarray
    wp: np.ndarray  # [C, F_pool], the 1x1 conv
    bp: np.ndarray

    @property
    def channels(self) -> int:
        return self.w3.shape[1]

    @property
    def out_channels(self) -> int:
        return self.w3.shape[2] + self.w5.shape[2] + self.w7.shape[2] + self.wp.shape[1]


@dataclass
class BiLstmParams:
    fwd_wx: np.ndarray
    fwd_wh: np.ndarray
    fwd_b: np.ndarray
    bwd_wx: np.ndarray
    bwd_wh: np.ndarray
    bwd_b: np.ndarray

    @property
    def hidden(self) -> int:
        return self.fwd_wh.shape[0]


@dataclass
class DenseParams:
    w: np.ndarray
    b: np.ndarray


def _combined_weights(params: InceptionBlockParams) -> np.ndarray:
    """All three conv branches as one [7*C x 3F] matrix over the width-7
    window (the 3- and 5-wide kernels occupy its centered rows)."""
    c = params.channels
    f3, f5, f7 = params.w3.shape[2], params.w5.shape[2], params.w7.shape[2]
    w = np.zeros((7 * c, f3 + f5 + f7), dtype=params.w7.dtype)
    w[2 * c:5 * c, :f3] = params.w3.reshape(3 * c, f3)
    w[c:6 * c, f3:f3 + f5] = params.w5.reshape(5 * c, f5)
    w[:, f3 + f5:] = params.w7.reshape(7 * c, f7)
    return w


def _window7(x: np.ndarray) -> np.ndarray:
    """[B,T,7C] view of the width-7 same-padded window around each step."""
    b, t, c = x.shape
    xp = np.pad(x, ((0, 0), (3, 3), (0, 0)))
    win = sliding_window_view(xp, 7, axis=1)  # [B,T,C,7]
    return win.transpose(0, 1, 3, 2).reshape(b, t, 7 * c)


def _inception_fwd(params: InceptionBlockParams, x: np.ndarray):
    win = _window7(x)
    bias = np.concatenate([params.b3, params.b5, params.b7])
    pre_conv = win @ _combined_weights(params) + bias
    pooled, arg = L.maxpool3_same(x)
    prep = pooled @ params.wp + params.bp
    out = np.concatenate([L.relu(pre_conv), L.relu(prep)], axis=2)
    cache = (x, win, pre_conv, pooled, arg, prep)
    return out, cache


def _inception_bwd(params: InceptionBlockParams, cache, dout: np.ndarray):
    x, win, pre_conv, pooled, arg, prep = cache
    c = params.channels
    f3, f5, f7 = params.w3.shape[2], params.w5.shape[2], params.w7.shape[2]
    nconv = f3 + f5 + f7
    dconv = L.relu_backward(pre_conv, dout[:, :, :nconv])
    dp = L.relu_backward(prep, dout[:, :, nconv:])

    flat_win = win.reshape(-1, 7 * c)
    flat_d = dconv.reshape(-1, nconv)
    dw_comb = flat_win.T @ flat_d
    db = flat_d.sum(axis=0)
    grads = {
        "w3": dw_comb[2 * c:5 * c, :f3].reshape(3, c, f3),
        "b3": db[:f3],
        "w5": dw_comb[c:6 * c, f3:f3 + f5].reshape(5, c, f5),
        "b5": db[f3:f3 + f5],
        "w7": dw_comb[:, f3 + f5:].reshape(7, c, f7),
        "b7": db[f3 + f5:],
        "wp": pooled.reshape(-1, c).T @ dp.reshape(-1, dp.shape[2]),
        "bp": dp.sum(axis=(0, 1)),
    }

    # d(input): scatter the windowed gradient back through the padding.
    dwin = (flat_d @ _combined_weights(params).T).reshape(x.shape[0], x.shape[1], 7, c)
    t = x.shape[1]
    dxp = np.zeros((x.shape[0], t + 6, c), dtype=dwin.dtype)
    for d in range(7):
        dxp[:, d:d + t, :] += dwin[:, :, d, :]
    dx = dxp[:, 3:3 + t, :]
    dx += L.maxpool3_same_backward(x, arg, dp @ params.wp.T)
    return dx, grads


def _as_batch(trace: np.ndarray) -> tuple[np.ndarray, bool]:
    arr = np.asarray(trace, dtype=np.float64)
    if arr.ndim == 2:
        return arr[np.newaxis], True
    if arr.ndim == 3:
        return arr, False
    raise ShapeMismatch(f"expected [time x channels] or a batch of them, got {arr.shape}")


def inception_forward(trace: np.ndarray, params: InceptionBlockParams) -> np.ndarray:
    """Feature sequence of one trace (or batch): time length is preserved."""
    x, squeeze = _as_batch(trace)
    if x.shape[2] != params.channels:
        raise ShapeMismatch(
            f"trace has {x.shape[2]} channels, block expects {params.channels}"
        )
    out, _ = _inception_fwd(params, x)
    return out[0] if squeeze else out


def bilstm_forward(seq: np.ndarray, params: BiLstmParams, head: DenseParams) -> np.ndarray:
    """Class probabilities from a feature sequence (or batch of sequences)."""
    x, squeeze = _as_batch(seq)
    if x.shape[2] != params.fwd_wx.shape[0]:
        raise ShapeMismatch(
            f"sequence has {x.shape[2]} channels, lstm expects {params.fwd_wx.shape[0]}"
        )
    h_final, _ = bilstm_run(x, params.fwd_wx, params.fwd_wh, params.fwd_b,
                            params.bwd_wx, params.bwd_wh, params.bwd_b)
    probs = L.softmax(h_final @ head.w + head.b)
    return probs[0] if squeeze else probs


@dataclass
class HybridModel:
    """Inception block, BiLSTM, and dense softmax head over five classes."""

    inception: InceptionBlockParams
    bilstm: BiLstmParams
    head: DenseParams

    kind = "hybrid"

    def parameters(self) -> dict[str, np.ndarray]:
        p = {f"inception.{k}": v for k, v in vars(self.inception).items()}
        p.update({f"bilstm.{k}": v for k, v in vars(self.bilstm).items()})
        p.update({"head.w": self.head.w, "head.b": self.head.b})
        return p

    def forward(self, x: np.ndarray):
        """Batched forward pass. Returns (probs [B,5], cache)."""
        feats, inc_cache = _inception_fwd(self.inception, x)
        p = self.bilstm
        h_final, lstm_cache = bilstm_run(feats, p.fwd_wx, p.fwd_wh, p.fwd_b,
                                         p.bwd_wx, p.bwd_wh, p.bwd_b)
        probs = L.softmax(h_final @ self.head.w + self.head.b)
        return probs, (inc_cache, lstm_cache, h_final)

    def backward(self, cache, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        inc_cache, lstm_cache, h_final = cache
        grads = {
            "head.w": h_final.T @ dlogits,
            "head.b": dlogits.sum(axis=0),
        }
        dfinal = dlogits @ self.head.w.T
        dfeats, lstm_grads = bilstm_backprop(lstm_cache, self.bilstm.fwd_wx,
                                             self.bilstm.bwd_wx, dfinal)
        grads.update({f"bilstm.{k}": v for k, v in lstm_grads.items()})
        _, inc_grads = _inception_bwd(self.inception, inc_cache, dfeats)
        grads.update({f"inception.{k}": v for k, v in inc_grads.items()})
        return grads


@dataclass
class BaselineModel:
    """Inception block with global average pooling over time: the
    convolution-only reference the hybrid is compared against."""

    inception: InceptionBlockParams
    head: DenseParams

    kind = "inception_only"

    def parameters(self) -> dict[str, np.ndarray]:
        p = {f"inception.{k}": v for k, v in vars(self.inception).items()}
        p.update({"head.w": self.head.w, "head.b": self.head.b})
        return p

    def forward(self, x: np.ndarray):
        feats, inc_cache = _inception_fwd(self.inception, x)
        pooled = feats.mean(axis=1)
        probs = L.softmax(pooled @ self.head.w + self.head.b)
        return probs, (inc_cache, feats.shape[1], pooled)

    def backward(self, cache, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        inc_cache, steps, pooled = cache
        grads = {
            "head.w": pooled.T @ dlogits,
            "head.b": dlogits.sum(axis=0),
        }
        dfeats = np.repeat((dlogits @ self.head.w.T)[:, np.newaxis, :] / steps, steps, axis=1)
        _, inc_grads = _inception_bwd(self.inception, inc_cache, dfeats)
        grads.update({f"inception.{k}": v for k, v in inc_grads.items()})
        return grads


def _init_inception(rng: np.random.Generator, channels: int, filters: int,
                    pool_filters: int) -> InceptionBlockParams:
    def conv(k):
        return rng.normal(0.0, 1.0 / np.sqrt(k * channels), size=(k, channels, filters))

    return InceptionBlockParams(
        w3=conv(3), b3=np.zeros(filters),
        w5=conv(5), b5=np.zeros(filters),
        w7=conv(7), b7=np.zeros(filters),
        wp=rng.normal(0.0, 1.0 / np.sqrt(channels), size=(channels, pool_filters)),
        bp=np.zeros(pool_filters),
    )


def _init_lstm_dir(rng: np.random.Generator, channels: int, hidden: int):
    wx = rng.normal(0.0, 1.0 / np.sqrt(channels), size=(channels, 4 * hidden))
    wh = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(hidden, 4 * hidden))
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0  # forget gate bias
    return wx, wh, b


def init_hybrid(channels: int, filters: int = 16, pool_filters: int = 16,
                hidden: int = 64, seed: int = 0) -> HybridModel:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x1B15])))
    inception = _init_inception(rng, channels, filters, pool_filters)
    feat = inception.out_channels
    fwd = _init_lstm_dir(rng, feat, hidden)
    bwd = _init_lstm_dir(rng, feat, hidden)
    head = DenseParams(
        w=rng.normal(0.0, 1.0 / np.sqrt(2 * hidden), size=(2 * hidden, NUM_CLASSES)),
        b=np.zeros(NUM_CLASSES),
    )
    return HybridModel(
        inception=inception,
        bilstm=BiLstmParams(fwd_wx=fwd[0], fwd_wh=fwd[1], fwd_b=fwd[2],
                            bwd_wx=bwd[0], bwd_wh=bwd[1], bwd_b=bwd[2]),
        head=head,
    )


def init_baseline(channels: int, filters: int = 16, pool_filters: int = 16,
                  seed: int = 0) -> BaselineModel:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x1B16])))
    inception = _init_inception(rng, channels, filters, pool_filters)
    head = DenseParams(
        w=rng.normal(0.0, 1.0 / np.sqrt(inception.out_channels),
                     size=(inception.out_channels, NUM_CLASSES)),
        b=np.zeros(NUM_CLASSES),
    )
    return BaselineModel(inception=inception, head=head)


def predict_proba(model, traces, chunk: int = 256) -> np.ndarray:
    """Probability vectors for one trace or a sequence of traces, in order."""
    single = isinstance(traces, np.ndarray) and traces.ndim == 2
    batch = np.asarray(traces, dtype=np.float64)
    if batch.ndim == 2:
        batch = batch[np.newaxis]
    parts = [model.forward(batch[i:i + chunk])[0] for i in range(0, len(batch), chunk)]
    probs = np.concatenate(parts, axis=0)
    return probs[0] if single else probs
