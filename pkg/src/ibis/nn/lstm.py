"""Bidirectional LSTM recurrence with exact backpropagation through time.

Both directions advance inside one time loop: the backward direction reads
the input reversed, and the two hidden/cell states ride in one
[batch x 2H] array so each step costs a single fused matmul. Parameters
are stored per direction with gate order (input, forget, output,
candidate); internally the gate columns are re-blocked as
[i_f i_b | f_f f_b | o_f o_b | g_f g_b] so one sigmoid covers the first
three gate pairs and every slice is contiguous. Only the final hidden
state of each direction is consumed downstream, so the backward pass seeds
the recurrence with a single gradient at the last step.
"""

from __future__ import annotations

import numpy as np

from .layers import sigmoid


def _interleave_columns(fwd: np.ndarray, bwd: np.ndarray, h: int) -> np.ndarray:
    """[.., 4H] + [.., 4H] -> [.., 8H] in paired-gate block layout."""
    out = np.empty((*fwd.shape[:-1], 8 * h), dtype=fwd.dtype)
    for gate in range(4):
        out[..., 2 * gate * h:(2 * gate + 1) * h] = fwd[..., gate * h:(gate + 1) * h]
        out[..., (2 * gate + 1) * h:(2 * gate + 2) * h] = bwd[..., gate * h:(gate + 1) * h]
    return out


def _deinterleave_columns(both: np.ndarray, h: int) -> tuple[np.ndarray, np.ndarray]:
    fwd = np.empty((*both.shape[:-1], 4 * h), dtype=both.dtype)
    bwd = np.empty_like(fwd)
    for gate in range(4):
        fwd[..., gate * h:(gate + 1) * h] = both[..., 2 * gate * h:(2 * gate + 1) * h]
        bwd[..., gate * h:(gate + 1) * h] = both[..., (2 * gate + 1) * h:(2 * gate + 2) * h]
    return fwd, bwd


def bilstm_run(x: np.ndarray, fwd_wx, fwd_wh, fwd_b, bwd_wx, bwd_wh, bwd_b):
    """Run both directions over x [B,T,C].

    Returns (h_final [B,2H] = [fwd_last | bwd_last], cache). The backward
    direction consumes x reversed in time.
    """
    bsz, steps, _ = x.shape
    h2 = fwd_wh.shape[0] * 2
    hidden = h2 // 2
    xr = x[:, ::-1, :]
    xw = _interleave_columns(x @ fwd_wx + fwd_b, xr @ bwd_wx + bwd_b, hidden)
    whcat = np.zeros((h2, 8 * hidden), dtype=np.result_type(x, fwd_wh))
    wf = _interleave_columns(fwd_wh, np.zeros_like(fwd_wh), hidden)
    wb = _interleave_columns(np.zeros_like(bwd_wh), bwd_wh, hidden)
    whcat[:hidden] = wf
    whcat[hidden:] = wb

    h = np.zeros((bsz, h2))
    c = np.zeros((bsz, h2))
    gate_states = np.empty((steps, bsz, 3 * h2))  # [i | f | o] pairs
    cand = np.empty((steps, bsz, h2))
    cells = np.empty((steps, bsz, h2))
    tanhc = np.empty((steps, bsz, h2))
    hiddens = np.empty((steps, bsz, h2))
    for t in range(steps):
        z = xw[:, t, :] + h @ whcat
        sig = sigmoid(z[:, :3 * h2])
        g = np.tanh(z[:, 3 * h2:])
        i, f, o = sig[:, :h2], sig[:, h2:2 * h2], sig[:, 2 * h2:]
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        gate_states[t] = sig
        cand[t], cells[t], tanhc[t], hiddens[t] = g, c, tc, h
    cache = (x, gate_states, cand, cells, tanhc, hiddens, whcat)
    return h, cache


def bilstm_backprop(cache, fwd_wx, bwd_wx, dh_final: np.ndarray):
    """Gradients of the bidirectional recurrence given d(loss)/d(h_final).

    Returns (dx, grads) with grads keyed like the parameter fields.
    """
    x, gate_states, cand, cells, tanhc, hiddens, whcat = cache
    bsz, steps, _ = x.shape
    h2 = whcat.shape[0]
    hidden = h2 // 2
    xr = x[:, ::-1, :]

    dh = dh_final.copy()
    dc = np.zeros((bsz, h2))
    dz_all = np.empty((steps, bsz, 4 * h2))
    zeros = np.zeros((bsz, h2))
    for t in range(steps - 1, -1, -1):
        sig = gate_states[t]
        i, f, o = sig[:, :h2], sig[:, h2:2 * h2], sig[:, 2 * h2:]
        g, tc = cand[t], tanhc[t]
        c_prev = cells[t - 1] if t > 0 else zeros
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        dz = dz_all[t]
        dz[:, :h2] = (dc * g) * i * (1.0 - i)
        dz[:, h2:2 * h2] = (dc * c_prev) * f * (1.0 - f)
        dz[:, 2 * h2:3 * h2] = do * o * (1.0 - o)
        dz[:, 3 * h2:] = (dc * i) * (1.0 - g * g)
        dh = dz @ whcat.T
        dc = dc * f

    # Recurrent weight gradient in one product over all steps at once.
    h_prev_all = np.concatenate([np.zeros((1, bsz, h2)), hiddens[:-1]], axis=0)
    dwh = h_prev_all.reshape(-1, h2).T @ dz_all.reshape(-1, 4 * h2)

    flat = dz_all.transpose(1, 0, 2)  # [B,T,8H]
    dz_f, dz_b = _deinterleave_columns(flat, hidden)
    dwh_f, _ = _deinterleave_columns(dwh[:hidden], hidden)
    _, dwh_b = _deinterleave_columns(dwh[hidden:], hidden)
    grads = {
        "fwd_wx": x.reshape(-1, x.shape[2]).T @ dz_f.reshape(-1, 4 * hidden),
        "fwd_wh": dwh_f,
        "fwd_b": dz_f.sum(axis=(0, 1)),
        "bwd_wx": xr.reshape(-1, x.shape[2]).T @ dz_b.reshape(-1, 4 * hidden),
        "bwd_wh": dwh_b,
        "bwd_b": dz_b.sum(axis=(0, 1)),
    }
    dx = dz_f @ fwd_wx.T + (dz_b @ bwd_wx.T)[:, ::-1, :]
    return dx, grads
