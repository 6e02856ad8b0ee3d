"""Pure-numpy LSTM sequence kernels (fallback backend).

Shapes: x (T, B, I), wx (I, 4H), wh (H, 4H), b (4H,), h0/c0 (B, H).
Gate order inside the 4H axis is [input, forget, candidate, output].
Both backends implement exactly these two functions.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(z):
    # exp(-logaddexp(0, -z)) is exact and overflow-safe
    return np.exp(-np.logaddexp(0.0, -z))


def lstm_forward(x, wx, wh, b, h0, c0):
    """Run an LSTM over a (T, B, I) batch of sequences.

    Returns (h, c, gates): hidden states (T, B, H), cell states (T, B, H),
    and post-activation gates (T, B, 4H) cached for the backward pass.
    """
    T, B, _ = x.shape
    H = wh.shape[0]
    h = np.empty((T, B, H))
    c = np.empty((T, B, H))
    gates = np.empty((T, B, 4 * H))
    h_prev, c_prev = h0, c0
    for t in range(T):
        z = x[t] @ wx + h_prev @ wh + b
        i = _sigmoid(z[:, 0 * H : 1 * H])
        f = _sigmoid(z[:, 1 * H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = _sigmoid(z[:, 3 * H : 4 * H])
        c_t = f * c_prev + i * g
        h_t = o * np.tanh(c_t)
        gates[t, :, 0 * H : 1 * H] = i
        gates[t, :, 1 * H : 2 * H] = f
        gates[t, :, 2 * H : 3 * H] = g
        gates[t, :, 3 * H : 4 * H] = o
        h[t], c[t] = h_t, c_t
        h_prev, c_prev = h_t, c_t
    return h, c, gates


def lstm_backward(x, wx, wh, h, c, gates, h0, c0, dh):
    """Reverse-accumulate gradients through lstm_forward.

    dh (T, B, H) carries the loss gradient flowing into each hidden state
    from outside consumers.  Returns (dx, dwx, dwh, db, dh0, dc0).
    """
    T, B, I = x.shape
    H = wh.shape[0]
    dx = np.empty((T, B, I))
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * H)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        i = gates[t, :, 0 * H : 1 * H]
        f = gates[t, :, 1 * H : 2 * H]
        g = gates[t, :, 2 * H : 3 * H]
        o = gates[t, :, 3 * H : 4 * H]
        c_prev = c[t - 1] if t > 0 else c0
        h_prev = h[t - 1] if t > 0 else h0
        tanh_c = np.tanh(c[t])

        dh_t = dh[t] + dh_next
        dc_t = dc_next + dh_t * o * (1.0 - tanh_c * tanh_c)
        dz = np.concatenate(
            [
                dc_t * g * i * (1.0 - i),
                dc_t * c_prev * f * (1.0 - f),
                dc_t * i * (1.0 - g * g),
                dh_t * tanh_c * o * (1.0 - o),
            ],
            axis=1,
        )
        dx[t] = dz @ wx.T
        dwx += x[t].T @ dz
        dwh += h_prev.T @ dz
        db += dz.sum(axis=0)
        dh_next = dz @ wh.T
        dc_next = dc_t * f
    return dx, dwx, dwh, db, dh_next, dc_next
