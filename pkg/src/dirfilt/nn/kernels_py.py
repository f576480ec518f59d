"""Pure-NumPy LSTM sequence kernels.

Reference implementation of the recurrence kernels; the compiled extension in
``_kernels.pyx`` follows the exact same contract. Gate order everywhere is
(input, forget, cell, output) packed along the last axis.

Shapes:
    xw:    [nb, S, 4H]  input projections plus bias, precomputed as x @ W + b
    u:     [H, 4H]      recurrent weights, applied as h_prev @ u
    h0/c0: [nb, H]      initial hidden/cell state
    h/c:   [nb, S, H]   per-step hidden/cell states
    gates: [nb, S, 4H]  post-activation gate values (cached for backward)
"""

import numpy as np
from scipy.special import expit as _sigmoid

COMPILED = False


def lstm_seq_forward(xw, u, h0, c0):
    nb, steps, h4 = xw.shape
    hid = h4 // 4
    h = np.empty((nb, steps, hid))
    c = np.empty((nb, steps, hid))
    gates = np.empty((nb, steps, h4))
    h_prev = h0
    c_prev = c0
    for s in range(steps):
        pre = xw[:, s, :] + h_prev @ u
        gi = _sigmoid(pre[:, :hid])
        gf = _sigmoid(pre[:, hid : 2 * hid])
        gg = np.tanh(pre[:, 2 * hid : 3 * hid])
        go = _sigmoid(pre[:, 3 * hid :])
        c_prev = gf * c_prev + gi * gg
        h_prev = go * np.tanh(c_prev)
        gates[:, s, :hid] = gi
        gates[:, s, hid : 2 * hid] = gf
        gates[:, s, 2 * hid : 3 * hid] = gg
        gates[:, s, 3 * hid :] = go
        h[:, s, :] = h_prev
        c[:, s, :] = c_prev
    return h, c, gates


def lstm_seq_backward(dh_out, u, h0, c0, h, c, gates):
    """Backprop through the sequence; returns (dxw, du, dh0, dc0)."""
    nb, steps, hid = h.shape
    dxw = np.empty((nb, steps, 4 * hid))
    du = np.zeros_like(u)
    dh_rec = np.zeros((nb, hid))
    dc_rec = np.zeros((nb, hid))
    for s in range(steps - 1, -1, -1):
        gi = gates[:, s, :hid]
        gf = gates[:, s, hid : 2 * hid]
        gg = gates[:, s, 2 * hid : 3 * hid]
        go = gates[:, s, 3 * hid :]
        c_prev = c[:, s - 1, :] if s > 0 else c0
        h_prev = h[:, s - 1, :] if s > 0 else h0
        tanh_c = np.tanh(c[:, s, :])

        dh = dh_out[:, s, :] + dh_rec
        dc = dc_rec + dh * go * (1.0 - tanh_c * tanh_c)
        dpre = np.concatenate(
            [
                dc * gg * gi * (1.0 - gi),
                dc * c_prev * gf * (1.0 - gf),
                dc * gi * (1.0 - gg * gg),
                dh * tanh_c * go * (1.0 - go),
            ],
            axis=1,
        )
        dxw[:, s, :] = dpre
        du += h_prev.T @ dpre
        dh_rec = dpre @ u.T
        dc_rec = dc * gf
    return dxw, du, dh_rec, dc_rec
