"""Differentiable building blocks: linear, affine feature modulation, LSTM.

Every forward returns (output, cache) and every backward consumes that cache,
so the model can thread exact gradients end to end without any autograd
machinery. All arrays are float64.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from . import backend


def linear_forward(x, w, b):
    """x [N, Din] @ w [Din, Dout] + b."""
    y = x @ w + b
    return y, (x, w)


def linear_backward(dy, cache):
    x, w = cache
    dx = dy @ w.T
    dw = x.T @ dy
    db = dy.sum(axis=0)
    return dx, dw, db


def _reduce_to_shape(arr, shape):
    """Sum arr down to the broadcast-source shape."""
    out = arr
    while out.ndim > len(shape):
        out = out.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and out.shape[ax] != 1:
            out = out.sum(axis=ax, keepdims=True)
    return out


def film_modulate(x, alpha, beta):
    """Per-feature affine modulation y = alpha * x + beta.

    alpha/beta must match x on the trailing (feature) axis; leading axes
    broadcast, so one (alpha, beta) pair may cover all time-frequency positions.
    """
    alpha = np.asarray(alpha)
    beta = np.asarray(beta)
    x = np.asarray(x)
    if alpha.shape != beta.shape:
        raise ValidationError(f"alpha {alpha.shape} and beta {beta.shape} differ")
    if alpha.shape[-1] != x.shape[-1]:
        raise ValidationError(
            f"modulation width {alpha.shape[-1]} does not match features {x.shape[-1]}"
        )
    return alpha * x + beta


def film_backward(dy, x, alpha):
    dx = dy * alpha
    dalpha = _reduce_to_shape(dy * x, alpha.shape)
    dbeta = _reduce_to_shape(dy, alpha.shape)
    return dx, dalpha, dbeta


def lstm_forward(x, w, u, b, h0=None, c0=None):
    """Run an LSTM over axis 1 of x [nb, S, Din]; returns hidden states [nb, S, H].

    The input projection x@w+b is hoisted out of the recurrence as one matmul;
    the step kernel then only applies the recurrent weights.
    """
    nb, s, din = x.shape
    h = u.shape[0]
    if w.shape != (din, 4 * h):
        raise ValidationError(f"lstm input weights {w.shape} do not match ({din}, {4 * h})")
    xw = np.ascontiguousarray((x.reshape(-1, din) @ w + b).reshape(nb, s, 4 * h))
    if h0 is None:
        h0 = np.zeros((nb, h))
    if c0 is None:
        c0 = np.zeros((nb, h))
    h0 = np.ascontiguousarray(h0)
    c0 = np.ascontiguousarray(c0)
    hs, cs, gates = backend.lstm_seq_forward(xw, u, h0, c0)
    cache = (x, w, u, xw, h0, c0, hs, cs, gates)
    return hs, cache


def lstm_backward(dy, cache):
    """Returns (dx, dw, du, db, dh0, dc0) for the matching lstm_forward call."""
    x, w, u, xw, h0, c0, hs, cs, gates = cache
    nb, s, din = x.shape
    dxw, du, dh0, dc0 = backend.lstm_seq_backward(
        np.ascontiguousarray(dy), u, h0, c0, hs, cs, gates
    )
    flat = dxw.reshape(-1, dxw.shape[2])
    dx = (flat @ w.T).reshape(nb, s, din)
    dw = x.reshape(-1, din).T @ flat
    db = flat.sum(axis=0)
    return dx, dw, du, db, dh0, dc0


def bilstm_forward(x, w_f, u_f, b_f, w_b, u_b, b_b, h0_f=None, h0_b=None):
    """Bidirectional LSTM over axis 1; output concatenates both directions."""
    y_f, cache_f = lstm_forward(x, w_f, u_f, b_f, h0=h0_f)
    x_rev = np.ascontiguousarray(x[:, ::-1])
    y_br, cache_b = lstm_forward(x_rev, w_b, u_b, b_b, h0=h0_b)
    y = np.concatenate([y_f, y_br[:, ::-1]], axis=2)
    return y, (cache_f, cache_b)


def bilstm_backward(dy, cache):
    cache_f, cache_b = cache
    h = cache_f[4].shape[1]
    dx_f, dw_f, du_f, db_f, dh0_f, _ = lstm_backward(dy[:, :, :h], cache_f)
    dy_b = np.ascontiguousarray(dy[:, ::-1, h:])
    dx_br, dw_b, du_b, db_b, dh0_b, _ = lstm_backward(dy_b, cache_b)
    dx = dx_f + dx_br[:, ::-1]
    return dx, (dw_f, du_f, db_f, dw_b, du_b, db_b), (dh0_f, dh0_b)
