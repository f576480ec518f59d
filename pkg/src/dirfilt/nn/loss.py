"""Batch-aggregated normalized L1 loss on time-domain signals.

loss = sum_b ||z_b - zhat_b||_1 / (sum_b ||z_b||_1 + epsilon)

The denominator depends only on the targets, so the gradient with respect to
an estimate sample is sign(zhat - z) / denominator.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError

DEFAULT_LOSS_EPS = 1e-7


def _as_batch(signals) -> np.ndarray:
    arr = np.asarray(signals, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValidationError(f"expected [B, n] signals, got shape {arr.shape}")
    return arr


def loss_l1(targets, estimates, epsilon: float = DEFAULT_LOSS_EPS) -> float:
    z = _as_batch(targets)
    zh = _as_batch(estimates)
    if z.shape != zh.shape:
        raise ValidationError(f"target shape {z.shape} != estimate shape {zh.shape}")
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    return float(np.sum(np.abs(z - zh)) / (np.sum(np.abs(z)) + epsilon))


def loss_l1_grad(targets, estimates, epsilon: float = DEFAULT_LOSS_EPS):
    """Returns (loss, dloss/destimates [B, n])."""
    z = _as_batch(targets)
    zh = _as_batch(estimates)
    if z.shape != zh.shape:
        raise ValidationError(f"target shape {z.shape} != estimate shape {zh.shape}")
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    denom = np.sum(np.abs(z)) + epsilon
    diff = zh - z
    return float(np.sum(np.abs(diff)) / denom), np.sign(diff) / denom
