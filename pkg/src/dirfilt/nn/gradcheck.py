"""Central-difference verification of the analytic gradients.

The full chain under test is loss_l1(istft(mask * reference)), i.e. exactly
what one training step differentiates. Relative error uses a floored
denominator so near-zero gradients are compared on an absolute scale instead
of amplifying finite-difference noise.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..errors import NumericalError
from .model import ArchConfig, init_params
from .train import TrainBatch, compute_loss, compute_loss_and_grads


def randomized_params(cfg: ArchConfig, rng: np.random.Generator, jitter: float = 0.2) -> dict:
    """Initialization plus noise on every array, so no gradient path sits at a
    special point (identity FiLM maps, zero biases)."""
    params = init_params(cfg, rng)
    for k in params:
        params[k] = params[k] + jitter * rng.standard_normal(params[k].shape)
    return params


def grad_check(
    params: dict,
    arch_cfg: ArchConfig,
    batch: TrainBatch,
    epsilon: float = 1e-7,
    fd_step: float = 1e-5,
    samples_per_group: int = 4,
    rng: Optional[np.random.Generator] = None,
    denom_floor: float = 1e-4,
) -> dict:
    """Compare analytic and finite-difference gradients per parameter group.

    Returns {name: max relative error} plus an "overall" entry.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    _, grads = compute_loss_and_grads(params, arch_cfg, batch, epsilon)
    report = {}
    overall = 0.0
    for name in sorted(params):
        arr = params[name]
        analytic = grads[name]
        if not np.all(np.isfinite(analytic)):
            raise NumericalError(f"non-finite analytic gradient in {name}")
        k = min(samples_per_group, arr.size)
        idxs = rng.choice(arr.size, size=k, replace=False)
        worst = 0.0
        flat = arr.reshape(-1)
        for idx in idxs:
            saved = flat[idx]
            flat[idx] = saved + fd_step
            lo_hi = compute_loss(params, arch_cfg, batch, epsilon)
            flat[idx] = saved - fd_step
            lo_lo = compute_loss(params, arch_cfg, batch, epsilon)
            flat[idx] = saved
            fd = (lo_hi - lo_lo) / (2.0 * fd_step)
            an = float(analytic.reshape(-1)[idx])
            denom = max(abs(fd), abs(an), denom_floor)
            worst = max(worst, abs(fd - an) / denom)
        report[name] = worst
        overall = max(overall, worst)
    report["overall"] = overall
    return report
