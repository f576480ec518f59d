"""Training loop: adaptive-moment SGD over scene/pattern batches.

A batch bundles the network inputs with the time-domain targets; the loss is
computed after mask application and inverse STFT, so its gradient propagates
through the synthesis path (istft adjoint), the complex mask product, and the
network itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import NumericalError, ValidationError
from ..stft import Spectrogram, StftConfig, istft, istft_adjoint
from .loss import DEFAULT_LOSS_EPS, loss_l1_grad
from .model import ArchConfig, backward, forward, init_params, reference_spectrograms


@dataclass
class TrainBatch:
    """Inputs and targets for one optimization step."""

    features: np.ndarray  # [B, T, F, 2Q]
    patterns: np.ndarray  # [B, L] or [B, T, L]
    targets: np.ndarray  # [B, n] time-domain target signals
    stft_cfg: StftConfig

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.patterns = np.asarray(self.patterns, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.features.ndim != 4:
            raise ValidationError(f"features must be [B, T, F, 2Q], got {self.features.shape}")
        if self.targets.ndim != 2 or self.targets.shape[0] != self.features.shape[0]:
            raise ValidationError("targets must be [B, n] matching the feature batch")

    @property
    def batch_size(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 10
    epochs: int = 100
    epsilon: float = DEFAULT_LOSS_EPS
    rng_seed: int = 0
    max_steps: Optional[int] = None
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: Optional[float] = None

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "epochs", "epsilon", "adam_eps"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ValidationError("adam betas must lie in [0, 1)")


def estimate_signal(mask_row: np.ndarray, ref_row: np.ndarray, stft_cfg: StftConfig, n: int):
    spec = Spectrogram(data=mask_row * ref_row, config=stft_cfg)
    return istft(spec, length=n)


def compute_loss(params: dict, arch_cfg: ArchConfig, batch: TrainBatch, epsilon: float = DEFAULT_LOSS_EPS) -> float:
    mask = forward(params, arch_cfg, batch.features, batch.patterns)
    refs = reference_spectrograms(batch.features, arch_cfg)
    n = batch.targets.shape[1]
    est = np.stack(
        [estimate_signal(mask[i], refs[i], batch.stft_cfg, n) for i in range(batch.batch_size)]
    )
    loss, _ = loss_l1_grad(batch.targets, est, epsilon)
    return loss


def compute_loss_and_grads(
    params: dict, arch_cfg: ArchConfig, batch: TrainBatch, epsilon: float = DEFAULT_LOSS_EPS
):
    """One forward/backward pass; returns (loss, parameter gradient dict)."""
    mask, cache = forward(params, arch_cfg, batch.features, batch.patterns, want_cache=True)
    refs = reference_spectrograms(batch.features, arch_cfg)
    bsz, n_frames = mask.shape[0], mask.shape[1]
    n = batch.targets.shape[1]
    est = np.stack(
        [estimate_signal(mask[i], refs[i], batch.stft_cfg, n) for i in range(bsz)]
    )
    loss, dest = loss_l1_grad(batch.targets, est, epsilon)
    # chain: estimate -> masked spectrogram -> mask (grad of complex product
    # against the fixed reference is multiplication by its conjugate)
    dmask = np.empty_like(mask)
    for i in range(bsz):
        dspec = istft_adjoint(dest[i], batch.stft_cfg, n_frames)
        dmask[i] = dspec * np.conj(refs[i])
    grads, _ = backward(params, arch_cfg, cache, dmask)
    return loss, grads


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0

    @classmethod
    def for_params(cls, params: dict) -> "AdamState":
        return cls(
            m={k: np.zeros_like(v) for k, v in params.items()},
            v={k: np.zeros_like(v) for k, v in params.items()},
        )


def adam_update(params: dict, grads: dict, state: AdamState, cfg: TrainConfig) -> None:
    """In-place adaptive-moment update with bias correction."""
    state.step += 1
    b1, b2 = cfg.beta1, cfg.beta2
    bc1 = 1.0 - b1**state.step
    bc2 = 1.0 - b2**state.step
    for k, g in grads.items():
        if cfg.grad_clip is not None:
            g = np.clip(g, -cfg.grad_clip, cfg.grad_clip)
        state.m[k] = b1 * state.m[k] + (1.0 - b1) * g
        state.v[k] = b2 * state.v[k] + (1.0 - b2) * g * g
        m_hat = state.m[k] / bc1
        v_hat = state.v[k] / bc2
        params[k] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


@dataclass
class TrainResult:
    params: dict
    step_losses: list = field(default_factory=list)
    epoch_losses: list = field(default_factory=list)


def train(
    arch_cfg: ArchConfig,
    train_cfg: TrainConfig,
    batches: Sequence[TrainBatch],
    max_steps: Optional[int] = None,
    init: Optional[dict] = None,
    callback=None,
) -> TrainResult:
    """Cycle through `batches` until max_steps updates have been applied.

    Deterministic given the seed: initialization, batch order, and arithmetic
    are all fixed. A non-finite loss aborts with diagnostics rather than
    silently continuing.
    """
    batches = list(batches)
    if not batches:
        raise ValidationError("no training batches supplied")
    steps = max_steps if max_steps is not None else train_cfg.max_steps
    if steps is None:
        steps = train_cfg.epochs * len(batches)
    rng = np.random.default_rng(train_cfg.rng_seed)
    if init is not None:
        params = {k: v.copy() for k, v in init.items()}
    else:
        params = init_params(arch_cfg, rng)
    state = AdamState.for_params(params)
    result = TrainResult(params=params)
    epoch_acc = []
    for step in range(steps):
        batch = batches[step % len(batches)]
        loss, grads = compute_loss_and_grads(params, arch_cfg, batch, train_cfg.epsilon)
        if not np.isfinite(loss):
            raise NumericalError(
                f"training diverged at step {step + 1}/{steps}: loss={loss!r}"
            )
        adam_update(params, grads, state, train_cfg)
        result.step_losses.append(loss)
        epoch_acc.append(loss)
        if (step + 1) % len(batches) == 0:
            result.epoch_losses.append(float(np.mean(epoch_acc)))
            epoch_acc = []
        if callback is not None:
            callback(step, loss)
    return result
