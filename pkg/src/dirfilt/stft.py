"""Forward/inverse STFT and network input stacking.

One-sided spectra throughout (F = win_len/2 + 1). The default window pair is
square-root periodic Hann for both analysis and synthesis at 50% hop, which
satisfies the constant-overlap-add condition; reconstruction divides by the
accumulated window product, so the interior of the signal is recovered to
machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError

_WINDOW_NAMES = ("sqrt-hann",)
_OLA_EPS = 1e-10


def _periodic_hann(n: int) -> np.ndarray:
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))


@dataclass(frozen=True)
class StftConfig:
    sample_rate: int = 16000
    win_len: int = 512
    hop: int = 256
    window: str = "sqrt-hann"

    def __post_init__(self):
        if self.win_len <= 0 or self.win_len % 2 != 0:
            raise ValidationError(f"win_len must be positive and even, got {self.win_len}")
        if not 0 < self.hop <= self.win_len:
            raise ValidationError(f"hop must satisfy 0 < hop <= win_len, got {self.hop}")
        if self.window not in _WINDOW_NAMES:
            raise ValidationError(f"unknown window pair {self.window!r}")
        wa, ws = self.analysis_window(), self.synthesis_window()
        ola = _overlap_add_envelope(wa * ws, self.win_len, self.hop, 8)
        interior = ola[self.win_len : -self.win_len]
        if interior.size and (np.ptp(interior) > 1e-10 or interior.min() < 1e-3):
            raise ValidationError("window pair does not satisfy the overlap-add condition")

    @property
    def n_bins(self) -> int:
        return self.win_len // 2 + 1

    def analysis_window(self) -> np.ndarray:
        return np.sqrt(_periodic_hann(self.win_len))

    def synthesis_window(self) -> np.ndarray:
        return np.sqrt(_periodic_hann(self.win_len))

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.win_len:
            raise ValidationError(
                f"signal of {n_samples} samples is shorter than win_len={self.win_len}"
            )
        return 1 + (n_samples - self.win_len) // self.hop

    def frame_to_sample(self, frame: int) -> int:
        """First time-domain sample index influenced by the given frame."""
        return frame * self.hop


def _overlap_add_envelope(win_product, win_len, hop, n_frames):
    env = np.zeros(win_len + (n_frames - 1) * hop)
    for k in range(n_frames):
        env[k * hop : k * hop + win_len] += win_product
    return env


@dataclass(eq=False)
class Spectrogram:
    """Complex time-frequency array, frames along axis 0, bins along axis 1."""

    data: np.ndarray
    config: StftConfig

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ValidationError(f"spectrogram data must be 2-D, got shape {data.shape}")
        if data.shape[1] != self.config.n_bins:
            raise ValidationError(
                f"expected {self.config.n_bins} bins for win_len={self.config.win_len}, "
                f"got {data.shape[1]}"
            )
        self.data = data.astype(np.complex128, copy=False)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[1]


def stft(signal, cfg: StftConfig) -> Spectrogram:
    """Windowed one-sided FFT frames of a real signal."""
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise ValidationError("stft expects a 1-D signal")
    n_frames = cfg.n_frames(x.size)
    idx = cfg.hop * np.arange(n_frames)[:, None] + np.arange(cfg.win_len)[None, :]
    frames = x[idx] * cfg.analysis_window()[None, :]
    return Spectrogram(data=np.fft.rfft(frames, axis=1), config=cfg)


def istft(spec: Spectrogram, length: int | None = None) -> np.ndarray:
    """Overlap-add inverse; exact on the interior, zero where no frame reaches."""
    cfg = spec.config
    frames = np.fft.irfft(spec.data, n=cfg.win_len, axis=1) * cfg.synthesis_window()[None, :]
    n_frames = spec.n_frames
    total = cfg.win_len + (n_frames - 1) * cfg.hop
    out = np.zeros(total)
    for k in range(n_frames):
        out[k * cfg.hop : k * cfg.hop + cfg.win_len] += frames[k]
    env = _overlap_add_envelope(
        cfg.analysis_window() * cfg.synthesis_window(), cfg.win_len, cfg.hop, n_frames
    )
    good = env > _OLA_EPS
    out[good] /= env[good]
    out[~good] = 0.0
    if length is not None:
        if length <= total:
            out = out[:length]
        else:
            out = np.concatenate([out, np.zeros(length - total)])
    return out


def istft_adjoint(grad_signal, cfg: StftConfig, n_frames: int) -> np.ndarray:
    """Adjoint of the linear map istft: real gradient signal -> complex [T, F].

    Used by the training backward pass. The irfft adjoint is rfft scaled by
    gamma/N with gamma = 1 at DC and Nyquist and 2 elsewhere.
    """
    total = cfg.win_len + (n_frames - 1) * cfg.hop
    g = np.zeros(total)
    gs = np.asarray(grad_signal, dtype=float)
    g[: min(gs.size, total)] = gs[:total]
    env = _overlap_add_envelope(
        cfg.analysis_window() * cfg.synthesis_window(), cfg.win_len, cfg.hop, n_frames
    )
    good = env > _OLA_EPS
    g = np.where(good, g / np.where(good, env, 1.0), 0.0)
    idx = cfg.hop * np.arange(n_frames)[:, None] + np.arange(cfg.win_len)[None, :]
    gframes = g[idx] * cfg.synthesis_window()[None, :]
    gamma = np.full(cfg.n_bins, 2.0)
    gamma[0] = 1.0
    gamma[-1] = 1.0
    return np.fft.rfft(gframes, axis=1) * (gamma / cfg.win_len)


def stack_features(specs: Sequence[Spectrogram]) -> np.ndarray:
    """Stack Q spectrograms into a [1, T, F, 2Q] real block (re/im interleaved)."""
    if len(specs) == 0:
        raise ValidationError("need at least one spectrogram")
    shape = specs[0].data.shape
    cfg = specs[0].config
    for s in specs[1:]:
        if s.data.shape != shape or s.config != cfg:
            raise ValidationError("all spectrograms must share shape and config")
    t, f = shape
    block = np.empty((1, t, f, 2 * len(specs)))
    for q, s in enumerate(specs):
        block[0, :, :, 2 * q] = s.data.real
        block[0, :, :, 2 * q + 1] = s.data.imag
    return block


def unstack_features(block, cfg: StftConfig) -> list:
    """Inverse of stack_features for a single batch item."""
    arr = np.asarray(block)
    if arr.ndim != 4 or arr.shape[0] != 1 or arr.shape[3] % 2 != 0:
        raise ValidationError(f"expected [1, T, F, 2Q] block, got shape {arr.shape}")
    specs = []
    for q in range(arr.shape[3] // 2):
        data = arr[0, :, :, 2 * q] + 1j * arr[0, :, :, 2 * q + 1]
        specs.append(Spectrogram(data=data, config=cfg))
    return specs
