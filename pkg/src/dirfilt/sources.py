"""Synthetic test sources for corpus-free scene rendering.

All generators are deterministic given (kind, length, rng state) and return
unit-RMS mono signals.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

SOURCE_KINDS = ("speech-noise", "tone", "white")

# long-form names accepted in JSON specs
_KIND_ALIASES = {"speech-shaped-noise": "speech-noise", "harmonic-tone": "tone", "white-noise": "white"}


def _unit_rms(x: np.ndarray) -> np.ndarray:
    rms = np.sqrt(np.mean(x * x))
    if rms <= 0:
        raise ValidationError("generated source has zero energy")
    return x / rms


def white_noise(n_samples: int, rng: np.random.Generator) -> np.ndarray:
    return _unit_rms(rng.standard_normal(n_samples))


def harmonic_tone(n_samples: int, rng: np.random.Generator, sample_rate: int = 16000) -> np.ndarray:
    """Fundamental in [110, 440] Hz with 1/k harmonic rolloff and random phases."""
    f0 = rng.uniform(110.0, 440.0)
    t = np.arange(n_samples) / sample_rate
    x = np.zeros(n_samples)
    k = 1
    while k * f0 < 0.45 * sample_rate:
        phase = rng.uniform(0.0, 2.0 * np.pi)
        x += np.sin(2.0 * np.pi * k * f0 * t + phase) / k
        k += 1
    return _unit_rms(x)


def speech_shaped_noise(
    n_samples: int, rng: np.random.Generator, sample_rate: int = 16000
) -> np.ndarray:
    """Noise with a speech-like long-term spectrum and slow amplitude modulation.

    Spectral envelope: first-order highpass at 100 Hz times first-order lowpass
    at 450 Hz, shaped in the frequency domain. A syllabic-rate (2-6 Hz) raised
    sinusoid modulates the amplitude so energy varies over time.
    """
    white = rng.standard_normal(n_samples)
    spec = np.fft.rfft(white)
    f = np.fft.rfftfreq(n_samples, d=1.0 / sample_rate)
    hp = (f / 100.0) / np.sqrt(1.0 + (f / 100.0) ** 2)
    lp = 1.0 / np.sqrt(1.0 + (f / 450.0) ** 2)
    shaped = np.fft.irfft(spec * hp * lp, n=n_samples)
    rate = rng.uniform(2.0, 6.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    t = np.arange(n_samples) / sample_rate
    mod = 0.6 + 0.4 * np.sin(2.0 * np.pi * rate * t + phase)
    return _unit_rms(shaped * mod)


def make_source(
    kind: str, n_samples: int, rng: np.random.Generator, sample_rate: int = 16000
) -> np.ndarray:
    if n_samples <= 0:
        raise ValidationError(f"n_samples must be positive, got {n_samples}")
    kind = _KIND_ALIASES.get(kind, kind)
    if kind == "speech-noise":
        return speech_shaped_noise(n_samples, rng, sample_rate)
    if kind == "tone":
        return harmonic_tone(n_samples, rng, sample_rate)
    if kind == "white":
        return white_noise(n_samples, rng)
    raise ValidationError(f"unknown source kind {kind!r}, expected one of {SOURCE_KINDS}")
