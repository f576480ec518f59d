"""WAV file I/O: mono or multichannel, 32-bit float or 16-bit PCM."""

from __future__ import annotations

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import IngestionError

DEFAULT_SAMPLE_RATE = 16000

_PCM16_SCALE = 32768.0


def read_wav(path) -> tuple:
    """Read a WAV file, returning (sample_rate, float64 array).

    Output shape is [n] for mono and [n, channels] otherwise, values in [-1, 1]
    for integer input formats.
    """
    try:
        rate, data = wavfile.read(path)
    except (ValueError, FileNotFoundError, OSError) as exc:
        raise IngestionError(f"cannot read WAV file {path}: {exc}") from exc
    if data.dtype == np.int16:
        out = data.astype(np.float64) / _PCM16_SCALE
    elif data.dtype == np.int32:
        out = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        out = data.astype(np.float64)
    elif data.dtype == np.uint8:
        out = (data.astype(np.float64) - 128.0) / 128.0
    else:
        raise IngestionError(f"unsupported WAV sample format {data.dtype}")
    return rate, out


def write_wav(path, data, sample_rate: int = DEFAULT_SAMPLE_RATE, fmt: str = "float32") -> None:
    """Write mono [n] or multichannel [n, ch] audio as float32 or pcm16."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim not in (1, 2):
        raise IngestionError(f"audio must be 1-D or 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise IngestionError("audio contains non-finite samples")
    if fmt == "float32":
        wavfile.write(path, sample_rate, arr.astype(np.float32))
    elif fmt == "pcm16":
        clipped = np.clip(arr, -1.0, 1.0 - 1.0 / _PCM16_SCALE)
        wavfile.write(path, sample_rate, np.round(clipped * _PCM16_SCALE).astype(np.int16))
    else:
        raise IngestionError(f"unknown WAV format {fmt!r}, expected float32 or pcm16")


def to_mono(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        return arr
    return arr.mean(axis=1)


def resample_to(data, rate_in: int, rate_out: int = DEFAULT_SAMPLE_RATE) -> np.ndarray:
    if rate_in == rate_out:
        return np.asarray(data, dtype=np.float64)
    from math import gcd

    g = gcd(rate_in, rate_out)
    return resample_poly(np.asarray(data, dtype=np.float64), rate_out // g, rate_in // g)


def load_mono(path, sample_rate: int = DEFAULT_SAMPLE_RATE) -> np.ndarray:
    """Read, downmix, and resample a WAV file to a mono track at sample_rate."""
    rate, data = read_wav(path)
    return resample_to(to_mono(data), rate, sample_rate)
