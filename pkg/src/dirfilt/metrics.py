"""Evaluation: directivity estimation via power ratios, and SDR.

The wideband ratio of a mask against a single source's spectrogram measures the
power gain the filter applied to that direction; sweeping single-source scenes
over a DOA grid therefore traces out the effective directivity pattern of any
filtering method, learned or parametric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .patterns import gain_to_db, resolve_gain
from .stft import Spectrogram

SDR_CAP_DB = 100.0


def _spec_data(spec) -> np.ndarray:
    data = spec.data if isinstance(spec, Spectrogram) else np.asarray(spec)
    if data.ndim != 2:
        raise ValidationError(f"expected a [T, F] spectrogram, got shape {data.shape}")
    return data


def wideband_ratio(mask, source_spec) -> float:
    """sum |M X|^2 / sum |X|^2 over all TF bins."""
    x = _spec_data(source_spec)
    m = np.asarray(mask)
    if m.shape != x.shape:
        raise ValidationError(f"mask shape {m.shape} != spectrogram shape {x.shape}")
    denom = np.sum(np.abs(x) ** 2)
    if denom == 0.0:
        raise ValidationError("source spectrogram has zero energy")
    return float(np.sum(np.abs(m * x) ** 2) / denom)


def narrowband_ratio(mask, source_spec) -> np.ndarray:
    """Per-bin ratio over time; bins with no source energy are NaN (absent)."""
    x = _spec_data(source_spec)
    m = np.asarray(mask)
    if m.shape != x.shape:
        raise ValidationError(f"mask shape {m.shape} != spectrogram shape {x.shape}")
    denom = np.sum(np.abs(x) ** 2, axis=0)
    num = np.sum(np.abs(m * x) ** 2, axis=0)
    out = np.full(x.shape[1], np.nan)
    filled = denom > 0.0
    out[filled] = num[filled] / denom[filled]
    return out


@dataclass
class PatternEstimate:
    """Mean power ratio per direction, optionally resolved per frequency bin."""

    angles: np.ndarray  # radians, sorted ascending
    ratios: np.ndarray  # mean wideband ratio per angle
    narrowband: Optional[np.ndarray] = None  # [F, len(angles)], NaN = absent
    counts: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    def ratio_at(self, angle: float, tol: float = 1e-9) -> float:
        idx = np.flatnonzero(np.abs(self.angles - angle) <= tol)
        if idx.size == 0:
            raise ValidationError(f"no estimate at angle {angle}")
        return float(self.ratios[idx[0]])


def aggregate_pattern(samples: Sequence, narrowband_samples: Optional[Sequence] = None) -> PatternEstimate:
    """Group (angle, ratio) samples by direction and average each group.

    Optional narrowband_samples holds per-bin ratio vectors aligned with
    `samples`; empty (NaN) bins are ignored within each group's mean.
    """
    if len(samples) == 0:
        raise ValidationError("no samples to aggregate")
    keyed = {}
    for i, (theta, ratio) in enumerate(samples):
        key = round(float(theta), 9)
        keyed.setdefault(key, []).append(i)
    angles = np.array(sorted(keyed))
    ratios = np.empty(angles.size)
    counts = np.empty(angles.size, dtype=int)
    values = np.asarray([r for _, r in samples], dtype=float)
    nb = None
    if narrowband_samples is not None:
        nb_arr = np.asarray(narrowband_samples, dtype=float)  # [n_samples, F]
        nb = np.empty((nb_arr.shape[1], angles.size))
    for j, key in enumerate(angles):
        idx = keyed[round(float(key), 9)]
        ratios[j] = values[idx].mean()
        counts[j] = len(idx)
        if nb is not None:
            with np.errstate(invalid="ignore"):
                nb[:, j] = np.nanmean(nb_arr[idx], axis=0)
    return PatternEstimate(angles=angles, ratios=ratios, narrowband=nb, counts=counts)


def sdr(target, estimate) -> float:
    """10 log10(||z||^2 / ||z - zhat||^2), capped at +100 dB."""
    z = np.asarray(target, dtype=np.float64)
    zh = np.asarray(estimate, dtype=np.float64)
    if z.shape != zh.shape:
        raise ValidationError(f"target shape {z.shape} != estimate shape {zh.shape}")
    sig = np.sum(z * z)
    if sig == 0.0:
        raise ValidationError("target signal has zero energy")
    err = np.sum((z - zh) ** 2)
    if err == 0.0:
        return SDR_CAP_DB
    return float(min(10.0 * np.log10(sig / err), SDR_CAP_DB))


def export_pattern_estimate_csv(estimate: PatternEstimate, path, pattern=None) -> None:
    """CSV of per-direction ratios in power dB, alongside the commanded
    pattern's 20 log10 gain curve (the same dB axis, since ratio = gain^2)."""
    with open(path, "w", encoding="utf-8") as fh:
        header = "angle_deg,ratio,ratio_db,count"
        if pattern is not None:
            header += ",target_gain,target_db"
        fh.write(header + "\n")
        for i, theta in enumerate(estimate.angles):
            deg = np.degrees(theta) % 360.0
            ratio = estimate.ratios[i]
            ratio_db = 10.0 * np.log10(ratio) if ratio > 0 else float("-inf")
            row = f"{deg:.6g},{ratio:.12g},{ratio_db:.12g},{estimate.counts[i]}"
            if pattern is not None:
                gain = float(resolve_gain(pattern, float(theta)))
                row += f",{gain:.12g},{gain_to_db(gain):.12g}"
            fh.write(row + "\n")
