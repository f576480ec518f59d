"""Parametric directional filter with oracle source knowledge.

Given the true per-source reference spectrograms and DOAs, each TF bin is
assigned the pattern gain of its dominant source (largest magnitude, ties to
the lowest source index). This is the informed comparison method: it applies
the desired directivity exactly, bin by bin, with no learning involved.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ValidationError
from .patterns import AnalyticPattern, PatternVector
from .scene import RenderedScene, gain_matrix
from .stft import StftConfig, stft

PatternLike = Union[AnalyticPattern, PatternVector]


@dataclass
class OracleScene:
    """Per-source reference spectrograms X_n [N, T, F] and their DOAs."""

    component_specs: np.ndarray
    doas: tuple
    config: StftConfig

    def __post_init__(self):
        specs = np.asarray(self.component_specs)
        if specs.ndim != 3 or specs.shape[0] < 1:
            raise ValidationError(
                f"component_specs must be [N >= 1, T, F], got shape {specs.shape}"
            )
        self.doas = tuple(float(d) for d in np.atleast_1d(self.doas))
        if len(self.doas) != specs.shape[0]:
            raise ValidationError(
                f"{specs.shape[0]} component spectrograms but {len(self.doas)} DOAs"
            )
        if specs.shape[2] != self.config.n_bins:
            raise ValidationError(
                f"{specs.shape[2]} bins do not match config n_bins={self.config.n_bins}"
            )
        self.component_specs = specs.astype(np.complex128, copy=False)

    @property
    def num_sources(self) -> int:
        return self.component_specs.shape[0]

    @property
    def n_frames(self) -> int:
        return self.component_specs.shape[1]

    @classmethod
    def from_rendered(cls, rendered: RenderedScene, cfg: StftConfig) -> "OracleScene":
        if rendered.num_sources < 1:
            raise ValidationError("oracle filtering needs at least one source")
        specs = np.stack([stft(c, cfg).data for c in rendered.ref_components])
        return cls(component_specs=specs, doas=rendered.doas, config=cfg)


def oracle_filter(oracle: OracleScene, patterns) -> np.ndarray:
    """Real nonnegative mask [T, F]: per bin, the gain of the dominant source.

    `patterns` is one pattern (static) or a sequence of length 1 or n_frames.
    np.argmax keeps the first maximum, which realizes the documented
    lowest-index tie break.
    """
    if isinstance(patterns, (AnalyticPattern, PatternVector)):
        patterns = [patterns]
    t = oracle.n_frames
    gains = gain_matrix(oracle.doas, patterns, t)  # [T, N]
    dominant = np.argmax(np.abs(oracle.component_specs), axis=0)  # [T, F]
    return gains[np.arange(t)[:, None], dominant]
