"""Anechoic scene simulation for a compact microphone array.

Propagation is direct-path only: per source and mic, a pure fractional delay
(d_q / c) and spherical-spreading gain (1 / 4 pi d_q), realized in the time
domain with a windowed-sinc interpolation filter so the mixture decomposition
holds sample-exactly rather than per STFT bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .patterns import resolve_gain, wrap_angle
from .sources import make_source
from .stft import Spectrogram, StftConfig, istft, stft
from .wavio import DEFAULT_SAMPLE_RATE, load_mono

SPEED_OF_SOUND = 343.0
FRACTIONAL_DELAY_TAPS = 64

_SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class ArrayGeometry:
    """Mic coordinates in meters, planar array assumed at zero elevation."""

    mic_positions: tuple
    reference_index: int = 0

    def __post_init__(self):
        pos = tuple(tuple(float(c) for c in p) for p in self.mic_positions)
        if len(pos) < 2:
            raise ValidationError("array needs at least 2 microphones")
        for p in pos:
            if len(p) != 3:
                raise ValidationError("mic positions must be 3-D coordinates")
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                if math.dist(pos[i], pos[j]) < 1e-9:
                    raise ValidationError(f"mics {i} and {j} coincide")
        if not 0 <= self.reference_index < len(pos):
            raise ValidationError(f"reference index {self.reference_index} out of range")
        object.__setattr__(self, "mic_positions", pos)

    @property
    def num_mics(self) -> int:
        return len(self.mic_positions)

    @property
    def centroid(self) -> np.ndarray:
        return np.mean(np.asarray(self.mic_positions), axis=0)

    @property
    def radius(self) -> float:
        """Largest mic distance from the centroid."""
        pos = np.asarray(self.mic_positions)
        return float(np.max(np.linalg.norm(pos - self.centroid[None, :], axis=1)))


def build_default_array() -> ArrayGeometry:
    """Center reference mic plus 3 mics uniformly on a 3 cm diameter circle."""
    r = 0.015
    ring = [
        (r * math.cos(2.0 * math.pi * k / 3.0), r * math.sin(2.0 * math.pi * k / 3.0), 0.0)
        for k in range(3)
    ]
    return ArrayGeometry(mic_positions=tuple([(0.0, 0.0, 0.0)] + ring), reference_index=0)


@dataclass
class SourceSpec:
    doa: float  # azimuth, radians
    distance: float  # meters from array center
    signal: np.ndarray

    def __post_init__(self):
        self.doa = float(wrap_angle(self.doa))
        self.distance = float(self.distance)
        if self.distance <= 0:
            raise ValidationError(f"source distance must be positive, got {self.distance}")
        sig = np.asarray(self.signal, dtype=np.float64)
        if sig.ndim != 1 or sig.size == 0:
            raise ValidationError("source signal must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(sig)):
            raise ValidationError("source signal contains non-finite samples")
        self.signal = sig


@dataclass
class SceneSpec:
    sources: tuple
    noise_snr_db: Optional[float] = None
    duration: float = 4.0
    rng_seed: int = 0

    def __post_init__(self):
        self.sources = tuple(self.sources)
        for s in self.sources:
            if not isinstance(s, SourceSpec):
                raise ValidationError("scene sources must be SourceSpec instances")
        if self.duration <= 0:
            raise ValidationError(f"duration must be positive, got {self.duration}")

    @property
    def num_sources(self) -> int:
        return len(self.sources)


@dataclass
class RenderedScene:
    """Mic signals plus the per-source reference-mic components used as oracle."""

    mic_signals: np.ndarray  # [Q, n]
    ref_components: np.ndarray  # [N, n], noiseless, at the reference mic
    doas: tuple  # radians, one per source
    distances: tuple
    geometry: ArrayGeometry
    sample_rate: int = DEFAULT_SAMPLE_RATE
    noise_signals: Optional[np.ndarray] = None  # [Q, n] when sensor noise was injected

    @property
    def num_sources(self) -> int:
        return self.ref_components.shape[0]

    @property
    def num_samples(self) -> int:
        return self.mic_signals.shape[1]

    @property
    def reference_signal(self) -> np.ndarray:
        return self.mic_signals[self.geometry.reference_index]


def direct_path(geom: ArrayGeometry, doa: float, dist: float):
    """Per-mic (delay seconds, gain 1/m) for a source at planar (doa, dist)."""
    if dist <= geom.radius:
        raise ValidationError(
            f"source distance {dist} m is inside the array hull (radius {geom.radius} m)"
        )
    src = geom.centroid + dist * np.array([math.cos(doa), math.sin(doa), 0.0])
    pos = np.asarray(geom.mic_positions)
    d = np.linalg.norm(pos - src[None, :], axis=1)
    return d / SPEED_OF_SOUND, 1.0 / (4.0 * np.pi * d)


def fractional_delay_kernel(frac: float, taps: int = FRACTIONAL_DELAY_TAPS) -> np.ndarray:
    """Kaiser-windowed sinc whose peak sits at index taps//2 - 1 + frac.

    beta=12 keeps the interpolation error below 1e-6 through the speech band.
    """
    if not 0.0 <= frac < 1.0:
        raise ValidationError(f"fractional part must be in [0, 1), got {frac}")
    if taps < 8 or taps % 2 != 0:
        raise ValidationError(f"taps must be even and >= 8, got {taps}")
    beta = 12.0
    center = taps // 2 - 1
    t = np.arange(taps) - center - frac
    half = taps / 2
    arg = np.clip(1.0 - (t / half) ** 2, 0.0, None)
    window = np.i0(beta * np.sqrt(arg)) / np.i0(beta)
    return np.sinc(t) * window


def delay_signal(x, delay_samples: float, taps: int = FRACTIONAL_DELAY_TAPS) -> np.ndarray:
    """Delay x by a (possibly fractional) number of samples, same output length."""
    if delay_samples < 0:
        raise ValidationError(f"delay must be non-negative, got {delay_samples}")
    arr = np.asarray(x, dtype=np.float64)
    whole = int(math.floor(delay_samples))
    frac = delay_samples - whole
    kernel = fractional_delay_kernel(frac, taps)
    shifted = np.concatenate([np.zeros(whole), arr])
    center = taps // 2 - 1
    out = np.convolve(shifted, kernel)
    return out[center : center + arr.size]


def _fit_length(x: np.ndarray, n: int) -> np.ndarray:
    if x.size >= n:
        return x[:n]
    return np.concatenate([x, np.zeros(n - x.size)])


def render_mics(
    scene: SceneSpec, geom: ArrayGeometry, sample_rate: int = DEFAULT_SAMPLE_RATE
) -> RenderedScene:
    """Render the per-mic mixtures and the per-source reference components.

    The reference-mic mixture is computed as the sum over the stored component
    stack plus the (optional) noise row, so the decomposition identity holds
    bit-exactly, not merely to rounding.
    """
    n_src = scene.num_sources
    noisy = scene.noise_snr_db is not None and np.isfinite(scene.noise_snr_db)
    if n_src == 0 and not noisy:
        raise ValidationError("scene has no sources and no sensor noise")
    n = int(round(scene.duration * sample_rate))
    q = geom.num_mics
    components = np.zeros((q, max(n_src, 1), n))
    doas, dists = [], []
    for i, src in enumerate(scene.sources):
        delays, gains = direct_path(geom, src.doa, src.distance)
        sig = _fit_length(src.signal, n)
        for m in range(q):
            components[m, i] = gains[m] * delay_signal(sig, delays[m] * sample_rate)
        doas.append(src.doa)
        dists.append(src.distance)
    mics = np.sum(components, axis=1)
    noise = None
    if noisy:
        ref_power = np.mean(mics[geom.reference_index] ** 2)
        if ref_power == 0.0:
            ref_power = 1.0  # pure-noise scene: treat noise level as absolute
        noise_var = ref_power / (10.0 ** (scene.noise_snr_db / 10.0))
        rng = np.random.default_rng(scene.rng_seed)
        noise = math.sqrt(noise_var) * rng.standard_normal((q, n))
        mics = mics + noise
    return RenderedScene(
        mic_signals=mics,
        ref_components=components[geom.reference_index, :n_src],
        doas=tuple(doas),
        distances=tuple(dists),
        geometry=geom,
        sample_rate=sample_rate,
        noise_signals=noise,
    )


def gain_matrix(doas: Sequence[float], patterns: Sequence, n_frames: int) -> np.ndarray:
    """[T, N] floored pattern gain per frame and source DOA.

    `patterns` holds one entry (static) or n_frames entries (per-frame).
    """
    n_pat = len(patterns)
    if n_pat not in (1, n_frames):
        raise ValidationError(
            f"need 1 or {n_frames} patterns for {n_frames} frames, got {n_pat}"
        )
    angles = np.asarray(doas, dtype=float)
    out = np.empty((n_frames, angles.size))
    if n_pat == 1:
        out[:] = np.asarray([resolve_gain(patterns[0], d) for d in angles])[None, :]
    else:
        for t, pat in enumerate(patterns):
            out[t] = [resolve_gain(pat, d) for d in angles]
    return out


def target_gains(rendered: RenderedScene, patterns: Sequence, n_frames: int) -> np.ndarray:
    return gain_matrix(rendered.doas, patterns, n_frames)


def render_target_spec(
    rendered: RenderedScene, patterns: Sequence, cfg: StftConfig
) -> Spectrogram:
    """Weighted sum of per-source reference spectrograms, weights per frame."""
    if rendered.num_sources == 0:
        raise ValidationError("cannot build a target for a scene with no sources")
    comp_specs = [stft(c, cfg) for c in rendered.ref_components]
    n_frames = comp_specs[0].n_frames
    gains = target_gains(rendered, patterns, n_frames)
    stack = np.stack([g[:, None] * s.data for g, s in zip(gains.T, comp_specs)])
    return Spectrogram(data=np.sum(stack, axis=0), config=cfg)


def render_target(rendered: RenderedScene, patterns: Sequence, cfg: StftConfig) -> np.ndarray:
    spec = render_target_spec(rendered, patterns, cfg)
    return istft(spec, length=rendered.num_samples)


@dataclass(frozen=True)
class SceneSamplingConfig:
    distance_m: float = 1.5
    duration_s: float = 4.0
    sample_rate: int = DEFAULT_SAMPLE_RATE
    source_kind: str = "speech-noise"
    noise_snr_db: Optional[float] = None
    test_num_sources: int = 2


def doa_grid_deg(split: str) -> np.ndarray:
    """DOA candidate grid per split, degrees; splits never share directions."""
    if split == "train":
        return np.arange(0.0, 360.0, 5.0)
    if split == "val":
        return np.arange(0.0, 360.0, 5.0) + 2.5
    if split == "test":
        return np.arange(0.0, 360.0, 2.5) + 1.25
    raise ValidationError(f"unknown split {split!r}, expected one of {_SPLIT_NAMES}")


def sample_scene(
    split: str,
    rng: np.random.Generator,
    cfg: SceneSamplingConfig = SceneSamplingConfig(),
) -> SceneSpec:
    """Draw DOAs without replacement from the split grid and synthesize sources."""
    grid = doa_grid_deg(split)
    if split == "test":
        n_src = cfg.test_num_sources
    else:
        n_src = int(rng.integers(1, 4))
    doas_deg = rng.choice(grid, size=n_src, replace=False)
    n = int(round(cfg.duration_s * cfg.sample_rate))
    sources = tuple(
        SourceSpec(
            doa=math.radians(d),
            distance=cfg.distance_m,
            signal=make_source(cfg.source_kind, n, rng, cfg.sample_rate),
        )
        for d in doas_deg
    )
    seed = int(rng.integers(0, 2**31 - 1))
    return SceneSpec(
        sources=sources, noise_snr_db=cfg.noise_snr_db, duration=cfg.duration_s, rng_seed=seed
    )


def scene_from_json(doc: dict, sample_rate: int = DEFAULT_SAMPLE_RATE) -> SceneSpec:
    """Build a SceneSpec from its JSON form.

    Each source carries doa_deg, optional distance_m, and either wav_path or a
    synthetic spec {kind, seed?}. Per-source synthesis seeds default to
    (scene seed, source index) so documents are reproducible.
    """
    duration = float(doc.get("duration_s", 4.0))
    seed = int(doc.get("seed", 0))
    n = int(round(duration * sample_rate))
    sources = []
    for i, s in enumerate(doc.get("sources", [])):
        if "doa_deg" not in s:
            raise ValidationError(f"source {i} is missing doa_deg")
        doa = math.radians(float(s["doa_deg"]))
        dist = float(s.get("distance_m", 1.5))
        if "wav_path" in s:
            signal = _fit_length(load_mono(s["wav_path"], sample_rate), n)
        else:
            synth = s.get("synthetic", {})
            kind = synth.get("kind", "speech-noise")
            src_seed = synth.get("seed")
            rng = np.random.default_rng((seed, i) if src_seed is None else int(src_seed))
            signal = make_source(kind, n, rng, sample_rate)
        sources.append(SourceSpec(doa=doa, distance=dist, signal=signal))
    snr = doc.get("noise_snr_db")
    return SceneSpec(
        sources=tuple(sources),
        noise_snr_db=None if snr is None else float(snr),
        duration=duration,
        rng_seed=seed,
    )
