"""Glue between scenes, patterns, models, and metrics.

Everything the CLI and the HTTP service share lives here: feature extraction,
training-batch assembly, pattern timelines, the two processing paths (oracle
parametric filter and neural mask filter), and evaluation sweeps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .baseline import OracleScene, oracle_filter
from .errors import IngestionError, ValidationError
from .metrics import PatternEstimate, aggregate_pattern, narrowband_ratio, sdr, wideband_ratio
from .nn import model
from .nn.loss import DEFAULT_LOSS_EPS, loss_l1
from .nn.train import TrainBatch
from .patterns import (
    DEFAULT_FLOOR_DB,
    DEFAULT_L,
    AnalyticPattern,
    PatternVector,
    Recipe,
    RecipeConfig,
    SimplifiedDmaSpec,
    combine,
    gen_recipe,
    gen_recipe_a,
    sample_pattern,
)
from .scene import (
    RenderedScene,
    SceneSamplingConfig,
    SceneSpec,
    SourceSpec,
    build_default_array,
    doa_grid_deg,
    render_mics,
    render_target,
    sample_scene,
)
from .sources import make_source
from .stft import Spectrogram, StftConfig, istft, stft
from .wavio import read_wav, resample_to, to_mono, write_wav

METHOD_NAMES = ("parametric-oracle", "pv-jnf", "film-jnf")
NEURAL_METHODS = ("pv-jnf", "film-jnf")


# ---------------------------------------------------------------------------
# features and batches


# keeps cross-spectrum normalization finite on silent bins
_CROSS_EPS = 1e-12


def scene_features(rendered: RenderedScene, stft_cfg: StftConfig) -> np.ndarray:
    """All-mic feature block [1, T, F, 2Q] for one rendered scene.

    Channel pair 0 carries the raw reference-mic spectrogram (real then
    imaginary), the same values the estimated mask later multiplies. Every
    other mic q contributes the unit-magnitude cross-spectrum
    X_q conj(X_0) / (|X_q||X_0| + eps), whose phase is the inter-mic phase
    difference: source direction becomes a first-order feature instead of a
    relationship the network has to reconstruct from raw per-mic values.
    """
    specs = [stft(ch, stft_cfg) for ch in rendered.mic_signals]
    ref = specs[0].data
    blocks = [ref.real, ref.imag]
    for s in specs[1:]:
        cross = s.data * np.conj(ref)
        cross = cross / (np.abs(s.data) * np.abs(ref) + _CROSS_EPS)
        blocks.extend([cross.real, cross.imag])
    return np.stack(blocks, axis=-1)[None, ...]


def pattern_rows(vectors: Sequence[PatternVector]) -> np.ndarray:
    """Stack pattern vectors into a [B, L] float array."""
    if len(vectors) == 0:
        raise ValidationError("need at least one pattern vector")
    widths = {v.l for v in vectors}
    if len(widths) != 1:
        raise ValidationError(f"pattern vectors disagree on length: {sorted(widths)}")
    return np.stack([np.asarray(v.gains, dtype=np.float64) for v in vectors])


def recipe_vectors(cfg: RecipeConfig, count: int, l: int = DEFAULT_L) -> list:
    """First `count` sampled pattern vectors of the configured recipe stream."""
    if count < 1:
        raise ValidationError("count must be >= 1")
    if cfg.recipe is Recipe.A:
        pats = gen_recipe_a(cfg.floor_db)
        if count > len(pats):
            raise ValidationError(f"recipe a has only {len(pats)} patterns")
        chosen = pats[:count]
    else:
        rng = np.random.default_rng(cfg.rng_seed)
        chosen = [gen_recipe(cfg, rng) for _ in range(count)]
    return [sample_pattern(p, l) for p in chosen]


def steered_cardioids(
    count: int = 4, l: int = DEFAULT_L, floor_db: float = DEFAULT_FLOOR_DB
) -> list:
    """Cardioid vectors (mu=0.5, first order) steered at multiples of 60 degrees.

    A compact conditioning set drawn from the fixed first-order recipe: every
    member shares the cardioid shape and only the steering direction varies,
    so the conditioning vector is the single decisive difference between
    training targets. The smooth single-null response keeps the learned
    direction-to-gain map stable at directions never seen in training, which
    is what a held-out evaluation of a small overfit run measures.
    """
    if not 1 <= count <= 6:
        raise ValidationError("count must be in 1..6 (60-degree steering spacing)")
    out = []
    for i in range(count):
        spec = SimplifiedDmaSpec(mu=0.5, theta_s=math.radians(60.0 * i), order_j=1)
        out.append(sample_pattern(combine([spec], floor_db=floor_db), l))
    return out


def conditioning_vectors(
    recipe_cfg: RecipeConfig, mode: str, count: int, l: int = DEFAULT_L
) -> list:
    """Pattern vectors a training run conditions on, chosen by `mode`."""
    if mode == "steered-cardioids":
        return steered_cardioids(count, l, recipe_cfg.floor_db)
    if mode == "recipe-stream":
        return recipe_vectors(recipe_cfg, count, l)
    raise ValidationError(f"unknown conditioning mode {mode!r}")


def render_split(
    split: str,
    n_scenes: int,
    rng: np.random.Generator,
    sampling_cfg: SceneSamplingConfig = SceneSamplingConfig(),
) -> list:
    """Sample and render `n_scenes` scenes from one DOA split."""
    if n_scenes < 1:
        raise ValidationError("n_scenes must be >= 1")
    geom = build_default_array()
    out = []
    for _ in range(n_scenes):
        spec = sample_scene(split, rng, sampling_cfg)
        out.append(render_mics(spec, geom, sampling_cfg.sample_rate))
    return out


def training_batches(
    scenes: Sequence[RenderedScene],
    vectors: Sequence[PatternVector],
    stft_cfg: StftConfig,
    batch_size: Optional[int] = None,
) -> list:
    """TrainBatch list over the scene x pattern cross product.

    Each scene's feature block is computed once and shared across its pattern
    rows. batch_size=None puts every pair in a single full batch.
    """
    if len(scenes) == 0 or len(vectors) == 0:
        raise ValidationError("need at least one scene and one pattern")
    lengths = {s.num_samples for s in scenes}
    if len(lengths) != 1:
        raise ValidationError("scenes in one dataset must share their sample count")
    rows = pattern_rows(vectors)
    feats, pats, targs = [], [], []
    for rendered in scenes:
        block = scene_features(rendered, stft_cfg)[0]
        for vec, row in zip(vectors, rows):
            feats.append(block)
            pats.append(row)
            targs.append(render_target(rendered, [vec], stft_cfg))
    total = len(feats)
    size = total if batch_size is None else int(batch_size)
    if size < 1:
        raise ValidationError("batch_size must be >= 1")
    batches = []
    for lo in range(0, total, size):
        hi = min(lo + size, total)
        batches.append(
            TrainBatch(
                features=np.stack(feats[lo:hi]),
                patterns=np.stack(pats[lo:hi]),
                targets=np.stack(targs[lo:hi]),
                stft_cfg=stft_cfg,
            )
        )
    return batches


# ---------------------------------------------------------------------------
# timelines


def expand_timeline(entries: Sequence, n_frames: int) -> list:
    """Per-frame pattern list from (start_frame, PatternVector) entries.

    The first entry must start at frame 0; starts must be strictly increasing
    (a repeated start would make two patterns overlap). Entries starting at or
    beyond n_frames never become active and are rejected.
    """
    if len(entries) == 0:
        raise ValidationError("timeline needs at least one entry")
    starts = [int(s) for s, _ in entries]
    if starts[0] != 0:
        raise ValidationError(f"timeline must start at frame 0, got {starts[0]}")
    for a, b in zip(starts, starts[1:]):
        if b <= a:
            raise ValidationError(f"timeline start frames must be strictly increasing, got {a} then {b}")
    if n_frames < 1:
        raise ValidationError("n_frames must be >= 1")
    if starts[-1] >= n_frames:
        raise ValidationError(f"timeline entry at frame {starts[-1]} is beyond the render ({n_frames} frames)")
    widths = {v.l for _, v in entries}
    if len(widths) != 1:
        raise ValidationError("timeline patterns disagree on length")
    out = []
    k = 0
    for t in range(n_frames):
        while k + 1 < len(entries) and starts[k + 1] <= t:
            k += 1
        out.append(entries[k][1])
    return out


# ---------------------------------------------------------------------------
# processing paths


@dataclass(frozen=True)
class ProcessResult:
    """One filtered render: the mask, both spectrograms, and both signals."""

    signal: np.ndarray  # processed time-domain output
    mask: np.ndarray  # [T, F] applied mask (real for the oracle, complex for neural)
    unprocessed: np.ndarray  # reference-mic mixture
    ref_spec: Spectrogram
    out_spec: Spectrogram


def process_scene(
    rendered: RenderedScene,
    stft_cfg: StftConfig,
    vectors: Sequence[PatternVector],
    method: str = "parametric-oracle",
    params: Optional[dict] = None,
    arch_cfg=None,
) -> ProcessResult:
    """Filter one scene with a static (len 1) or per-frame (len T) pattern list."""
    if method not in METHOD_NAMES:
        raise ValidationError(f"unknown method {method!r}, expected one of {METHOD_NAMES}")
    ref_spec = stft(rendered.reference_signal, stft_cfg)
    n_frames = ref_spec.n_frames
    if method == "parametric-oracle":
        oracle = OracleScene.from_rendered(rendered, stft_cfg)
        mask = oracle_filter(oracle, list(vectors))
    else:
        if params is None or arch_cfg is None:
            raise ValidationError("neural methods need params and arch_cfg")
        if arch_cfg.arch != method:
            raise ValidationError(f"model is {arch_cfg.arch!r} but method {method!r} was requested")
        features = scene_features(rendered, stft_cfg)
        if len(vectors) == 1:
            pats = pattern_rows(vectors)  # [1, L]
        elif len(vectors) == n_frames:
            pats = pattern_rows(vectors)[None, :, :]  # [1, T, L]
        else:
            raise ValidationError(f"need 1 or {n_frames} patterns, got {len(vectors)}")
        mask = model.forward(params, arch_cfg, features, pats)[0]
    out_spec = model.apply_mask(mask, ref_spec)
    signal = istft(out_spec, length=rendered.num_samples)
    return ProcessResult(
        signal=signal,
        mask=mask,
        unprocessed=rendered.reference_signal,
        ref_spec=ref_spec,
        out_spec=out_spec,
    )


# ---------------------------------------------------------------------------
# evaluation


def evaluate_method(
    scenes: Sequence[RenderedScene],
    vectors: Sequence[PatternVector],
    stft_cfg: StftConfig,
    method: str = "parametric-oracle",
    params: Optional[dict] = None,
    arch_cfg=None,
    epsilon: float = DEFAULT_LOSS_EPS,
) -> list:
    """SDR/loss rows for every scene x pattern pair, static patterns only."""
    rows = []
    for i, rendered in enumerate(scenes):
        for j, vec in enumerate(vectors):
            res = process_scene(rendered, stft_cfg, [vec], method, params, arch_cfg)
            target = render_target(rendered, [vec], stft_cfg)
            rows.append(
                {
                    "scene": i,
                    "pattern": j,
                    "method": method,
                    "sdr_db": sdr(target, res.signal),
                    "unprocessed_sdr_db": sdr(target, res.unprocessed),
                    "loss": loss_l1(target, res.signal, epsilon),
                }
            )
    return rows


def summarize_rows(rows: Sequence[dict]) -> dict:
    if len(rows) == 0:
        raise ValidationError("no evaluation rows")
    return {
        "count": len(rows),
        "mean_sdr_db": float(np.mean([r["sdr_db"] for r in rows])),
        "mean_unprocessed_sdr_db": float(np.mean([r["unprocessed_sdr_db"] for r in rows])),
        "mean_loss": float(np.mean([r["loss"] for r in rows])),
    }


def pattern_ratio_sweep(
    pattern,
    stft_cfg: StftConfig,
    method: str = "parametric-oracle",
    params: Optional[dict] = None,
    arch_cfg=None,
    split: str = "test",
    duration_s: float = 0.25,
    source_kind: str = "speech-noise",
    distance_m: float = 1.5,
    rng_seed: int = 0,
    max_directions: Optional[int] = None,
    narrowband: bool = False,
) -> PatternEstimate:
    """Estimated directivity of a filter: output/input power ratio per DOA.

    Renders a single-source scene at every direction of the split grid,
    filters it with the static `pattern`, and aggregates the wideband power
    ratios into a PatternEstimate.

    The oracle consumes an analytic pattern directly (its gain is applied
    exactly); neural methods need the sampled L-gain vector.
    """
    if isinstance(pattern, AnalyticPattern):
        vec = pattern if method == "parametric-oracle" else sample_pattern(pattern)
    elif isinstance(pattern, PatternVector):
        vec = pattern
    else:
        raise ValidationError("pattern must be an AnalyticPattern or PatternVector")
    geom = build_default_array()
    grid = doa_grid_deg(split)
    if max_directions is not None and len(grid) > max_directions:
        idx = np.round(np.linspace(0, len(grid) - 1, max_directions)).astype(int)
        grid = grid[idx]
    rng = np.random.default_rng(rng_seed)
    n = int(round(duration_s * stft_cfg.sample_rate))
    samples = []
    nb_samples = [] if narrowband else None
    for deg in grid:
        theta = math.radians(float(deg))
        sig = make_source(source_kind, n, rng, stft_cfg.sample_rate)
        spec = SceneSpec(
            sources=(SourceSpec(doa=theta, distance=distance_m, signal=sig),),
            duration=duration_s,
        )
        rendered = render_mics(spec, geom, stft_cfg.sample_rate)
        res = process_scene(rendered, stft_cfg, [vec], method, params, arch_cfg)
        src_spec = stft(rendered.ref_components[0], stft_cfg)
        samples.append((theta, wideband_ratio(res.mask, src_spec)))
        if narrowband:
            nb_samples.append(narrowband_ratio(res.mask, src_spec))
    return aggregate_pattern(samples, nb_samples)


# ---------------------------------------------------------------------------
# scene artifacts


def save_scene_dir(rendered: RenderedScene, out_dir) -> None:
    """Write a rendered scene as WAVs plus a metadata JSON."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_wav(out / "mics.wav", rendered.mic_signals.T, rendered.sample_rate)
    write_wav(out / "components.wav", rendered.ref_components.T, rendered.sample_rate)
    meta = {
        "doas_deg": [math.degrees(d) for d in rendered.doas],
        "distances_m": list(rendered.distances),
        "sample_rate": rendered.sample_rate,
        "num_sources": rendered.num_sources,
        "num_mics": int(rendered.mic_signals.shape[0]),
        "num_samples": rendered.num_samples,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def load_scene_dir(path) -> RenderedScene:
    """Rebuild a RenderedScene saved by save_scene_dir (float32 precision)."""
    root = Path(path)
    meta_path = root / "meta.json"
    if not meta_path.is_file():
        raise IngestionError(f"{root} has no meta.json")
    meta = json.loads(meta_path.read_text())
    rate, mics = read_wav(root / "mics.wav")
    _, comps = read_wav(root / "components.wav")
    mics = np.atleast_2d(mics.T if mics.ndim == 2 else mics)
    comps = np.atleast_2d(comps.T if comps.ndim == 2 else comps)
    return RenderedScene(
        mic_signals=np.asarray(mics, dtype=np.float64),
        ref_components=np.asarray(comps, dtype=np.float64),
        doas=tuple(math.radians(d) for d in meta["doas_deg"]),
        distances=tuple(float(d) for d in meta["distances_m"]),
        geometry=build_default_array(),
        sample_rate=int(meta.get("sample_rate", rate)),
    )


def load_any_pattern(path, l: int = DEFAULT_L) -> PatternVector:
    """Pattern vector from a JSON file holding gains or an analytic spec."""
    p = Path(path)
    if not p.is_file():
        raise IngestionError(f"pattern file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise IngestionError(f"pattern file is not valid JSON: {exc}") from None
    return pattern_from_doc(doc, l)


def pattern_from_doc(doc: dict, l: int = DEFAULT_L) -> PatternVector:
    if not isinstance(doc, dict):
        raise ValidationError("pattern document must be a JSON object")
    if "gains" in doc:
        return PatternVector.from_json_dict(doc)
    if "components" in doc:
        return sample_pattern(AnalyticPattern.from_json_dict(doc), l)
    raise ValidationError("pattern document needs either 'gains' or 'components'")


# ---------------------------------------------------------------------------
# source ingestion


@dataclass(frozen=True)
class SourceEntry:
    name: str
    signal: np.ndarray  # mono float64
    sample_rate: int
    resampled: bool
    origin: str  # "wav" or "synthetic"


def ingest_sources(path, sample_rate: int = 16000) -> list:
    """Load every WAV or synthetic-spec JSON under `path` into a registry.

    Entries come back sorted by file name so enumeration order is stable.
    WAVs are downmixed to mono and resampled when needed (flagged). All bad
    files are collected and reported in one ingestion error.
    """
    root = Path(path)
    if not root.is_dir():
        raise IngestionError(f"{root} is not a readable directory")
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in (".wav", ".json"))
    if not files:
        raise IngestionError(f"no .wav or .json sources found in {root}")
    entries = []
    offenders = []
    for p in files:
        try:
            if p.suffix.lower() == ".json":
                doc = json.loads(p.read_text())
                kind = doc["kind"]
                seed = int(doc.get("seed", 0))
                dur = float(doc.get("duration_s", 4.0))
                sig = make_source(kind, int(round(dur * sample_rate)), np.random.default_rng(seed), sample_rate)
                entries.append(SourceEntry(p.stem, sig, sample_rate, False, "synthetic"))
            else:
                rate, data = read_wav(p)
                mono = to_mono(data)
                if mono.size == 0:
                    raise IngestionError("empty audio")
                resampled = rate != sample_rate
                if resampled:
                    mono = resample_to(mono, rate, sample_rate)
                entries.append(SourceEntry(p.stem, mono, sample_rate, resampled, "wav"))
        except (IngestionError, ValidationError, KeyError, ValueError) as exc:
            offenders.append(f"{p.name}: {exc}")
    if offenders:
        raise IngestionError("failed to ingest: " + "; ".join(offenders))
    return entries
