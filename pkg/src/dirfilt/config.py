"""Experiment configuration: one document tying every stage together."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import IngestionError, ValidationError
from .nn.model import ArchConfig
from .nn.train import TrainConfig
from .patterns import RecipeConfig
from .scene import SceneSamplingConfig, build_default_array
from .stft import StftConfig


@dataclass(frozen=True)
class SplitSizes:
    train: int = 2
    val: int = 1
    test: int = 3

    def __post_init__(self):
        for name in ("train", "val", "test"):
            if getattr(self, name) < 1:
                raise ValidationError(f"split size {name!r} must be >= 1")


CONDITIONING_MODES = ("recipe-stream", "steered-cardioids")


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for a full train/eval run; sub-configs must agree on sizes."""

    stft: StftConfig = StftConfig()
    arch: ArchConfig = ArchConfig()
    recipe: RecipeConfig = RecipeConfig()
    train: TrainConfig = TrainConfig()
    sampling: SceneSamplingConfig = SceneSamplingConfig()
    splits: SplitSizes = SplitSizes()
    patterns_per_scene: int = 4
    conditioning: str = "recipe-stream"
    output_dir: str = "runs"

    def __post_init__(self):
        if self.patterns_per_scene < 1:
            raise ValidationError("patterns_per_scene must be >= 1")
        if self.conditioning not in CONDITIONING_MODES:
            raise ValidationError(
                f"conditioning must be one of {CONDITIONING_MODES}, got {self.conditioning!r}"
            )
        if self.arch.f != self.stft.n_bins:
            raise ValidationError(
                f"arch.f={self.arch.f} does not match the {self.stft.n_bins} STFT bins"
            )
        if self.sampling.sample_rate != self.stft.sample_rate:
            raise ValidationError(
                f"scene sample rate {self.sampling.sample_rate} != stft {self.stft.sample_rate}"
            )
        q = build_default_array().num_mics
        if self.arch.q != q:
            raise ValidationError(f"arch.q={self.arch.q} does not match the {q}-mic array")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["recipe"]["recipe"] = str(self.recipe.recipe.value)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            return cls(
                stft=StftConfig(**doc.get("stft", {})),
                arch=ArchConfig(**doc.get("arch", {})),
                recipe=RecipeConfig(**doc.get("recipe", {})),
                train=TrainConfig(**doc.get("train", {})),
                sampling=SceneSamplingConfig(**doc.get("sampling", {})),
                splits=SplitSizes(**doc.get("splits", {})),
                patterns_per_scene=int(doc.get("patterns_per_scene", 4)),
                conditioning=str(doc.get("conditioning", "recipe-stream")),
                output_dir=str(doc.get("output_dir", "runs")),
            )
        except TypeError as exc:
            raise ValidationError(f"bad config document: {exc}") from None


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise IngestionError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise IngestionError(f"config file is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(doc)


def desk_config(arch: str = "film-jnf", output_dir: str = "runs") -> ExperimentConfig:
    """Laptop-scale defaults: short scenes, narrow model, a few hundred steps.

    The optimizer runs hotter than the full-scale default (lr 0.01, beta2
    0.99): with two scenes and full batches the gradient is noiseless, and
    500 steps leave no room for a slow warm-up. Conditioning uses the four
    steered cardioids so the held-out evaluation exercises the learned
    steering response rather than memorized scene masks.
    """
    stft = StftConfig(win_len=128, hop=64)
    return ExperimentConfig(
        stft=stft,
        arch=ArchConfig(
            arch=arch,
            f=stft.n_bins,
            bilstm_hidden=32,
            unilstm_hidden=16,
            feature_width=64,
            input_width=32,
        ),
        recipe=RecipeConfig(recipe="a"),
        train=TrainConfig(
            learning_rate=0.01, beta2=0.99, batch_size=8, epochs=500, max_steps=500
        ),
        sampling=SceneSamplingConfig(duration_s=0.5),
        splits=SplitSizes(train=2, val=1, test=3),
        patterns_per_scene=4,
        conditioning="steered-cardioids",
        output_dir=output_dir,
    )
