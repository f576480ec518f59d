"""Directivity pattern construction, sampling, and random generation.

A pattern maps an azimuth angle to a linear amplitude gain. Three primitive
families are supported: the simplified single-lobe family
``|mu + (1-mu)cos(theta - theta_s)|**J``, the general cosine-polynomial
family ``sum_j a_j cos^j(theta - theta_s)``, and rectangular (arc) patterns.
Primitives combine additively and are max-normalized on a dense angular grid,
so the combined gain peaks at 1. A suppression floor (default -20 dB) is
applied when patterns are sampled into gain vectors or queried for target
gains, never inside the analytic math itself.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DegeneratePatternError, ValidationError

TWO_PI = 2.0 * np.pi

DEFAULT_L = 72
DEFAULT_FLOOR_DB = -20.0

# Normalization grid: 0.5 degrees, 10x finer than the default 72-point sampling.
NORMALIZER_GRID_SIZE = 720
_NORM_GRID = TWO_PI * np.arange(NORMALIZER_GRID_SIZE) / NORMALIZER_GRID_SIZE

_DEGENERATE_RETRIES = 16


def wrap_angle(theta):
    """Map angles to [0, 2pi)."""
    return np.mod(theta, TWO_PI)


def db_to_gain(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 20.0)


def gain_to_db(gain, floor_db=-120.0):
    g = np.asarray(gain, dtype=float)
    with np.errstate(divide="ignore"):
        return np.maximum(20.0 * np.log10(g), floor_db)


@dataclass(frozen=True)
class SimplifiedDmaSpec:
    """Single-lobe pattern |mu + (1-mu)cos(theta - theta_s)|**order_j."""

    mu: float
    theta_s: float = 0.0
    order_j: int = 1

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ValidationError(f"mu must lie in [0, 1], got {self.mu}")
        if int(self.order_j) != self.order_j or self.order_j < 1:
            raise ValidationError(f"order_j must be a positive integer, got {self.order_j}")
        object.__setattr__(self, "order_j", int(self.order_j))
        object.__setattr__(self, "theta_s", float(wrap_angle(self.theta_s)))


@dataclass(frozen=True)
class GeneralDmaSpec:
    """Cosine polynomial sum_j coeffs[j] * cos^j(theta - theta_s). May go negative."""

    coeffs: tuple
    theta_s: float = 0.0

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if len(coeffs) == 0:
            raise ValidationError("coeffs must be non-empty")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "theta_s", float(wrap_angle(self.theta_s)))


@dataclass(frozen=True)
class RectSpec:
    """Unit gain on the counter-clockwise arc from theta_start to theta_end.

    Wrap-around arcs (theta_start > theta_end) are allowed; boundary angles
    are inside the arc.
    """

    theta_start: float
    theta_end: float

    def __post_init__(self):
        object.__setattr__(self, "theta_start", float(wrap_angle(self.theta_start)))
        object.__setattr__(self, "theta_end", float(wrap_angle(self.theta_end)))


PatternComponent = Union[SimplifiedDmaSpec, GeneralDmaSpec, RectSpec]

_KIND_BY_TYPE = {
    SimplifiedDmaSpec: "dma-simplified",
    GeneralDmaSpec: "dma-general",
    RectSpec: "rect",
}


def eval_simplified_dma(spec: SimplifiedDmaSpec, theta):
    """Evaluate |mu + (1-mu)cos(theta - theta_s)|**J. Result lies in [0, 1]."""
    base = spec.mu + (1.0 - spec.mu) * np.cos(np.asarray(theta, dtype=float) - spec.theta_s)
    return np.abs(base) ** spec.order_j


def eval_general_dma(spec: GeneralDmaSpec, theta):
    """Evaluate sum_j a_j cos^j(theta - theta_s); no absolute value, may be negative."""
    c = np.cos(np.asarray(theta, dtype=float) - spec.theta_s)
    # Horner evaluation in cos(theta - theta_s).
    acc = np.full_like(c, spec.coeffs[-1])
    for a in spec.coeffs[-2::-1]:
        acc = acc * c + a
    return acc


def eval_rect(spec: RectSpec, theta):
    """1 inside the arc (boundaries included), 0 outside."""
    width = wrap_angle(spec.theta_end - spec.theta_start)
    offset = wrap_angle(np.asarray(theta, dtype=float) - spec.theta_start)
    return (offset <= width).astype(float)


def eval_component(component: PatternComponent, theta):
    if isinstance(component, SimplifiedDmaSpec):
        return eval_simplified_dma(component, theta)
    if isinstance(component, GeneralDmaSpec):
        return eval_general_dma(component, theta)
    if isinstance(component, RectSpec):
        return eval_rect(component, theta)
    raise ValidationError(f"unknown pattern component type: {type(component)!r}")


def _raw_sum(components: Sequence[PatternComponent], theta):
    total = eval_component(components[0], theta)
    for comp in components[1:]:
        total = total + eval_component(comp, theta)
    return total


@dataclass(frozen=True)
class AnalyticPattern:
    """Max-normalized additive combination of pattern primitives.

    ``normalizer`` is the maximum of the raw component sum over the dense
    angular grid; evaluation divides by it and clips into [0, 1] (off-grid
    peaks can exceed the grid maximum by a sliver, and general-DMA components
    can dip below zero).
    """

    components: tuple
    normalizer: float
    floor: float = field(default=db_to_gain(DEFAULT_FLOOR_DB))

    def __post_init__(self):
        if len(self.components) == 0:
            raise ValidationError("pattern needs at least one component")
        if not self.normalizer > 0.0:
            raise DegeneratePatternError("pattern normalizer must be positive")
        if not 0.0 <= self.floor <= 1.0:
            raise ValidationError(f"floor must lie in [0, 1], got {self.floor}")
        object.__setattr__(self, "components", tuple(self.components))

    @classmethod
    def from_components(
        cls, components: Iterable[PatternComponent], floor_db: float = DEFAULT_FLOOR_DB
    ) -> "AnalyticPattern":
        components = tuple(components)
        if len(components) == 0:
            raise ValidationError("pattern needs at least one component")
        if floor_db > 0.0:
            raise ValidationError(f"floor_db must be <= 0, got {floor_db}")
        normalizer = float(np.max(_raw_sum(components, _NORM_GRID)))
        if normalizer <= 0.0:
            raise DegeneratePatternError("component sum is zero on the whole grid")
        return cls(components=components, normalizer=normalizer, floor=float(db_to_gain(floor_db)))

    def evaluate(self, theta):
        """Normalized gain in [0, 1]; no floor applied."""
        return np.clip(_raw_sum(self.components, theta) / self.normalizer, 0.0, 1.0)

    def target_gain(self, theta):
        """Floored gain used for target synthesis and conditioning."""
        return np.maximum(self.evaluate(theta), self.floor)

    def sample(self, l: int = DEFAULT_L) -> "PatternVector":
        return sample_pattern(self, l)

    def to_json_dict(self) -> dict:
        comps = []
        for comp in self.components:
            entry = {"kind": _KIND_BY_TYPE[type(comp)]}
            if isinstance(comp, SimplifiedDmaSpec):
                entry.update(mu=comp.mu, theta_s=comp.theta_s, order_j=comp.order_j)
            elif isinstance(comp, GeneralDmaSpec):
                entry.update(coeffs=list(comp.coeffs), theta_s=comp.theta_s)
            else:
                entry.update(theta_start=comp.theta_start, theta_end=comp.theta_end)
            comps.append(entry)
        return {"components": comps, "normalizer": self.normalizer, "floor": self.floor}

    @classmethod
    def from_json_dict(cls, data: dict) -> "AnalyticPattern":
        comps = []
        for entry in data.get("components", []):
            kind, doc = _component_doc(entry)
            try:
                if kind == "dma-simplified":
                    comps.append(
                        SimplifiedDmaSpec(
                            mu=doc["mu"],
                            theta_s=doc.get("theta_s", 0.0),
                            order_j=doc.get("order_j", 1),
                        )
                    )
                elif kind == "dma-general":
                    comps.append(
                        GeneralDmaSpec(coeffs=tuple(doc["coeffs"]), theta_s=doc.get("theta_s", 0.0))
                    )
                else:
                    comps.append(RectSpec(doc["theta_start"], doc["theta_end"]))
            except KeyError as exc:
                raise ValidationError(
                    f"{kind} component is missing field {exc.args[0]!r}"
                ) from None
        if "floor_db" in data:
            floor_db = float(data["floor_db"])
        elif "floor" in data:
            floor_db = float(gain_to_db(data["floor"]))
        else:
            floor_db = DEFAULT_FLOOR_DB
        # Normalizer is recomputed; stored values are informational only.
        return cls.from_components(comps, floor_db=floor_db)


_COMPONENT_FIELDS = {
    "dma-simplified": frozenset(("mu", "theta_s", "order_j")),
    "dma-general": frozenset(("coeffs", "theta_s")),
    "rect": frozenset(("theta_start", "theta_end")),
}
_DEGREE_ALIASES = {
    "theta_s_deg": "theta_s",
    "theta_start_deg": "theta_start",
    "theta_end_deg": "theta_end",
}


def _component_doc(entry) -> tuple:
    """Validate one JSON component entry; returns (kind, radian-form fields).

    Angles may be given in radians (theta_s, theta_start, theta_end) or
    degrees (same names with a _deg suffix), but not both at once. Unknown
    fields are rejected rather than ignored: a silently dropped field would
    change the pattern the caller believes they specified.
    """
    if not isinstance(entry, dict):
        raise ValidationError("pattern component must be a JSON object")
    kind = entry.get("kind")
    if kind not in _COMPONENT_FIELDS:
        raise ValidationError(f"unknown component kind: {kind!r}")
    allowed = _COMPONENT_FIELDS[kind]
    doc = {}
    for key, value in entry.items():
        if key == "kind":
            continue
        name = _DEGREE_ALIASES.get(key, key)
        if name not in allowed:
            raise ValidationError(f"unexpected field {key!r} on component kind {kind!r}")
        if name in doc:
            raise ValidationError(
                f"component gives {name!r} in both radian and degree form"
            )
        doc[name] = float(np.deg2rad(float(value))) if key in _DEGREE_ALIASES else value
    return kind, doc


def combine(
    components: Iterable[PatternComponent], floor_db: float = DEFAULT_FLOOR_DB
) -> AnalyticPattern:
    """Additively combine primitives and max-normalize on the dense grid."""
    return AnalyticPattern.from_components(components, floor_db=floor_db)


def apply_floor(gains, floor_db: float = DEFAULT_FLOOR_DB):
    """Replace every gain g by max(g, 10**(floor_db/20))."""
    if floor_db > 0.0:
        raise ValidationError(f"floor_db must be <= 0, got {floor_db}")
    return np.maximum(gains, db_to_gain(floor_db))


@dataclass(frozen=True, eq=False)
class PatternVector:
    """L uniform gain samples over [0, 2pi); index 0 is angle 0, spacing 2pi/L."""

    gains: np.ndarray

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=float)
        if gains.ndim != 1 or gains.size < 4:
            raise ValidationError("gains must be a 1-D sequence of at least 4 entries")
        if not np.all(np.isfinite(gains)):
            raise ValidationError("gains must be finite")
        if gains.min() < 0.0 or gains.max() > 1.0 + 1e-12:
            raise ValidationError("gains must lie in [0, 1]")
        gains = gains.copy()
        gains.flags.writeable = False
        object.__setattr__(self, "gains", gains)

    @property
    def l(self) -> int:
        return self.gains.size

    @property
    def angles(self) -> np.ndarray:
        return TWO_PI * np.arange(self.l) / self.l

    def interp(self, theta):
        return interp_pattern(self, theta)

    def to_json_dict(self) -> dict:
        return {"l": int(self.l), "gains": [float(g) for g in self.gains]}

    @classmethod
    def from_json_dict(cls, data: dict) -> "PatternVector":
        gains = np.asarray(data["gains"], dtype=float)
        if "l" in data and int(data["l"]) != gains.size:
            raise ValidationError(f"declared l={data['l']} but got {gains.size} gains")
        return cls(gains=gains)


def sample_pattern(pattern: AnalyticPattern, l: int = DEFAULT_L) -> PatternVector:
    """Sample the floored pattern at the L uniform angles 2*pi*i/L."""
    if l < 4:
        raise ValidationError(f"L must be >= 4, got {l}")
    thetas = TWO_PI * np.arange(l) / l
    return PatternVector(gains=pattern.target_gain(thetas))


def interp_pattern(vector: PatternVector, theta):
    """Circular linear interpolation between adjacent samples.

    Exact at the sample angles (positions within 1e-9 of a sample index snap
    to it, so float round-off in 2*pi*i/L does not bleed into neighbours).
    """
    l = vector.l
    pos = wrap_angle(np.asarray(theta, dtype=float)) * l / TWO_PI
    nearest = np.round(pos)
    pos = np.where(np.abs(pos - nearest) < 1e-9, nearest, pos)
    i0 = np.floor(pos).astype(int) % l
    frac = pos - np.floor(pos)
    i1 = (i0 + 1) % l
    return vector.gains[i0] * (1.0 - frac) + vector.gains[i1] * frac


def resolve_gain(pattern, theta):
    """Floored gain at angle theta for either pattern representation."""
    if isinstance(pattern, AnalyticPattern):
        return pattern.target_gain(theta)
    if isinstance(pattern, PatternVector):
        return pattern.interp(theta)
    raise ValidationError(f"expected AnalyticPattern or PatternVector, got {type(pattern).__name__}")


class Recipe(str, Enum):
    A = "a"
    B_MINUS = "b-"
    B = "b"
    B_PLUS = "b+"


@dataclass(frozen=True)
class RecipeConfig:
    recipe: Recipe = Recipe.B
    max_components: int = 4
    patterns_per_setup: int = 60
    floor_db: float = DEFAULT_FLOOR_DB
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "recipe", Recipe(self.recipe))
        if self.max_components < 1:
            raise ValidationError("max_components must be >= 1")
        if self.patterns_per_setup < 1:
            raise ValidationError("patterns_per_setup must be >= 1")
        if self.floor_db > 0.0:
            raise ValidationError("floor_db must be <= 0")


# Recipe A sweep: 10 mu values x 6 steering angles, first order only.
_RECIPE_A_MUS = [round(0.1 * k, 1) for k in range(10)]
_RECIPE_A_STEERINGS_DEG = [60.0 * k for k in range(6)]


def gen_recipe_a(floor_db: float = DEFAULT_FLOOR_DB) -> list:
    """Exhaustive first-order sweep: 60 distinct single-component patterns."""
    patterns = []
    for mu in _RECIPE_A_MUS:
        for steer_deg in _RECIPE_A_STEERINGS_DEG:
            spec = SimplifiedDmaSpec(mu=mu, theta_s=np.deg2rad(steer_deg), order_j=1)
            patterns.append(AnalyticPattern.from_components([spec], floor_db=floor_db))
    return patterns


def _random_dma(rng: np.random.Generator) -> SimplifiedDmaSpec:
    mu = float(rng.integers(0, 10)) / 10.0
    theta_s = float(rng.uniform(0.0, TWO_PI))
    order_j = int(rng.integers(1, 12))
    return SimplifiedDmaSpec(mu=mu, theta_s=theta_s, order_j=order_j)


def _random_rect(rng: np.random.Generator) -> RectSpec:
    return RectSpec(float(rng.uniform(0.0, TWO_PI)), float(rng.uniform(0.0, TWO_PI)))


def gen_recipe(cfg: RecipeConfig, rng: np.random.Generator) -> AnalyticPattern:
    """Draw one random pattern for recipes B-, B, or B+.

    B- draws a single random DMA primitive; B combines 1..max_components of
    them; B+ picks DMA-only, rect-only, or mixed combinations with equal
    probability. Degenerate draws (all-zero sum, possible with arcs narrower
    than the normalization grid step) are redrawn a bounded number of times.
    """
    if cfg.recipe == Recipe.A:
        raise ValidationError("recipe A is an exhaustive enumeration; use gen_recipe_a")
    for _ in range(_DEGENERATE_RETRIES):
        if cfg.recipe == Recipe.B_MINUS:
            comps = [_random_dma(rng)]
        else:
            n_comp = int(rng.integers(1, cfg.max_components + 1))
            if cfg.recipe == Recipe.B:
                comps = [_random_dma(rng) for _ in range(n_comp)]
            else:
                flavor = int(rng.integers(0, 3))
                if flavor == 0:
                    comps = [_random_dma(rng) for _ in range(n_comp)]
                elif flavor == 1:
                    comps = [_random_rect(rng) for _ in range(n_comp)]
                else:
                    comps = [
                        _random_dma(rng) if rng.integers(0, 2) == 0 else _random_rect(rng)
                        for _ in range(n_comp)
                    ]
        try:
            return AnalyticPattern.from_components(comps, floor_db=cfg.floor_db)
        except DegeneratePatternError:
            continue
    raise DegeneratePatternError(
        f"no non-degenerate pattern after {_DEGENERATE_RETRIES} draws"
    )


def export_pattern_csv(vector: PatternVector, path) -> None:
    """Write angle_deg, gain_linear, gain_db rows for polar plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["angle_deg", "gain_linear", "gain_db"])
        for angle, gain in zip(np.rad2deg(vector.angles), vector.gains):
            writer.writerow([f"{angle:.6f}", f"{gain:.12g}", f"{gain_to_db(gain):.6f}"])


def save_pattern_json(vector: PatternVector, path) -> None:
    with open(path, "w") as fh:
        json.dump(vector.to_json_dict(), fh)


def load_pattern_json(path) -> PatternVector:
    with open(path) as fh:
        return PatternVector.from_json_dict(json.load(fh))
