import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dirfilt.errors import DegeneratePatternError, ValidationError
from dirfilt.patterns import (
    AnalyticPattern,
    GeneralDmaSpec,
    PatternVector,
    Recipe,
    RecipeConfig,
    RectSpec,
    SimplifiedDmaSpec,
    apply_floor,
    combine,
    eval_general_dma,
    eval_rect,
    eval_simplified_dma,
    gen_recipe,
    gen_recipe_a,
    interp_pattern,
    sample_pattern,
)

TWO_PI = 2.0 * math.pi


def dma_oracle_longdouble(mu, theta_s, order_j, theta):
    """Independent evaluation of the single-lobe formula in 80-bit precision."""
    mu = np.longdouble(mu)
    base = mu + (np.longdouble(1.0) - mu) * np.cos(
        np.asarray(theta, dtype=np.longdouble) - np.longdouble(theta_s)
    )
    return np.abs(base) ** int(order_j)


class TestSimplifiedDma:
    def test_max_at_steering(self):
        spec = SimplifiedDmaSpec(mu=0.5, theta_s=0.0, order_j=1)
        assert eval_simplified_dma(spec, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_cardioid_null(self):
        spec = SimplifiedDmaSpec(mu=0.5, theta_s=0.0, order_j=1)
        assert eval_simplified_dma(spec, math.pi) == pytest.approx(0.0, abs=1e-15)

    def test_hand_value(self):
        # |0.2 + 0.8*cos(pi/3)|^2 = |0.2 + 0.8*0.5|^2 = 0.36
        spec = SimplifiedDmaSpec(mu=0.2, theta_s=0.0, order_j=2)
        assert eval_simplified_dma(spec, math.pi / 3) == pytest.approx(0.36, abs=1e-12)

    def test_matches_high_precision_oracle(self):
        rng = np.random.default_rng(7)
        mus = rng.integers(0, 11, size=2000) / 10.0
        steers = rng.uniform(0, TWO_PI, size=2000)
        orders = rng.integers(1, 12, size=2000)
        thetas = rng.uniform(-10, 10, size=2000)
        for mu, ts, j, th in zip(mus, steers, orders, thetas):
            got = eval_simplified_dma(SimplifiedDmaSpec(mu=mu, theta_s=ts, order_j=int(j)), th)
            want = dma_oracle_longdouble(mu, ts, int(j), th)
            assert abs(got - float(want)) < 1e-12

    def test_mu_one_is_omni(self):
        for j in (1, 3, 7):
            spec = SimplifiedDmaSpec(mu=1.0, theta_s=1.2, order_j=j)
            thetas = np.linspace(0, TWO_PI, 50)
            assert np.allclose(eval_simplified_dma(spec, thetas), 1.0, atol=1e-15)

    @given(
        mu=st.floats(0.0, 1.0),
        theta_s=st.floats(0.0, TWO_PI),
        order_j=st.integers(1, 11),
        delta=st.floats(-10.0, 10.0),
    )
    @settings(max_examples=200)
    def test_periodic_and_symmetric(self, mu, theta_s, order_j, delta):
        spec = SimplifiedDmaSpec(mu=mu, theta_s=theta_s, order_j=order_j)
        a = eval_simplified_dma(spec, theta_s + delta)
        b = eval_simplified_dma(spec, theta_s - delta)
        c = eval_simplified_dma(spec, theta_s + delta + TWO_PI)
        assert a == pytest.approx(b, abs=1e-9)
        assert a == pytest.approx(c, abs=1e-9)
        assert -1e-12 <= a <= 1.0 + 1e-12

    def test_invalid_specs(self):
        with pytest.raises(ValidationError):
            SimplifiedDmaSpec(mu=1.5)
        with pytest.raises(ValidationError):
            SimplifiedDmaSpec(mu=0.5, order_j=0)


class TestGeneralDma:
    def test_omni(self):
        spec = GeneralDmaSpec(coeffs=(1.0,))
        assert eval_general_dma(spec, 2.2) == pytest.approx(1.0)

    def test_cardioid_null(self):
        spec = GeneralDmaSpec(coeffs=(0.5, 0.5))
        assert eval_general_dma(spec, math.pi) == pytest.approx(0.0, abs=1e-15)

    def test_polynomial_value(self):
        # 0.25 + 0.5*cos(pi/2) + 0.25*cos^2(pi/2) = 0.25
        spec = GeneralDmaSpec(coeffs=(0.25, 0.5, 0.25))
        assert eval_general_dma(spec, math.pi / 2) == pytest.approx(0.25, abs=1e-12)

    def test_can_be_negative(self):
        spec = GeneralDmaSpec(coeffs=(0.0, 1.0))
        assert eval_general_dma(spec, math.pi) == pytest.approx(-1.0)

    def test_empty_coeffs(self):
        with pytest.raises(ValidationError):
            GeneralDmaSpec(coeffs=())

    def test_matches_naive_polynomial(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            coeffs = tuple(rng.normal(size=rng.integers(1, 6)))
            ts = rng.uniform(0, TWO_PI)
            th = rng.uniform(-5, 5)
            spec = GeneralDmaSpec(coeffs=coeffs, theta_s=ts)
            naive = sum(a * math.cos(th - ts) ** j for j, a in enumerate(coeffs))
            assert eval_general_dma(spec, th) == pytest.approx(naive, abs=1e-12)


class TestRect:
    def test_inside(self):
        spec = RectSpec(np.deg2rad(30), np.deg2rad(90))
        assert eval_rect(spec, np.deg2rad(45)) == 1.0

    def test_outside(self):
        spec = RectSpec(np.deg2rad(30), np.deg2rad(90))
        assert eval_rect(spec, np.deg2rad(120)) == 0.0

    def test_wraparound(self):
        spec = RectSpec(np.deg2rad(350), np.deg2rad(10))
        assert eval_rect(spec, 0.0) == 1.0
        assert eval_rect(spec, np.deg2rad(180)) == 0.0

    def test_boundaries_inclusive(self):
        spec = RectSpec(np.deg2rad(30), np.deg2rad(90))
        assert eval_rect(spec, np.deg2rad(30)) == 1.0
        assert eval_rect(spec, np.deg2rad(90)) == 1.0


class TestCombine:
    def test_single_cardioid_identity(self):
        spec = SimplifiedDmaSpec(mu=0.5, theta_s=0.0, order_j=1)
        pattern = combine([spec])
        assert pattern.normalizer == pytest.approx(1.0, abs=1e-12)
        thetas = np.linspace(0, TWO_PI, 37)
        assert np.allclose(pattern.evaluate(thetas), eval_simplified_dma(spec, thetas), atol=1e-12)

    def test_opposed_cardioids_sum_to_one(self):
        a = SimplifiedDmaSpec(mu=0.5, theta_s=0.0, order_j=1)
        b = SimplifiedDmaSpec(mu=0.5, theta_s=math.pi, order_j=1)
        pattern = combine([a, b])
        thetas = np.linspace(0, TWO_PI, 123)
        assert np.allclose(pattern.evaluate(thetas), 1.0, atol=1e-12)

    def test_duplicate_components_are_rescaled_away(self):
        spec = SimplifiedDmaSpec(mu=0.3, theta_s=1.0, order_j=2)
        once = combine([spec])
        twice = combine([spec, spec])
        thetas = np.linspace(0, TWO_PI, 100)
        assert np.allclose(once.evaluate(thetas), twice.evaluate(thetas), atol=1e-12)

    def test_order_invariance(self):
        specs = [
            SimplifiedDmaSpec(mu=0.2, theta_s=0.3, order_j=2),
            RectSpec(1.0, 2.0),
            SimplifiedDmaSpec(mu=0.8, theta_s=4.0, order_j=5),
        ]
        fwd = combine(specs)
        rev = combine(specs[::-1])
        thetas = np.linspace(0, TWO_PI, 100)
        assert np.allclose(fwd.evaluate(thetas), rev.evaluate(thetas), atol=1e-12)

    def test_all_zero_is_degenerate(self):
        with pytest.raises(DegeneratePatternError):
            combine([GeneralDmaSpec(coeffs=(0.0,))])

    def test_evaluate_range(self):
        rng = np.random.default_rng(11)
        cfg = RecipeConfig(recipe=Recipe.B_PLUS, rng_seed=0)
        thetas = rng.uniform(0, TWO_PI, size=500)
        for _ in range(50):
            pattern = gen_recipe(cfg, rng)
            vals = pattern.evaluate(thetas)
            assert vals.min() >= 0.0 and vals.max() <= 1.0


class TestFloor:
    def test_zero_floors_to_tenth(self):
        assert apply_floor(0.0, -20.0) == pytest.approx(0.1)

    def test_above_floor_unchanged(self):
        assert apply_floor(0.5, -20.0) == 0.5

    def test_boundary_fixed_point(self):
        assert apply_floor(0.1, -20.0) == pytest.approx(0.1)

    def test_positive_floor_rejected(self):
        with pytest.raises(ValidationError):
            apply_floor(0.5, 1.0)


class TestSampling:
    def test_omni_all_ones(self):
        pattern = combine([SimplifiedDmaSpec(mu=1.0)])
        vec = sample_pattern(pattern, 72)
        assert vec.l == 72
        assert np.allclose(vec.gains, 1.0, atol=1e-15)

    def test_cardioid_l4_with_floor(self):
        # Eq values at 0/90/180/270 deg: 1.0, 0.5, 0.0, 0.5; floored at 0.1.
        pattern = combine([SimplifiedDmaSpec(mu=0.5, theta_s=0.0, order_j=1)])
        vec = sample_pattern(pattern, 4)
        assert np.allclose(vec.gains, [1.0, 0.5, 0.1, 0.5], atol=1e-12)

    def test_l72_angles(self):
        pattern = combine([SimplifiedDmaSpec(mu=1.0)])
        vec = sample_pattern(pattern, 72)
        assert np.allclose(np.rad2deg(vec.angles), np.arange(0, 360, 5))

    def test_min_l(self):
        pattern = combine([SimplifiedDmaSpec(mu=1.0)])
        with pytest.raises(ValidationError):
            sample_pattern(pattern, 3)


class TestInterp:
    def test_exact_at_samples(self):
        rng = np.random.default_rng(5)
        gains = np.clip(rng.uniform(0.1, 1.0, size=72), 0, 1)
        vec = PatternVector(gains=gains)
        for i in range(72):
            theta = TWO_PI * i / 72
            assert interp_pattern(vec, theta) == pytest.approx(gains[i], abs=1e-12)

    def test_constant_everywhere(self):
        vec = PatternVector(gains=np.full(8, 0.4))
        thetas = np.random.default_rng(1).uniform(0, TWO_PI, size=40)
        assert np.allclose(interp_pattern(vec, thetas), 0.4, atol=1e-15)

    def test_midpoint(self):
        vec = PatternVector(gains=np.array([1.0, 0.5, 1.0, 0.5]))
        theta = TWO_PI * 0.5 / 4  # halfway between index 0 and 1
        assert interp_pattern(vec, theta) == pytest.approx(0.75, abs=1e-12)

    def test_wraparound_segment(self):
        vec = PatternVector(gains=np.array([1.0, 0.5, 1.0, 0.2]))
        theta = TWO_PI * 3.5 / 4  # halfway between last and first sample
        assert interp_pattern(vec, theta) == pytest.approx(0.6, abs=1e-12)

    def test_roundtrip_sample_interp(self):
        pattern = combine([SimplifiedDmaSpec(mu=0.4, theta_s=0.7, order_j=3)])
        vec = sample_pattern(pattern, 72)
        assert np.allclose(interp_pattern(vec, vec.angles), vec.gains, atol=1e-12)


class TestRecipes:
    def test_recipe_a_count_and_distinct(self):
        patterns = gen_recipe_a()
        assert len(patterns) == 60
        specs = {(p.components[0].mu, p.components[0].theta_s, p.components[0].order_j) for p in patterns}
        assert len(specs) == 60

    def test_recipe_a_first_order_and_steerings(self):
        patterns = gen_recipe_a()
        steers = set()
        for p in patterns:
            (spec,) = p.components
            assert spec.order_j == 1
            steers.add(round(math.degrees(spec.theta_s), 6))
        assert steers == {0.0, 60.0, 120.0, 180.0, 240.0, 300.0}

    def test_seed_determinism(self):
        cfg = RecipeConfig(recipe=Recipe.B, rng_seed=42)
        a = gen_recipe(cfg, np.random.default_rng(42))
        b = gen_recipe(cfg, np.random.default_rng(42))
        assert a.components == b.components
        assert a.normalizer == b.normalizer

    def test_bminus_single_component(self):
        cfg = RecipeConfig(recipe=Recipe.B_MINUS)
        rng = np.random.default_rng(0)
        for _ in range(100):
            pattern = gen_recipe(cfg, rng)
            assert len(pattern.components) == 1
            assert isinstance(pattern.components[0], SimplifiedDmaSpec)

    def test_b_component_count_bounded(self):
        cfg = RecipeConfig(recipe=Recipe.B, max_components=4)
        rng = np.random.default_rng(0)
        counts = {len(gen_recipe(cfg, rng).components) for _ in range(200)}
        assert counts <= {1, 2, 3, 4}
        assert len(counts) > 1

    def test_b_grid_max_is_one(self):
        grid = TWO_PI * np.arange(720) / 720
        rng = np.random.default_rng(123)
        for recipe in (Recipe.B, Recipe.B_PLUS):
            cfg = RecipeConfig(recipe=recipe)
            for _ in range(300):
                pattern = gen_recipe(cfg, rng)
                assert abs(pattern.evaluate(grid).max() - 1.0) <= 1e-9

    def test_bplus_produces_rects(self):
        cfg = RecipeConfig(recipe=Recipe.B_PLUS)
        rng = np.random.default_rng(9)
        kinds = set()
        for _ in range(100):
            for comp in gen_recipe(cfg, rng).components:
                kinds.add(type(comp).__name__)
        assert kinds == {"SimplifiedDmaSpec", "RectSpec"}


class TestSerialization:
    def test_vector_json_roundtrip(self):
        pattern = combine([SimplifiedDmaSpec(mu=0.5, theta_s=1.0)])
        vec = sample_pattern(pattern, 72)
        data = vec.to_json_dict()
        assert data["l"] == 72
        back = PatternVector.from_json_dict(data)
        assert np.array_equal(back.gains, vec.gains)

    def test_analytic_json_roundtrip(self):
        pattern = combine(
            [SimplifiedDmaSpec(mu=0.3, theta_s=2.0, order_j=4), RectSpec(0.5, 1.5)],
            floor_db=-20.0,
        )
        back = AnalyticPattern.from_json_dict(pattern.to_json_dict())
        assert back.components == pattern.components
        assert back.normalizer == pytest.approx(pattern.normalizer, rel=1e-15)

    def test_json_degree_fields(self):
        got = AnalyticPattern.from_json_dict(
            {
                "components": [
                    {"kind": "dma-simplified", "mu": 0.5, "theta_s_deg": 90},
                    {"kind": "rect", "theta_start_deg": 300, "theta_end_deg": 60},
                ]
            }
        )
        want = combine(
            [
                SimplifiedDmaSpec(mu=0.5, theta_s=np.pi / 2),
                RectSpec(np.deg2rad(300.0), np.deg2rad(60.0)),
            ]
        )
        theta = np.linspace(0.0, 2 * np.pi, 37)
        np.testing.assert_allclose(got.evaluate(theta), want.evaluate(theta), atol=1e-15)

    def test_json_rejects_bad_component_fields(self):
        # missing required field: a clear error, not a KeyError
        with pytest.raises(ValidationError, match="theta_end"):
            AnalyticPattern.from_json_dict(
                {"components": [{"kind": "rect", "theta_start_deg": 10}]}
            )
        # unknown fields must not be dropped silently
        with pytest.raises(ValidationError, match="unexpected field"):
            AnalyticPattern.from_json_dict(
                {"components": [{"kind": "dma-simplified", "mu": 0.5, "steer": 1.0}]}
            )
        # the same angle in radian and degree form at once is ambiguous
        with pytest.raises(ValidationError, match="both radian and degree"):
            AnalyticPattern.from_json_dict(
                {
                    "components": [
                        {"kind": "dma-simplified", "mu": 0.5, "theta_s": 1.0, "theta_s_deg": 57}
                    ]
                }
            )
        with pytest.raises(ValidationError, match="unknown component kind"):
            AnalyticPattern.from_json_dict({"components": [{"kind": "blob"}]})

    def test_csv_export(self, tmp_path):
        from dirfilt.patterns import export_pattern_csv

        pattern = combine([SimplifiedDmaSpec(mu=0.5)])
        vec = sample_pattern(pattern, 8)
        path = tmp_path / "pattern.csv"
        export_pattern_csv(vec, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "angle_deg,gain_linear,gain_db"
        assert len(lines) == 9
