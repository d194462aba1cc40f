import math

import numpy as np
import pytest
from pydantic import ValidationError

from services.errors import NonFiniteGradient, ShapeMismatch, ZeroNormRow
from services.geometry import min_pairwise_angle, normalize
from services.gradcheck import compare_gradients, finite_diff_gradient
from services.objectives import (
    CombinedLossConfig,
    CosineSoftmaxHead,
    FixedProbabilities,
    Regularizer,
)
from services.optimizer import (
    TRACE_COLUMNS,
    OptimizerConfig,
    OptimizerState,
    ToyEncoder,
    adamw_step,
    prompt_gradient,
    random_prompts,
    trace_frame,
    tune_features,
    tune_prompts,
    write_trace,
)

AD_ONLY = CombinedLossConfig(lambda_=1.0, regularizer=Regularizer.ANGULAR_DIVERSITY)


class TestOptimizerConfig:
    def test_defaults(self):
        cfg = OptimizerConfig()
        assert cfg.learning_rate == 5e-3
        assert cfg.steps == 1
        assert cfg.weight_decay == 0.0
        assert cfg.renormalize_each_step

    @pytest.mark.parametrize("field,value", [("learning_rate", 0.0), ("steps", 0), ("beta1", 1.0), ("weight_decay", -1.0)])
    def test_invalid_values(self, field, value):
        with pytest.raises(ValidationError):
            OptimizerConfig(**{field: value})

    def test_unknown_field(self):
        with pytest.raises(ValidationError):
            OptimizerConfig(momentum=0.5)


class TestAdamWStep:
    def test_decoupled_weight_decay_only(self):
        state = OptimizerState.initial(np.array([[1.0]]), sphere_constrained=False)
        cfg = OptimizerConfig(weight_decay=0.1)
        after = adamw_step(state, np.zeros((1, 1)), cfg)
        assert after.params[0, 0] == pytest.approx(0.9995, abs=1e-15)
        assert after.step_count == 1

    def test_zero_gradient_leaves_params(self, seed0_features):
        state = OptimizerState.initial(seed0_features, sphere_constrained=False)
        after = adamw_step(state, np.zeros_like(seed0_features), OptimizerConfig())
        np.testing.assert_array_equal(after.params, seed0_features)

    def test_first_step_moves_by_learning_rate(self):
        state = OptimizerState.initial(np.array([[1.0, -2.0]]), sphere_constrained=False)
        after = adamw_step(state, np.array([[3.0, -0.5]]), OptimizerConfig())
        np.testing.assert_allclose(after.params, [[1.0 - 5e-3, -2.0 + 5e-3]], atol=1e-9)

    def test_input_state_untouched(self, seed0_features):
        state = OptimizerState.initial(seed0_features)
        before = state.params.copy()
        adamw_step(state, np.ones_like(seed0_features), OptimizerConfig())
        np.testing.assert_array_equal(state.params, before)
        np.testing.assert_array_equal(state.m, 0.0)

    def test_sphere_rows_renormalized(self, seed0_features):
        state = OptimizerState.initial(normalize(seed0_features).data)
        after = adamw_step(state, np.ones_like(seed0_features), OptimizerConfig(learning_rate=0.1))
        np.testing.assert_allclose(np.linalg.norm(after.params, axis=1), 1.0, atol=1e-12)

    def test_bad_gradients(self, seed0_features):
        state = OptimizerState.initial(seed0_features)
        with pytest.raises(ShapeMismatch):
            adamw_step(state, np.zeros((4, 5)), OptimizerConfig())
        grad = np.zeros_like(seed0_features)
        grad[0, 0] = np.nan
        with pytest.raises(NonFiniteGradient):
            adamw_step(state, grad, OptimizerConfig())


class TestTuneFeatures:
    def test_trace_has_one_row_per_step(self, seed0_features, tmp_path):
        _, trace = tune_features(seed0_features, None, OptimizerConfig(steps=3), AD_ONLY)
        assert [row.step for row in trace] == [0, 1, 2]
        frame = trace_frame(trace)
        assert list(frame.columns) == TRACE_COLUMNS
        for row in trace:
            assert row.total_loss == pytest.approx(row.tpt_term + row.reg_term, abs=1e-12)

        path = write_trace(trace, tmp_path / "trace.csv")
        assert path.read_text().splitlines()[0] == "step,total_loss,tpt_term,reg_term"

    def test_fixed_probabilities_without_regularizer_change_nothing(self, seed0_features):
        start = normalize(seed0_features).data
        provider = FixedProbabilities([[0.4, 0.3, 0.1, 0.1, 0.1]])
        final, trace = tune_features(start, provider, OptimizerConfig(steps=5), CombinedLossConfig(lambda_=0.0))
        np.testing.assert_allclose(final.data, start, atol=1e-15)
        assert trace[0].tpt_term == pytest.approx(-math.log(0.4), abs=1e-12)

    def test_single_step_reduces_confidence_loss(self, rng):
        start = normalize(rng.standard_normal((4, 8))).data
        head = CosineSoftmaxHead(rng.standard_normal((1, 8)), temperature=1.0)
        cfg = CombinedLossConfig(lambda_=0.0)
        _, trace = tune_features(start, head, OptimizerConfig(steps=2), cfg)
        assert trace[1].tpt_term < trace[0].tpt_term

    def test_angular_diversity_spreads_three_points(self):
        start = np.random.default_rng(0).standard_normal((3, 2))
        before = min_pairwise_angle(start)
        final, _ = tune_features(start, None, OptimizerConfig(learning_rate=1e-2, steps=2000), AD_ONLY)
        after = min_pairwise_angle(final)
        assert after > before
        assert math.degrees(after) > 110.0

    def test_deterministic(self, seed0_features):
        cfg = OptimizerConfig(steps=10)
        first, trace_a = tune_features(seed0_features, None, cfg, AD_ONLY)
        second, trace_b = tune_features(seed0_features, None, cfg, AD_ONLY)
        np.testing.assert_array_equal(first.data, second.data)
        assert trace_a == trace_b


class TestTunePrompts:
    def test_identity_encoder_matches_feature_tuning(self, rng):
        start = rng.standard_normal((5, 6))
        head = CosineSoftmaxHead(rng.standard_normal((2, 6)), temperature=0.05)
        cfg = OptimizerConfig(steps=4, renormalize_each_step=False)
        loss_cfg = CombinedLossConfig(lambda_=10.0, regularizer=Regularizer.ORTHOGONALITY)

        features, feature_trace = tune_features(start, head, cfg, loss_cfg)
        prompts, prompt_features, prompt_trace = tune_prompts(ToyEncoder.identity(6), start, head, cfg, loss_cfg)
        np.testing.assert_array_equal(prompt_features.data, features.data)
        np.testing.assert_array_equal(prompts, features.data)
        assert prompt_trace == feature_trace

    def test_prompt_gradient_matches_finite_differences(self, rng):
        encoder = ToyEncoder.sample(prompt_dim=6, dim=4, seed=1)
        prompts = random_prompts(5, 6, seed=2)
        head = CosineSoftmaxHead(rng.standard_normal((2, 4)), temperature=0.5)
        loss_cfg = CombinedLossConfig(lambda_=1.0, regularizer=Regularizer.ORTHOGONALITY)

        analytic = prompt_gradient(encoder, prompts, head, loss_cfg).grad
        numeric = finite_diff_gradient(lambda p: prompt_gradient(encoder, p, head, loss_cfg).value, prompts)
        assert compare_gradients(analytic, numeric).passed

    def test_zero_prompts_rejected(self):
        encoder = ToyEncoder.sample(prompt_dim=4, dim=3)
        with pytest.raises(ZeroNormRow):
            tune_prompts(encoder, np.zeros((3, 4)), None, OptimizerConfig(), AD_ONLY)

    def test_prompt_width_mismatch(self):
        encoder = ToyEncoder.sample(prompt_dim=4, dim=3)
        with pytest.raises(ShapeMismatch):
            tune_prompts(encoder, np.ones((3, 5)), None, OptimizerConfig(), AD_ONLY)

    def test_returned_prompts_are_read_only(self):
        encoder = ToyEncoder.sample(prompt_dim=4, dim=3)
        prompts, features, _ = tune_prompts(encoder, random_prompts(3, 4), None, OptimizerConfig(), AD_ONLY)
        with pytest.raises(ValueError):
            prompts[0, 0] = 1.0
        np.testing.assert_allclose(features.data, prompts @ encoder.weight, atol=1e-15)
