import math
import time

import numpy as np
import pytest

from services.errors import DegenerateProbability, ShapeMismatch, TooFewPoints
from services.gradcheck import compare_gradients, finite_diff_gradient
from services.objectives import (
    CombinedLossConfig,
    CosineSoftmaxHead,
    FixedProbabilities,
    Regularizer,
    angular_diversity,
    atfd_loss,
    combined_loss,
    orthogonality_loss,
    regularizer_loss,
    tpt_loss,
    tpt_loss_from_logits,
)
from services.objectives.dispersion import angular_diversity_value

TRIANGLE = np.array([[math.cos(a), math.sin(a)] for a in (0.0, 2 * math.pi / 3, 4 * math.pi / 3)])


class TestAngularDiversity:
    def test_antipodal_pair(self):
        ev = angular_diversity(np.array([[1.0, 0.0], [-1.0, 0.0]]))
        assert ev.value == pytest.approx(-math.pi, abs=5e-4)

    def test_equilateral_triangle(self):
        assert angular_diversity(TRIANGLE).value == pytest.approx(-2 * math.pi / 3, abs=1e-9)

    def test_coincident_pair(self):
        ev = angular_diversity(np.array([[1.0, 0.0], [1.0, 0.0]]))
        assert ev.value == pytest.approx(0.0, abs=5e-4)
        assert np.all(np.isfinite(ev.grad))

    def test_single_row_rejected(self):
        with pytest.raises(TooFewPoints):
            angular_diversity(np.ones((1, 3)))

    def test_symmetric_optimum_is_stationary(self):
        # every point's two partners tie, so the averaged subgradient cancels
        np.testing.assert_allclose(angular_diversity(TRIANGLE).grad, 0.0, atol=1e-12)

    def test_bounds(self, rng):
        for _ in range(20):
            ad = -angular_diversity(rng.standard_normal((6, 3))).value
            assert 0.0 <= ad <= math.pi

    def test_smooth_min_approaches_hard_min(self, seed0_features):
        hard = angular_diversity(seed0_features).value
        smooth = angular_diversity(seed0_features, smooth_beta=1e4).value
        assert smooth == pytest.approx(hard, abs=1e-3)

    def test_descent_step_does_not_increase_loss(self, seed0_features):
        ev = angular_diversity(seed0_features)
        stepped = seed0_features - 1e-6 * ev.grad
        assert angular_diversity_value(stepped) <= ev.value + 1e-12


class TestOrthogonality:
    def test_orthogonal_rows(self):
        assert orthogonality_loss(np.eye(2)).value == pytest.approx(0.0, abs=1e-15)

    def test_coincident_rows_clamped(self):
        assert orthogonality_loss(np.array([[1.0, 0.0], [1.0, 0.0]])).value == pytest.approx(1.0, abs=1e-6)

    def test_sixty_degree_triple(self):
        rows = np.array([[1.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
        assert orthogonality_loss(rows).value == pytest.approx(0.25, abs=1e-9)

    def test_zero_iff_orthogonal_when_n_le_d(self, rng):
        q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        assert orthogonality_loss(q[:3]).value == pytest.approx(0.0, abs=1e-12)
        assert orthogonality_loss(rng.standard_normal((3, 5))).value > 1e-6


class TestATFD:
    def test_antipodal(self):
        assert atfd_loss(np.array([[1.0, 0.0], [-1.0, 0.0]])).value == pytest.approx(-1.0, abs=1e-12)

    def test_identical_rows(self):
        ev = atfd_loss(np.array([[2.0, 1.0], [2.0, 1.0], [4.0, 2.0]]))
        assert ev.value == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(ev.grad, 0.0, atol=1e-12)

    def test_orthogonal_pair(self):
        assert atfd_loss(np.eye(2)).value == pytest.approx(-math.sqrt(2) / 2, abs=1e-12)


class TestObjectiveProperties:
    @pytest.mark.parametrize("objective", [angular_diversity, orthogonality_loss, atfd_loss])
    def test_permutation_invariance(self, objective, seed0_features):
        perm = np.array([3, 0, 4, 1, 2])
        base = objective(seed0_features)
        permuted = objective(seed0_features[perm])
        assert permuted.value == pytest.approx(base.value, abs=1e-10)
        np.testing.assert_allclose(permuted.grad, base.grad[perm], atol=1e-10)

    @pytest.mark.parametrize("objective", [angular_diversity, orthogonality_loss, atfd_loss])
    def test_scale_invariance_and_inverse_gradient(self, objective, seed0_features):
        base = objective(seed0_features)
        scaled = objective(3.0 * seed0_features)
        assert abs(scaled.value - base.value) < 1e-9
        np.testing.assert_allclose(scaled.grad, base.grad / 3.0, atol=1e-10)

    def test_grad_is_read_only(self, seed0_features):
        ev = orthogonality_loss(seed0_features)
        with pytest.raises(ValueError):
            ev.grad[0, 0] = 1.0

    def test_none_regularizer_is_zero(self, seed0_features):
        ev = regularizer_loss(Regularizer.NONE, seed0_features)
        assert ev.value == 0.0
        np.testing.assert_array_equal(ev.grad, 0.0)


class TestTPTLoss:
    def test_confident_prediction(self):
        assert tpt_loss([1 - 1e-9, 1e-9]).value == pytest.approx(1e-9, rel=1e-6)

    def test_uniform_four_classes(self):
        assert tpt_loss([0.25] * 4).value == pytest.approx(math.log(4), abs=1e-12)

    def test_half_max(self):
        assert tpt_loss([0.5, 0.25, 0.25]).value == pytest.approx(math.log(2), abs=1e-12)

    def test_entropy_mode(self):
        assert tpt_loss([0.25] * 4, mode="entropy").value == pytest.approx(math.log(4), abs=1e-12)

    def test_batch_mean(self):
        batch = [[0.5, 0.5], [0.25, 0.75]]
        expected = (math.log(2) - math.log(0.75)) / 2
        assert tpt_loss(batch).value == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("probs", [[1.0, 0.0], [0.5, 0.6], [float("nan"), 1.0]])
    def test_degenerate_vectors(self, probs):
        with pytest.raises(DegenerateProbability):
            tpt_loss(probs)

    @pytest.mark.parametrize("mode", ["max_log_prob", "entropy"])
    def test_logit_gradient_matches_finite_differences(self, mode, rng):
        logits = rng.standard_normal((3, 5))
        analytic = tpt_loss_from_logits(logits, mode).grad
        numeric = finite_diff_gradient(lambda x: tpt_loss_from_logits(x, mode).value, logits)
        assert compare_gradients(analytic, numeric).passed


class TestCosineSoftmaxHead:
    def test_probabilities_sum_to_one(self, rng):
        head = CosineSoftmaxHead(rng.standard_normal((4, 6)), temperature=0.01)
        probs = head.probabilities(rng.standard_normal((10, 6)))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_dimension_mismatch(self, rng):
        head = CosineSoftmaxHead(rng.standard_normal((1, 6)))
        with pytest.raises(ShapeMismatch):
            head.logits(rng.standard_normal((4, 5)))

    @pytest.mark.parametrize("mode", ["max_log_prob", "entropy"])
    def test_chained_gradient_matches_finite_differences(self, mode, rng):
        features = rng.standard_normal((6, 4))
        head = CosineSoftmaxHead(rng.standard_normal((2, 4)), temperature=0.5)
        cfg = CombinedLossConfig(lambda_=0.0, tpt_mode=mode)
        analytic = combined_loss(features, None, cfg, head=head).grad
        numeric = finite_diff_gradient(lambda x: combined_loss(x, None, cfg, head=head).value, features)
        assert compare_gradients(analytic, numeric).passed

    def test_fixed_probabilities_have_no_feature_gradient(self, seed0_features):
        provider = FixedProbabilities([[0.7, 0.1, 0.1, 0.05, 0.05]])
        np.testing.assert_array_equal(provider.backward(seed0_features, np.ones((1, 5))), 0.0)


class TestCombinedLoss:
    def test_lambda_zero_equals_tpt(self, seed0_features):
        probs = [[0.6, 0.2, 0.1, 0.05, 0.05]]
        ev = combined_loss(seed0_features, probs, CombinedLossConfig(lambda_=0.0))
        assert ev.value == tpt_loss(probs).value
        assert ev.reg_term == 0.0

    def test_confident_antipodal_pair(self):
        cfg = CombinedLossConfig(lambda_=80.0, regularizer=Regularizer.ANGULAR_DIVERSITY)
        ev = combined_loss(np.array([[1.0, 0.0], [-1.0, 0.0]]), [[1 - 1e-12, 1e-12]], cfg)
        assert ev.value == pytest.approx(-80 * math.pi, abs=5e-2)

    def test_default_lambda(self):
        cfg = CombinedLossConfig()
        assert cfg.lambda_ == 80.0
        assert CombinedLossConfig.model_validate({"lambda": 10.0}).lambda_ == 10.0

    def test_gradient_is_sum_of_parts(self, seed0_features):
        cfg = CombinedLossConfig(lambda_=10.0, regularizer=Regularizer.ORTHOGONALITY)
        head = CosineSoftmaxHead(np.ones((1, 4)), temperature=0.1)
        ev = combined_loss(seed0_features, None, cfg, head=head)
        tpt_only = combined_loss(seed0_features, None, CombinedLossConfig(lambda_=0.0), head=head)
        np.testing.assert_allclose(
            ev.grad, tpt_only.grad + 10.0 * orthogonality_loss(seed0_features).grad, atol=1e-12
        )
        assert ev.value == pytest.approx(ev.tpt_term + ev.reg_term, abs=1e-12)

    def test_negative_lambda_rejected(self):
        with pytest.raises(ValueError):
            CombinedLossConfig(lambda_=-1.0)


def _best_time(objective, features, repeats=5):
    objective(features)
    timings = []
    for _ in range(repeats):
        start = time.perf_counter()
        objective(features)
        timings.append(time.perf_counter() - start)
    return min(timings)


class TestCost:
    def test_angular_diversity_scales_quadratically_in_classes(self):
        rng = np.random.default_rng(0)
        small = _best_time(angular_diversity, rng.standard_normal((400, 256)))
        large = _best_time(angular_diversity, rng.standard_normal((800, 256)))
        assert 2.5 <= large / small <= 6.0
