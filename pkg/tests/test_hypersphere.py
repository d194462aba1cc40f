import math

import numpy as np
import pytest

from services.errors import TooFewPoints, ZeroNormRow
from services.geometry import (
    AngleMatrix,
    CosineMatrix,
    FeatureMatrix,
    angle_matrix,
    cosine_matrix,
    load_features,
    min_pairwise_angle,
    nearest_angles,
    normalize,
    off_diagonal_cosine_stats,
    save_features,
)


class TestNormalize:
    def test_rows_become_unit(self, rng):
        nf = normalize(rng.standard_normal((6, 5)) * 7.0)
        np.testing.assert_allclose(np.linalg.norm(nf.data, axis=1), 1.0, atol=1e-12)

    def test_scale_invariance(self):
        x = np.array([[3.0, 4.0], [1.0, 0.0]])
        np.testing.assert_allclose(normalize(x).data, normalize(5 * x).data, atol=1e-15)
        np.testing.assert_allclose(normalize(x).data[0], [0.6, 0.8], atol=1e-15)

    def test_zero_row_reports_index(self):
        with pytest.raises(ZeroNormRow) as exc:
            normalize(np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]))
        assert exc.value.index == 1

    def test_accepts_feature_matrix(self):
        fm = FeatureMatrix(np.array([[2.0, 0.0], [0.0, 3.0]]))
        np.testing.assert_allclose(normalize(fm).data, np.eye(2))

    def test_idempotent(self, rng):
        once = normalize(rng.standard_normal((8, 6)) * 3.0)
        np.testing.assert_allclose(normalize(once.data).data, once.data, atol=1e-12)


class TestFeatureMatrix:
    def test_single_row_rejected(self):
        with pytest.raises(TooFewPoints):
            FeatureMatrix(np.ones((1, 3)))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            FeatureMatrix(np.array([[1.0, np.nan], [0.0, 1.0]]))

    def test_data_is_read_only(self):
        fm = FeatureMatrix(np.eye(3))
        with pytest.raises(ValueError):
            fm.data[0, 0] = 5.0

    def test_csv_round_trip_is_exact(self, tmp_path, rng):
        fm = FeatureMatrix(rng.standard_normal((4, 3)))
        path = tmp_path / "features.csv"
        save_features(fm, path)
        np.testing.assert_array_equal(load_features(path).data, fm.data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_features(tmp_path / "nope.csv")


class TestCosineAndAngles:
    def test_orthogonal_basis(self):
        cos = cosine_matrix(normalize(np.eye(3)))
        np.testing.assert_allclose(cos.data, np.eye(3), atol=1e-15)
        theta = angle_matrix(cos)
        off = ~np.eye(3, dtype=bool)
        np.testing.assert_allclose(theta.data[off], math.pi / 2, atol=1e-12)

    def test_symmetric_with_unit_diagonal(self, rng):
        cos = cosine_matrix(normalize(rng.standard_normal((7, 4)))).data
        np.testing.assert_array_equal(cos, cos.T)
        np.testing.assert_array_equal(np.diag(cos), 1.0)
        assert np.all(np.abs(cos) <= 1.0)

    def test_antipodal_pair_is_clamped(self):
        cos = cosine_matrix(normalize(np.array([[1.0, 0.0], [-1.0, 0.0]])))
        assert cos.data[0, 1] == pytest.approx(-1.0 + 1e-7, abs=1e-15)
        theta = angle_matrix(cos).data[0, 1]
        assert theta < math.pi
        assert theta == pytest.approx(math.pi, abs=1e-3)

    def test_coincident_pair_is_clamped(self):
        cos = cosine_matrix(normalize(np.array([[1.0, 0.0], [1.0, 0.0]])))
        assert cos.data[0, 1] == 1.0 - 1e-7
        assert angle_matrix(cos).data[0, 1] > 0.0

    def test_row_scaling_leaves_cosines_unchanged(self, rng):
        x = rng.standard_normal((6, 5))
        scaled = x * np.array([0.5, 2.0, 10.0, 1.0, 3e-3, 70.0])[:, None]
        np.testing.assert_allclose(
            cosine_matrix(normalize(scaled)).data, cosine_matrix(normalize(x)).data, atol=1e-10
        )

    def test_half_cosine_is_sixty_degrees(self):
        theta = angle_matrix(CosineMatrix(np.array([[1.0, 0.5], [0.5, 1.0]]))).data
        assert theta[0, 1] == pytest.approx(math.pi / 3, abs=1e-12)

    def test_angle_diagonal_is_zero(self, rng):
        theta = angle_matrix(cosine_matrix(normalize(rng.standard_normal((5, 3))))).data
        np.testing.assert_array_equal(np.diag(theta), 0.0)

    def test_invalid_matrices_rejected(self):
        with pytest.raises(ValueError):
            CosineMatrix(np.array([[1.0, 0.2], [0.3, 1.0]]))
        with pytest.raises(ValueError):
            AngleMatrix(np.array([[0.0, 4.0], [4.0, 0.0]]))

    @pytest.mark.parametrize("data", [
        [[0.0, 1.0], [1.0 + 1e-8, 0.0]],
        [[0.1, 1.0], [1.0, 0.0]],
    ])
    def test_asymmetric_or_nonzero_diagonal_angles_rejected(self, data):
        with pytest.raises(ValueError):
            AngleMatrix(np.array(data))

    def test_angle_matrix_within_symmetry_tolerance(self):
        theta = AngleMatrix(np.array([[0.0, 1.0], [1.0 + 1e-12, 0.0]]))
        assert theta.data[1, 0] == 1.0 + 1e-12


class TestAngleStatistics:
    def test_square_on_circle(self):
        square = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        assert min_pairwise_angle(square) == pytest.approx(math.pi / 2, abs=1e-12)
        np.testing.assert_allclose(nearest_angles(square), math.pi / 2, atol=1e-12)

    def test_cosine_stats_of_orthonormal_rows(self):
        mean, std = off_diagonal_cosine_stats(np.eye(4))
        assert mean == pytest.approx(0.0, abs=1e-15)
        assert std == pytest.approx(0.0, abs=1e-15)

    def test_cosine_stats_of_simplex(self):
        simplex = np.array([[1.0, 0.0], [-0.5, math.sqrt(3) / 2], [-0.5, -math.sqrt(3) / 2]])
        mean, std = off_diagonal_cosine_stats(simplex)
        assert mean == pytest.approx(-0.5, abs=1e-12)
        assert std == pytest.approx(0.0, abs=1e-12)
