"""Tests for the Henze-Penrose estimators."""

import numpy as np
import pytest

from src.fdiv_regressor.divergence import (
    LabeledPointSet,
    f_alpha,
    hp_divergence_exact,
    hp_divergence_smoothed,
    nearest_neighbors,
    nn_cut_count,
    smoothed_cut_mass,
    smoothed_divergence_grad,
)
from src.fdiv_regressor.errors import ContractViolation
from src.fdiv_regressor.models import EstimatorKind
from src.fdiv_regressor.numerics import Rng, pairwise_distances


def _sets(a, b) -> LabeledPointSet:
    return LabeledPointSet(a, b)


def _swapped(sets: LabeledPointSet) -> LabeledPointSet:
    return LabeledPointSet(sets.points_b, sets.points_a)


class TestLabeledPointSet:
    """Tests for the pooled node set."""

    def test_pooled_order(self, interleaved_points):
        """Targets come first, then predictions."""
        sets = _sets(*interleaved_points)
        np.testing.assert_array_equal(sets.pooled[:, 0], [0.0, 2.0, 1.0, 3.0])
        np.testing.assert_array_equal(sets.labels, [0, 0, 1, 1])

    def test_dimension_mismatch(self):
        """Point sets must share their dimension."""
        with pytest.raises(ContractViolation):
            _sets([[0.0, 1.0]], [[1.0]])

    def test_empty_rejected(self):
        """Both sets must be nonempty."""
        with pytest.raises(ContractViolation):
            _sets(np.zeros((0, 1)), [[1.0]])


class TestFAlpha:
    """Tests for the f-function."""

    @pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.9])
    def test_zero_at_one(self, alpha: float):
        """f(1) = 0 up to rounding."""
        assert f_alpha(1.0, alpha) == pytest.approx(0.0, abs=1e-15)

    def test_balanced_closed_form(self):
        """With alpha 0.5, f(t) = (t - 1)^2 / (2 (t + 1))."""
        assert f_alpha(3.0, 0.5) == pytest.approx(0.5, abs=1e-12)
        assert f_alpha(0.0, 0.5) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
    def test_convex_near_one(self, alpha: float):
        """Second central difference at t = 1 is positive."""
        h = 0.01
        second = f_alpha(1 + h, alpha) - 2 * f_alpha(1.0, alpha) + f_alpha(1 - h, alpha)
        assert second > 0

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2])
    def test_alpha_out_of_range(self, alpha: float):
        """Alpha must lie strictly inside (0, 1)."""
        with pytest.raises(ContractViolation):
            f_alpha(1.0, alpha)


class TestExactEstimator:
    """Tests for the nearest-neighbor cut count estimator."""

    def test_separated_clusters(self, separated_points):
        """Every nearest neighbor is within its own set."""
        sets = _sets(*separated_points)
        assert nn_cut_count(sets) == 0
        report = hp_divergence_exact(sets)
        assert report.d_raw == 1.0
        assert report.d_clamped == 1.0

    def test_interleaved(self, interleaved_points):
        """All four directed edges cross, with lowest-index tie-breaking."""
        sets = _sets(*interleaved_points)
        assert nn_cut_count(sets) == 4
        report = hp_divergence_exact(sets)
        assert report.d_raw == -1.0
        assert report.d_clamped == 0.0
        assert report.estimator == EstimatorKind.EXACT

    def test_tie_breaks_to_lowest_index(self, interleaved_points):
        """Node 2.0 is equidistant from 1.0 and 3.0 and picks 1.0 (index 2)."""
        neighbors = nearest_neighbors(_sets(*interleaved_points))
        assert neighbors[1] == 2

    def test_two_singletons(self):
        """Two single points are each other's neighbor."""
        sets = _sets([[5.0]], [[7.0]])
        assert nn_cut_count(sets) == 2
        assert hp_divergence_exact(sets).d_raw == -1.0

    def test_unbalanced_inversion(self):
        """General sample ratio: d_raw = 1 - n t / (2 n0 n1)."""
        sets = _sets([[0.0], [0.1], [0.2]], [[5.0]])
        cut = nn_cut_count(sets)
        report = hp_divergence_exact(sets)
        assert report.alpha == pytest.approx(0.75)
        assert report.d_raw == pytest.approx(1 - 4 * cut / (2 * 3 * 1))

    def test_symmetry(self, rng: Rng):
        """Swapping the sets keeps the cut count and divergence."""
        a = rng.generator.normal(size=(15, 2))
        b = rng.generator.normal(size=(15, 2)) + 0.5
        sets = _sets(a, b)
        assert nn_cut_count(sets) == nn_cut_count(_swapped(sets))
        assert hp_divergence_exact(sets).d_raw == hp_divergence_exact(_swapped(sets)).d_raw

    def test_same_distribution_small(self):
        """Same-distribution 200 vs 200 draws have mean clamped divergence below 0.15."""
        values = []
        for seed in range(20):
            generator = Rng(seed).generator
            a = generator.normal(size=(200, 2))
            b = generator.normal(size=(200, 2))
            values.append(hp_divergence_exact(_sets(a, b)).d_clamped)
        assert np.mean(values) < 0.15

    def test_disjoint_support_large(self):
        """Disjoint supports give a clamped divergence above 0.95."""
        for seed in range(20):
            generator = Rng(seed).generator
            a = generator.uniform(0.0, 1.0, size=(200, 2))
            b = generator.uniform(0.0, 1.0, size=(200, 2)) + np.array([5.0, 0.0])
            assert hp_divergence_exact(_sets(a, b)).d_clamped > 0.95

    def test_separation_monotone(self):
        """Mean divergence does not decrease as two clouds move apart."""
        means = []
        for separation in (0.0, 2.0, 4.0, 8.0):
            values = []
            for seed in range(20):
                generator = Rng(seed).generator
                a = generator.normal(size=(100, 2))
                b = generator.normal(size=(100, 2)) + np.array([separation, 0.0])
                values.append(hp_divergence_exact(_sets(a, b)).d_clamped)
            means.append(np.mean(values))
        assert all(later >= earlier for earlier, later in zip(means, means[1:]))


class TestSmoothedEstimator:
    """Tests for the softmax-smoothed cut mass."""

    def test_single_pair(self):
        """One target and one prediction: cut mass 2, d_raw -1."""
        sets = _sets([[0.0]], [[4.0]])
        assert smoothed_cut_mass(sets, 2.0) == pytest.approx(2.0)
        assert hp_divergence_smoothed(sets, 2.0).d_raw == pytest.approx(-1.0)

    @pytest.mark.parametrize("half", [1, 2, 3])
    def test_coincident_closed_form(self, half: int):
        """All points coincident: cut mass n^2 / (2 (n - 1))."""
        n = 2 * half
        sets = _sets(np.ones((half, 2)), np.ones((half, 2)))
        assert smoothed_cut_mass(sets, 2.0) == pytest.approx(n * n / (2 * (n - 1)))

    def test_coincident_four_points(self):
        """Coincident balanced sets with n = 4 give d_raw = -1/3."""
        sets = _sets(np.zeros((2, 1)), np.zeros((2, 1)))
        assert hp_divergence_smoothed(sets, 0.3).d_raw == pytest.approx(-1.0 / 3.0)

    def test_four_point_example(self, interleaved_points):
        """The lambda 2 interleaved example."""
        sets = _sets(*interleaved_points)
        assert smoothed_cut_mass(sets, 2.0) == pytest.approx(2.920218, abs=1e-5)
        report = hp_divergence_smoothed(sets, 2.0)
        assert report.d_raw == pytest.approx(-0.460109, abs=1e-5)
        assert report.d_clamped == 0.0
        assert report.estimator == EstimatorKind.SMOOTHED

    def test_unbalanced_rejected(self):
        """The smoothed estimator compares equal-size sets."""
        with pytest.raises(ContractViolation):
            hp_divergence_smoothed(_sets([[0.0], [1.0]], [[2.0]]), 2.0)

    def test_symmetry(self, rng: Rng):
        """Swapping the sets keeps the cut mass."""
        sets = _sets(rng.generator.normal(size=(6, 2)), rng.generator.normal(size=(6, 2)))
        assert smoothed_cut_mass(sets, 1.5) == pytest.approx(smoothed_cut_mass(_swapped(sets), 1.5))

    def test_rigid_motion_invariance(self, rng: Rng):
        """Rotation plus translation leaves d_raw unchanged."""
        a = rng.generator.normal(size=(5, 2))
        b = rng.generator.normal(size=(5, 2))
        theta = 0.7
        rotation = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        shift = np.array([3.0, -1.0])
        before = hp_divergence_smoothed(_sets(a, b), 2.0).d_raw
        after = hp_divergence_smoothed(_sets(a @ rotation.T + shift, b @ rotation.T + shift), 2.0).d_raw
        assert abs(before - after) < 1e-9

    def test_range(self, rng: Rng):
        """Balanced inputs keep d_raw in [-1, 1]."""
        for _ in range(20):
            sets = _sets(rng.generator.normal(size=(4, 3)), 3 * rng.generator.normal(size=(4, 3)))
            report = hp_divergence_smoothed(sets, 0.5)
            assert -1.0 <= report.d_raw <= 1.0
            assert 0.0 <= report.d_clamped <= 1.0

    def test_small_lambda_recovers_cut_count(self):
        """
        lambda = 1e-3 * min gap, where the min gap is the smallest difference between a
        point's second-nearest and nearest distances, so each row's softmax is one-hot
        on its nearest neighbor.
        """
        for seed in range(50):
            generator = Rng(seed).generator
            a = generator.normal(size=(6, 2))
            b = generator.normal(size=(6, 2))
            sets = _sets(a, b)
            dist = pairwise_distances(sets.pooled, sets.pooled)
            np.fill_diagonal(dist, np.inf)
            nearest = np.sort(dist, axis=1)
            min_gap = float(np.min(nearest[:, 1] - nearest[:, 0]))
            assert min_gap > 0
            lam = 1e-3 * min_gap
            assert abs(smoothed_cut_mass(sets, lam) - nn_cut_count(sets)) < 0.01


class TestSmoothedGradient:
    """Tests for the analytic gradient of the smoothed divergence."""

    def test_single_pair_zero(self):
        """d_raw is constant for n = 2."""
        grad = smoothed_divergence_grad(_sets([[0.0, 1.0]], [[2.0, 3.0]]), 2.0)
        np.testing.assert_allclose(grad, 0.0, atol=1e-15)

    def test_shape(self, rng: Rng):
        """One gradient row per prediction."""
        sets = _sets(rng.generator.normal(size=(4, 3)), rng.generator.normal(size=(4, 3)))
        assert smoothed_divergence_grad(sets, 2.0).shape == (4, 3)

    def test_symmetry_center(self):
        """A prediction at the center of a mirror-symmetric layout has no gradient along the axis."""
        targets = np.array([[-1.0, 0.0], [1.0, 0.0]])
        preds = np.array([[0.0, 0.0], [0.0, 3.0]])
        grad = smoothed_divergence_grad(_sets(targets, preds), 2.0)
        assert abs(grad[0, 0]) < 1e-12

    def test_coincident_points_finite(self):
        """Coincident points contribute no gradient and produce no NaN."""
        grad = smoothed_divergence_grad(_sets(np.zeros((2, 2)), np.zeros((2, 2))), 2.0)
        assert np.all(np.isfinite(grad))
        np.testing.assert_allclose(grad, 0.0)

    def test_matches_finite_differences_8x3(self, rng: Rng, central_difference, relative_error):
        """Random 8 vs 8 points in R^3 with lambda 2."""
        targets = rng.generator.normal(size=(8, 3))
        preds = rng.generator.normal(size=(8, 3))

        def d_raw(points):
            return hp_divergence_smoothed(_sets(targets, points), 2.0).d_raw

        analytic = smoothed_divergence_grad(_sets(targets, preds), 2.0)
        numeric = central_difference(d_raw, preds.copy())
        assert relative_error(analytic, numeric) < 1e-4

    def test_random_configurations(self, central_difference, relative_error):
        """Twenty configurations over batch size, dimension and lambda."""
        cases = [(b, d, lam) for b in (4, 8) for d in (1, 3) for lam in (0.5, 2.0)]
        for index in range(20):
            b, d, lam = cases[index % len(cases)]
            generator = Rng(100 + index).generator
            targets = generator.normal(size=(b, d))
            preds = generator.normal(size=(b, d))

            def d_raw(points):
                return hp_divergence_smoothed(_sets(targets, points), lam).d_raw

            analytic = smoothed_divergence_grad(_sets(targets, preds), lam)
            numeric = central_difference(d_raw, preds.copy())
            assert relative_error(analytic, numeric) < 1e-4, (b, d, lam)
