import numpy as np
import pytest

from jorcumap.dataio import PointCloud, gen_swiss_roll
from jorcumap.embed import (
    Embedding,
    LayoutConfig,
    attractive_gradient,
    attractive_loss,
    fit_ab,
    make_epochs_per_sample,
    optimize,
    pca_init,
    principal_projection,
    repulsive_gradient,
    repulsive_loss,
)
from jorcumap.neighbors import FuzzyGraph, fuzzy_weights, knn_exact


class TestPcaInit:
    def test_recovers_axis_aligned_data(self):
        # scores of an SVD are exactly axis-aligned with diagonal covariance
        rng = np.random.default_rng(0)
        raw = rng.normal(0, 1, (200, 2))
        u, _, _ = np.linalg.svd(raw - raw.mean(axis=0), full_matrices=False)
        coords = u * np.array([50.0, 10.0])
        emb = pca_init(PointCloud(coords), 2)
        for c in range(2):
            r = np.corrcoef(coords[:, c], emb.coords[:, c])[0, 1]
            assert abs(abs(r) - 1.0) < 1e-9

    def test_max_abs_coordinate_is_ten(self):
        cloud = gen_swiss_roll(300, 0.0, seed=1)
        emb = pca_init(cloud, 2)
        assert np.max(np.abs(emb.coords)) == pytest.approx(10.0)

    def test_swiss_roll_not_fully_planar(self):
        cloud = gen_swiss_roll(500, 0.0, seed=2)
        _, eigvals, _ = principal_projection(cloud.points, 2)
        assert eigvals[:2].sum() / eigvals.sum() < 1.0

    def test_projected_variance_matches_eigenvalue_oracle(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(0, 1, (150, 6)) @ rng.normal(0, 1, (6, 6))
        scores, _, _ = principal_projection(pts, 3)
        centered = pts - pts.mean(axis=0)
        oracle = np.sort(np.linalg.eigvalsh(np.cov(centered.T)))[::-1]
        projected = scores.var(axis=0, ddof=1).sum()
        assert projected == pytest.approx(oracle[:3].sum(), abs=1e-8)

    def test_rank_deficient_filled_with_jitter(self):
        line = np.outer(np.linspace(0, 1, 50), [1.0, 2.0, 3.0])
        emb = pca_init(PointCloud(line), 2, seed=4)
        # second direction carries only jitter, far smaller than the first
        assert np.abs(emb.coords[:, 1]).max() < np.abs(emb.coords[:, 0]).max() * 1e-2
        again = pca_init(PointCloud(line), 2, seed=4)
        assert np.array_equal(emb.coords, again.coords)

    def test_dimension_validation(self):
        with pytest.raises(ValueError):
            pca_init(PointCloud(np.zeros((5, 2)) + np.eye(5, 2)), 3)


class TestFitAb:
    def test_default_values(self):
        a, b = fit_ab(0.1, 1.0)
        assert a == pytest.approx(1.58, abs=0.05)
        assert b == pytest.approx(0.90, abs=0.05)

    def test_fit_is_near_grid_optimum(self):
        # coarse grid-search oracle over (a, b) sum-of-squares
        a, b = fit_ab(0.1, 1.0)
        xv = np.linspace(0, 3.0, 300)
        yv = np.where(xv <= 0.1, 1.0, np.exp(-(xv - 0.1)))

        def sse(aa, bb):
            return np.sum((1.0 / (1.0 + aa * xv ** (2 * bb)) - yv) ** 2)

        grid_best = min(
            sse(aa, bb)
            for aa in np.linspace(0.5, 3.0, 60)
            for bb in np.linspace(0.5, 1.5, 60)
        )
        assert sse(a, b) <= grid_best + 1e-6

    def test_kernel_is_one_at_zero(self):
        for min_dist in (0.01, 0.1, 0.5):
            a, b = fit_ab(min_dist, 1.0)
            psi0 = 1.0 / (1.0 + a * 0.0 ** (2 * b))
            assert psi0 >= 0.99

    def test_larger_min_dist_smaller_a(self):
        values = [fit_ab(md, 1.0)[0] for md in (0.01, 0.1, 0.5)]
        assert values[0] > values[1] > values[2]

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            fit_ab(0.0, 1.0)


class TestGradients:
    def test_attractive_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        a, b = fit_ab(0.1, 1.0)
        h = 1e-6
        for _ in range(100):
            yi = rng.normal(0, 2, 2)
            yj = rng.normal(0, 2, 2)
            if np.linalg.norm(yi - yj) < 0.05:
                yi = yi + 0.5
            grad = attractive_gradient(yi, yj, a, b)
            fd = np.zeros(2)
            for d in range(2):
                e = np.zeros(2)
                e[d] = h
                fd[d] = (
                    attractive_loss(yi + e, yj, a, b)
                    - attractive_loss(yi - e, yj, a, b)
                ) / (2 * h)
            assert np.linalg.norm(grad - fd) <= 1e-4 * max(np.linalg.norm(grad), 1e-3)

    def test_repulsive_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        a, b = fit_ab(0.1, 1.0)
        h = 1e-6
        for _ in range(100):
            yi = rng.normal(0, 2, 2)
            yj = rng.normal(0, 2, 2)
            if np.linalg.norm(yi - yj) < 0.05:
                yi = yi + 0.5
            grad = repulsive_gradient(yi, yj, a, b)
            fd = np.zeros(2)
            for d in range(2):
                e = np.zeros(2)
                e[d] = h
                fd[d] = (
                    repulsive_loss(yi + e, yj, a, b)
                    - repulsive_loss(yi - e, yj, a, b)
                ) / (2 * h)
            assert np.linalg.norm(grad - fd) <= 1e-4 * max(np.linalg.norm(grad), 1e-3)

    def test_translation_invariance(self):
        a, b = fit_ab(0.1, 1.0)
        # dyadic coordinates so the shifted sums are exact in binary
        yi = np.array([0.25, -1.25])
        yj = np.array([2.0, 0.75])
        shift = np.array([13.5, -2.25])
        assert np.array_equal(
            attractive_gradient(yi, yj, a, b),
            attractive_gradient(yi + shift, yj + shift, a, b),
        )
        assert np.array_equal(
            repulsive_gradient(yi, yj, a, b),
            repulsive_gradient(yi + shift, yj + shift, a, b),
        )


class TestSamplingSchedule:
    def test_frequency_proportional_to_weight(self):
        rng = np.random.default_rng(7)
        weights = rng.uniform(0.01, 1.0, 50)
        n_epochs = 1000
        eps = make_epochs_per_sample(weights, n_epochs)
        # replay the sampling schedule
        counts = np.zeros(50)
        next_sample = eps - 1.0
        for epoch in range(n_epochs):
            due = next_sample <= epoch
            counts[due] += 1
            next_sample[due] += eps[due]
        total = counts.sum()
        probs = weights / weights.sum()
        expect = total * probs
        sigma = np.sqrt(total * probs * (1 - probs))
        assert np.all(np.abs(counts - expect) <= 3 * sigma + 1)


class TestOptimize:
    def two_point_setup(self, n_epochs, negative_sample_rate=0):
        graph = FuzzyGraph(2, np.array([0]), np.array([1]), np.array([1.0]))
        init = Embedding(np.array([[0.0, 0.0], [3.0, 0.0]]))
        config = LayoutConfig(
            n_epochs=n_epochs,
            negative_sample_rate=negative_sample_rate,
            seed=1,
        )
        return graph, init, config

    def test_pure_attraction_contracts(self):
        # chain single-epoch runs at a fixed step so each link is one epoch
        graph, init, config = self.two_point_setup(1)
        config.learning_rate = 0.1
        coords = init.coords
        distances = [np.linalg.norm(coords[0] - coords[1])]
        for _ in range(5):
            emb = optimize(graph, Embedding(coords), config)
            coords = emb.coords
            distances.append(np.linalg.norm(coords[0] - coords[1]))
        assert all(b < a for a, b in zip(distances, distances[1:])), distances

    def test_pure_repulsion_expands(self):
        # repeated repulsive descent steps never shrink the distance
        a, b = fit_ab(0.1, 1.0)
        yi = np.array([0.0, 0.0])
        yj = np.array([0.5, 0.0])
        prev = np.linalg.norm(yi - yj)
        for _ in range(50):
            yi = yi - 0.1 * repulsive_gradient(yi, yj, a, b)
            d = np.linalg.norm(yi - yj)
            assert d >= prev
            prev = d

    def test_seeded_determinism_on_swiss_roll(self):
        cloud = gen_swiss_roll(500, 0.0, seed=11)
        graph = fuzzy_weights(knn_exact(cloud, 10))
        init = pca_init(cloud, 2, seed=0)
        config = LayoutConfig(seed=42)
        emb1 = optimize(graph, init, config)
        emb2 = optimize(graph, init, config)
        assert np.array_equal(emb1.coords, emb2.coords)
        assert emb1.epochs_run == config.n_epochs

    def test_different_seed_differs(self):
        cloud = gen_swiss_roll(200, 0.0, seed=11)
        graph = fuzzy_weights(knn_exact(cloud, 8))
        init = pca_init(cloud, 2, seed=0)
        a = optimize(graph, init, LayoutConfig(n_epochs=50, seed=1))
        b = optimize(graph, init, LayoutConfig(n_epochs=50, seed=2))
        assert not np.array_equal(a.coords, b.coords)

    def test_init_not_mutated(self):
        graph, init, config = self.two_point_setup(4)
        before = init.coords.copy()
        optimize(graph, init, config)
        assert np.array_equal(init.coords, before)

    def test_nan_aborts_with_diagnostic(self):
        graph, init, config = self.two_point_setup(5)
        config.learning_rate = float("inf")
        with pytest.raises(RuntimeError, match="epoch"):
            optimize(graph, init, config)

    def test_size_mismatch(self):
        graph, init, config = self.two_point_setup(2)
        with pytest.raises(ValueError):
            optimize(graph, Embedding(np.zeros((3, 2))), config)


class TestEmbeddingValidation:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Embedding(np.array([[np.nan, 0.0]]))
