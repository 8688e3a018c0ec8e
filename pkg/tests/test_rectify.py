import numpy as np
import pytest

from jorcumap.curvature import EdgeCurvature
from jorcumap.neighbors import FuzzyGraph, NeighborIndex
from jorcumap.rectify import (
    BRANCH_BOOST,
    BRANCH_CUT,
    BRANCH_SUPPRESS,
    RectifierConfig,
    StrengthEstimate,
    dynamic_strength,
    edge_branches,
    jaccard,
    rectified_weights,
    rectify_edges,
    reweight,
)


def index_from_ids(ids):
    ids = np.asarray(ids, dtype=np.int64)
    dists = np.tile(np.arange(1, ids.shape[1] + 1, dtype=float), (ids.shape[0], 1))
    return NeighborIndex(ids.shape[1], ids, dists)


def curvature_list(kappas):
    return [EdgeCurvature(0, e + 1, 0.0, float(k)) for e, k in enumerate(kappas)]


class TestJaccard:
    def test_identical_sets(self):
        index = index_from_ids([[2, 3, 4], [2, 3, 4], [0, 1, 4], [0, 1, 4], [0, 1, 2]])
        assert jaccard(index, 0, 1) == 1.0

    def test_disjoint_sets(self):
        index = index_from_ids([[2, 3], [4, 5], [0, 1], [0, 1], [0, 1]] + [[0, 1]])
        assert jaccard(index, 0, 1) == 0.0

    def test_half_overlap(self):
        # N(0)={2,3,4}, N(1)={3,4,5} -> 2/4
        index = index_from_ids(
            [[2, 3, 4], [3, 4, 5], [0, 1, 3], [0, 1, 2], [0, 1, 2], [0, 1, 2]]
        )
        assert jaccard(index, 0, 1) == 0.5

    def test_same_node_rejected(self):
        index = index_from_ids([[1], [0]])
        with pytest.raises(ValueError):
            jaccard(index, 1, 1)


class TestDynamicStrength:
    def test_worked_example(self):
        curv = curvature_list([-0.1, -0.2, -0.3, -0.4])
        config = RectifierConfig(target_tanh=0.9, dynamic_strength=True)
        est = dynamic_strength(curv, config)
        assert est.kappa_typ == pytest.approx(0.325)
        expected_raw = np.arctanh(0.9) / (0.325 + 1e-8)
        assert est.raw == pytest.approx(expected_raw, abs=1e-9)
        assert est.raw == pytest.approx(4.53, abs=5e-3)
        # all four edges negative -> ratio 1 > 0.30 -> scale by 0.8
        assert est.neg_ratio == 1.0
        assert est.value == pytest.approx(np.clip(expected_raw, 0.5, 10.0) * 0.8)

    def test_clip_before_ratio_scaling(self):
        # tiny kappa_typ -> huge raw strength, clipped to 10 first
        curv = curvature_list([-1e-6] + [0.5] * 99)
        config = RectifierConfig(dynamic_strength=True)
        est = dynamic_strength(curv, config)
        assert est.raw > 10.0
        # ratio 0.01 < 0.05 -> 10 * 1.5 then re-clipped to 10
        assert est.value == 10.0

    def test_no_negative_edges_falls_back(self):
        curv = curvature_list([0.1, 0.2])
        config = RectifierConfig(s_base=2.0, dynamic_strength=True)
        est = dynamic_strength(curv, config)
        assert est == StrengthEstimate(2.0, 2.0, 0.0, 0.0, True)

    def test_sparse_negatives_scale_up(self):
        curv = curvature_list([-0.5] + [0.1] * 99)
        est = dynamic_strength(curv, RectifierConfig(dynamic_strength=True))
        raw_clipped = np.clip(np.arctanh(0.9) / (0.5 + 1e-8), 0.5, 10.0)
        assert est.value == pytest.approx(raw_clipped * 1.5)

    def test_mid_ratio_unscaled(self):
        curv = curvature_list([-0.5] * 2 + [0.1] * 8)
        est = dynamic_strength(curv, RectifierConfig(dynamic_strength=True))
        assert est.value == pytest.approx(np.clip(np.arctanh(0.9) / (0.5 + 1e-8), 0.5, 10.0))


class TestRectifiedWeights:
    def test_zero_curvature_identity(self):
        w = rectified_weights(
            np.array([0.3]), np.array([0.0]), np.array([0.5]), 0.1, 2.0, 0.9, 1e-5
        )
        assert w[0] == 0.3

    def test_noise_branch_floor(self):
        w = rectified_weights(
            np.array([0.8]), np.array([-0.5]), np.array([0.05]), 0.1, 2.0, 0.9, 1e-5
        )
        assert w[0] == pytest.approx(8e-6, abs=1e-6)

    def test_boost_worked_example(self):
        w = rectified_weights(
            np.array([0.5]), np.array([-0.5]), np.array([0.3]), 0.1, 2.0, 0.9, 1e-5
        )
        assert w[0] == pytest.approx(0.5 + 0.5 * np.tanh(1.0), abs=1e-6)
        assert w[0] == pytest.approx(0.8808, abs=1e-4)

    def test_boundary_jaccard_goes_to_cut(self):
        w = rectified_weights(
            np.array([0.5]), np.array([-0.5]), np.array([0.1]), 0.1, 2.0, 0.9, 1e-5
        )
        assert w[0] == pytest.approx(0.5e-5)
        branches = edge_branches(np.array([-0.5]), np.array([0.1]), 0.1)
        assert branches[0] == BRANCH_CUT

    def test_range_preservation_random(self):
        rng = np.random.default_rng(0)
        n = 100_000
        w = rng.uniform(0, 1, n)
        w[w == 0] = 0.5
        kappa = rng.uniform(-5, 1, n)
        jac = rng.uniform(0, 1, n)
        delta = rng.uniform(0, 1)
        strength = rng.uniform(0.5, 10)
        beta = rng.uniform(0, 1)
        out = rectified_weights(w, kappa, jac, delta, strength, beta, 1e-5)
        assert np.all(out > 0)
        assert np.all(out <= 1)

    def test_boost_monotone_in_kappa_and_strength(self):
        kappas = -np.linspace(0.1, 3, 50)
        w = rectified_weights(
            np.full(50, 0.4), kappas, np.ones(50), 0.1, 2.0, 0.9, 1e-5
        )
        assert np.all(np.diff(w) > 0)  # larger |kappa| boosts more
        strengths = np.linspace(0.5, 10, 30)
        boosted = [
            rectified_weights(
                np.array([0.4]), np.array([-0.5]), np.array([1.0]), 0.1, s, 0.9, 1e-5
            )[0]
            for s in strengths
        ]
        assert np.all(np.diff(boosted) > 0)

    def test_suppress_monotone(self):
        kappas = np.linspace(0.01, 1, 50)
        w = rectified_weights(
            np.full(50, 0.4), kappas, np.ones(50), 0.1, 2.0, 0.9, 1e-5
        )
        assert np.all(np.diff(w) < 0)

    def test_beta_zero_keeps_positive_edges(self):
        w = rectified_weights(
            np.array([0.4, 0.7]), np.array([0.5, 0.9]), np.ones(2), 0.1, 2.0, 0.0, 1e-5
        )
        assert w.tolist() == [0.4, 0.7]

    def test_strength_zero_touches_only_noise_branch(self):
        w = np.array([0.4, 0.7, 0.6])
        kappa = np.array([0.5, -0.5, -0.5])
        jac = np.array([0.9, 0.9, 0.01])
        out = rectified_weights(w, kappa, jac, 0.1, 0.0, 0.9, 1e-5)
        assert out[0] == 0.4 and out[1] == 0.7
        assert out[2] == pytest.approx(0.6e-5)


class TestDeltaMonotonicity:
    def test_branch_sets_nest(self):
        rng = np.random.default_rng(1)
        kappa = rng.uniform(-1, 1, 500)
        jac = rng.uniform(0, 1, 500)
        prev_boost = None
        prev_cut = None
        for delta in (0.1, 0.15, 0.2, 0.3, 0.5):
            branches = edge_branches(kappa, jac, delta)
            boost = set(np.flatnonzero(branches == BRANCH_BOOST).tolist())
            cut = set(np.flatnonzero(branches == BRANCH_CUT).tolist())
            if prev_boost is not None:
                assert boost <= prev_boost
                assert cut >= prev_cut
            prev_boost, prev_cut = boost, cut


class TestReweight:
    def make_setup(self):
        graph = FuzzyGraph(
            4, np.array([0, 1, 2]), np.array([1, 2, 3]), np.array([0.5, 0.8, 0.9])
        )
        curv = [
            EdgeCurvature(0, 1, 0.0, -0.5),
            EdgeCurvature(1, 2, 0.0, -0.5),
            EdgeCurvature(2, 3, 0.0, 0.5),
        ]
        # N(0) and N(1) overlap (J=1/3 > 0.1); N(1),N(2) disjoint-ish
        index = index_from_ids([[1, 2], [0, 2], [0, 3], [0, 1]])
        return graph, curv, index

    def test_branches_applied(self):
        graph, curv, index = self.make_setup()
        config = RectifierConfig(delta=0.1, s_base=2.0, beta=0.9)
        new_graph, rows = rectify_edges(graph, curv, index, config)
        by_pair = {(r[0], r[1]): r for r in rows}
        assert by_pair[(0, 1)][5] == BRANCH_BOOST
        assert by_pair[(2, 3)][5] == BRANCH_SUPPRESS

    def test_fills_jaccard_on_records(self):
        graph, curv, index = self.make_setup()
        rectify_edges(graph, curv, index, RectifierConfig())
        assert all(np.isfinite(c.jaccard) for c in curv)

    def test_input_graph_untouched(self):
        graph, curv, index = self.make_setup()
        before = graph.w.copy()
        reweight(graph, curv, index, RectifierConfig())
        assert np.array_equal(graph.w, before)

    def test_missing_curvature_is_error(self):
        graph, curv, index = self.make_setup()
        with pytest.raises(ValueError, match="missing curvature"):
            reweight(graph, curv[:2], index, RectifierConfig())

    def test_dynamic_strength_resolved_inside(self):
        graph, curv, index = self.make_setup()
        config = RectifierConfig(dynamic_strength=True)
        est_value = dynamic_strength(curv, config).value
        auto = reweight(graph, curv, index, config)
        manual = reweight(graph, curv, index, config, strength=est_value)
        assert np.array_equal(auto.w, manual.w)


class TestRectifierConfig:
    def test_rejects_bad_delta(self):
        with pytest.raises(ValueError):
            RectifierConfig(delta=1.5)

    def test_rejects_bad_beta(self):
        with pytest.raises(ValueError):
            RectifierConfig(beta=-0.1)

    def test_rejects_bad_floor(self):
        with pytest.raises(ValueError):
            RectifierConfig(eps_floor=0.0)
