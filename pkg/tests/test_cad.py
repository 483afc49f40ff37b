import numpy as np
import pytest
import scipy.sparse as sp
from scipy.stats import spearmanr

from graphssl import (DegenerateGraphError, GraphConfig, InputError,
                      PointSet, SimilarityGraph, SoftConfig, TaskScaling,
                      backbone_cad, build_graph, fit_cad_model,
                      gaussian_weight, rwcad_score, rwcad_scores, scale_scores,
                      softhad_score, weighted_knn_score, weighted_knn_scores)


def _mirror_training_set():
    """Classes symmetric about x = 0."""
    pos = np.array([[1.0, 0.0], [2.0, 1.0], [1.5, -1.0]])
    neg = -pos
    pts = np.vstack([pos, neg])
    labels = np.array([1, 1, 1, -1, -1, -1])
    return PointSet(pts, labels)


class TestRwcad:
    def test_symmetry_point_scores_half(self):
        ps = _mirror_training_set()
        model = fit_cad_model(ps, lam=0.0, sigma=1.0)
        assert rwcad_score(model, np.zeros(2), 1) == pytest.approx(0.5, abs=1e-12)
        assert rwcad_score(model, np.zeros(2), -1) == pytest.approx(0.5, abs=1e-12)

    def test_large_lambda_drives_scores_to_zero(self):
        ps = _mirror_training_set()
        for x in (np.zeros(2), np.array([1.0, 0.5])):
            prev = 1.0
            for lam in (0.0, 0.1, 10.0, 1e6):
                model = fit_cad_model(ps, lam=lam, sigma=1.0)
                score = rwcad_score(model, x, 1)
                assert score <= prev
                prev = score
            assert prev < 1e-5

    def test_scores_in_unit_interval(self):
        rng = np.random.default_rng(0)
        ps = PointSet(rng.normal(size=(40, 2)),
                      np.where(rng.random(40) < 0.5, 1, -1))
        model = fit_cad_model(ps, lam=0.01)
        scores = rwcad_scores(model, rng.normal(size=(30, 2)),
                              np.where(rng.random(30) < 0.5, 1, -1))
        assert np.all(scores >= 0) and np.all(scores < 1)

    def test_strictly_decreasing_in_lambda(self):
        rng = np.random.default_rng(1)
        ps = PointSet(rng.normal(size=(30, 2)),
                      np.where(rng.random(30) < 0.5, 1, -1))
        x = rng.normal(size=2)
        scores = []
        for lam in (0.0, 0.01, 0.1, 1.0, 10.0):
            scores.append(rwcad_score(fit_cad_model(ps, lam, sigma=0.8), x, 1))
        assert all(b < a for a, b in zip(scores, scores[1:]))

    def test_identity_with_knn_ratio_at_lambda_zero(self):
        # likelihood ratio == kNN mass ratio x (including-node volume ratio),
        # both sides evaluated from raw kernel sums
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(25, 3))
        labels = np.where(rng.random(25) < 0.6, 1, -1)
        ps = PointSet(pts, labels)
        sigma = 0.9
        model = fit_cad_model(ps, lam=0.0, sigma=sigma)
        for trial in range(10):
            x = rng.normal(size=3)
            k_all = np.array([gaussian_weight(pts[i], x, sigma) for i in range(25)])
            mass_pos = k_all[labels == 1].sum()
            mass_neg = k_all[labels == -1].sum()
            vol_pos = sum(gaussian_weight(pts[i], pts[j], sigma)
                          for i in range(25) for j in range(25)
                          if i != j and labels[i] == 1 and labels[j] == 1)
            vol_neg = sum(gaussian_weight(pts[i], pts[j], sigma)
                          for i in range(25) for j in range(25)
                          if i != j and labels[i] == -1 and labels[j] == -1)
            t_pos = vol_pos + 2 * mass_pos
            t_neg = vol_neg + 2 * mass_neg
            # method's likelihood ratio
            like_pos = mass_pos / t_pos
            like_neg = mass_neg / t_neg
            want = (mass_pos / mass_neg) * (t_neg / t_pos)
            assert like_pos / like_neg == pytest.approx(want, rel=1e-10)
            # and the model reproduces the same posteriors
            score = rwcad_score(model, x, 1)
            prior_pos, prior_neg = model.prior_pos, model.prior_neg
            expect = like_neg * prior_neg / (like_pos * prior_pos + like_neg * prior_neg)
            assert score == pytest.approx(expect, rel=1e-10)

    def test_empty_class_rejected(self):
        ps = PointSet(np.zeros((3, 2)), np.array([1, 1, 1]))
        with pytest.raises(DegenerateGraphError):
            fit_cad_model(ps, 0.0, sigma=1.0)


class TestWeightedKnn:
    def test_coincides_with_own_class_scores_near_zero(self):
        pts = np.array([[0.0, 0.0], [10.0, 10.0]])
        ps = PointSet(pts, np.array([1, -1]))
        score = weighted_knn_score(ps, np.array([0.0, 0.0]), 1, sigma=0.5)
        assert score < 1e-10

    def test_balanced_neighborhood_scores_half(self):
        ps = _mirror_training_set()
        score = weighted_knn_score(ps, np.zeros(2), 1, sigma=1.0)
        assert score == pytest.approx(0.5, abs=1e-12)

    def test_matches_mass_ratio_form(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(20, 2))
        labels = np.where(rng.random(20) < 0.5, 1, -1)
        ps = PointSet(pts, labels)
        model = fit_cad_model(ps, 0.0, sigma=0.7)
        for _ in range(10):
            x = rng.normal(size=2)
            k_all = np.array([gaussian_weight(pts[i], x, 0.7) for i in range(20)])
            ratio = k_all[labels == 1].sum() / k_all[labels == -1].sum()
            got = weighted_knn_scores(model, x[None, :], np.array([1]))[0]
            assert got == pytest.approx(1.0 - ratio / (1.0 + ratio), rel=1e-10)

    def test_rank_agreement_with_rwcad_grows_with_n(self):
        rng = np.random.default_rng(4)
        corrs = []
        for n in (50, 200, 1000):
            pts = np.vstack([rng.normal(0, 1, (n // 2, 2)),
                             rng.normal(2.5, 1, (n - n // 2, 2))])
            labels = np.concatenate([np.ones(n // 2, dtype=int),
                                     -np.ones(n - n // 2, dtype=int)])
            ps = PointSet(pts, labels)
            model = fit_cad_model(ps, lam=0.0, sigma=0.8)
            queries = rng.normal(1.0, 1.5, (150, 2))
            q_labels = np.where(rng.random(150) < 0.5, 1, -1)
            r = rwcad_scores(model, queries, q_labels)
            k = weighted_knn_scores(model, queries, q_labels)
            corrs.append(spearmanr(r, k).statistic)
        assert corrs[-1] >= 0.99
        assert corrs[0] <= corrs[-1] + 1e-9


class TestSoftHad:
    def test_all_positive_labels_collapse_to_constant(self):
        # with unanimous labels and a uniform fit matrix the all-ones
        # vector is a Laplacian null direction, so the solution is exactly
        # constant at c_l / (c_l + gamma_g) regardless of connectivity and
        # every score ties below 1
        w = np.ones((10, 10))
        w[9, :] = w[:, 9] = 0.0
        w[8, 9] = w[9, 8] = 0.05  # node 9 hangs on weakly
        np.fill_diagonal(w, 0.0)
        g = SimilarityGraph(sp.csr_matrix(w))
        y = np.ones(10)
        cfg = SoftConfig(gamma_g=0.5, c_l=1.0, c_u=1.0)
        scores = softhad_score(g, y, cfg)
        lap = np.diag(w.sum(1)) - w
        values = np.linalg.solve(lap + (0.5 + 1.0) * np.eye(10), y)
        assert np.allclose(scores, np.abs(values - y), atol=1e-8)
        assert np.all(values > 0) and np.all(values <= 1)
        assert np.all(scores < 1)
        assert np.allclose(values, 1.0 / 1.5, atol=1e-10)

    def test_isolated_flip_suppressed_relative_to_core_flip(self):
        # the regularizer's job: a dissenting label on the weakly attached
        # node scores lower than the same dissent inside the dense core
        w = np.ones((10, 10))
        w[9, :] = w[:, 9] = 0.0
        w[8, 9] = w[9, 8] = 0.05
        np.fill_diagonal(w, 0.0)
        g = SimilarityGraph(sp.csr_matrix(w))
        cfg = SoftConfig(0.5, 1.0, 1.0)
        y_core_flip = np.ones(10)
        y_core_flip[0] = -1.0
        y_weak_flip = np.ones(10)
        y_weak_flip[9] = -1.0
        core = softhad_score(g, y_core_flip, cfg)[0]
        weak = softhad_score(g, y_weak_flip, cfg)[9]
        assert weak < core
        assert weak < 1.0 + cfg.gamma_g / (1.0 + cfg.gamma_g) + 1e-9

    def test_isolated_node_scalar_score(self):
        w = np.zeros((3, 3))
        w[0, 1] = w[1, 0] = 1.0
        g = SimilarityGraph(sp.csr_matrix(w))
        for gamma in (0.5, 2.0, 10.0):
            cfg = SoftConfig(gamma_g=gamma, c_l=1.0, c_u=1.0)
            scores = softhad_score(g, np.array([1.0, 1.0, 1.0]), cfg)
            assert scores[2] == pytest.approx(gamma / (1.0 + gamma), abs=1e-10)
            assert scores[2] < 1.0

    def test_flipped_label_in_tight_cluster_gets_max_score(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(0, 0.05, (12, 2))
        ps = PointSet(pts, np.ones(12, dtype=int))
        g = build_graph(ps, GraphConfig(mode="epsilon", eps_cut=0.0, sigma=1.0))
        cfg = SoftConfig(gamma_g=0.1, c_l=1.0, c_u=1.0)
        for flip in range(12):
            y = np.ones(12)
            y[flip] = -1.0
            scores = softhad_score(g, y, cfg)
            assert int(np.argmax(scores)) == flip

    def test_score_range_and_zero_iff_exact(self):
        rng = np.random.default_rng(6)
        ps = PointSet(rng.normal(size=(20, 2)),
                      np.where(rng.random(20) < 0.5, 1, -1))
        g = build_graph(ps, GraphConfig(mode="knn", k_neighbors=4, sigma=1.0))
        scores = softhad_score(g, ps.labels.astype(float),
                               SoftConfig(0.5, 1.0, 1.0))
        assert np.all(scores >= 0) and np.all(scores <= 2)
        assert np.all(scores > 0)  # soft fit never reproduces labels exactly here

    def test_label_flip_antisymmetry(self):
        rng = np.random.default_rng(7)
        ps = PointSet(rng.normal(size=(15, 2)),
                      np.where(rng.random(15) < 0.5, 1, -1))
        g = build_graph(ps, GraphConfig(mode="knn", k_neighbors=4, sigma=1.0))
        cfg = SoftConfig(0.3, 1.0, 1.0)
        y = ps.labels.astype(float)
        assert np.allclose(softhad_score(g, y, cfg), softhad_score(g, -y, cfg),
                           atol=1e-12)

    def test_requires_full_labels(self):
        g = SimilarityGraph(sp.csr_matrix(np.zeros((3, 3))))
        with pytest.raises(InputError):
            softhad_score(g, np.array([1.0, 0.0, -1.0]), SoftConfig())


class TestBackboneCad:
    def test_unit_multiplicities_match_softhad(self):
        rng = np.random.default_rng(8)
        ps = PointSet(rng.normal(size=(12, 2)),
                      np.where(rng.random(12) < 0.5, 1, -1))
        g = build_graph(ps, GraphConfig(mode="epsilon", eps_cut=0.0, sigma=1.0))
        cfg = SoftConfig(0.4, 1.0, 1.0)
        y = ps.labels.astype(float)
        assert np.allclose(backbone_cad(g, np.ones(12), y, cfg),
                           softhad_score(g, y, cfg), atol=1e-10)

    def test_duplicated_node_collapse_matches_expanded(self):
        rng = np.random.default_rng(9)
        base = rng.normal(size=(6, 2))
        mult = np.array([2, 1, 3, 1, 2, 4])
        labels = np.array([1, -1, 1, 1, -1, -1])
        expanded = np.repeat(base, mult, axis=0)
        labels_exp = np.repeat(labels, mult)
        cfg = SoftConfig(0.3, 1.0, 1.0)

        g_exp = build_graph(PointSet(expanded, labels_exp),
                            GraphConfig(mode="epsilon", eps_cut=0.0, sigma=1.0))
        full = softhad_score(g_exp, labels_exp.astype(float), cfg)

        g_c = build_graph(PointSet(base, labels),
                          GraphConfig(mode="epsilon", eps_cut=0.0, sigma=1.0))
        compact = backbone_cad(g_c, mult.astype(float), labels.astype(float), cfg)
        starts = np.concatenate([[0], np.cumsum(mult)[:-1]])
        assert np.max(np.abs(full[starts] - compact)) < 1e-8

    def test_huge_multiplicity_pins_value_toward_label(self):
        # growing one labeled node's multiplicity drags its value toward
        # its label; the limit is the replica-consensus value
        # c_l / (c_l + gamma_g) because the node's edge mass grows too
        w = np.array([[0.0, 0.6], [0.6, 0.0]])
        g = SimilarityGraph(sp.csr_matrix(w))
        gamma = 0.2
        cfg = SoftConfig(gamma, 1.0, 1.0)
        y = np.array([1.0, -1.0])
        prev = np.inf
        for mult in (1.0, 10.0, 1e3, 1e7):
            score = backbone_cad(g, np.array([mult, 1.0]), y, cfg)[0]
            assert score <= prev + 1e-12
            prev = score
        assert prev == pytest.approx(gamma / (1.0 + gamma), abs=1e-5)


class TestBackboneFromSample:
    def test_sampled_backbone_scores_track_full_solution(self):
        from graphssl import backbone_from_sample
        rng = np.random.default_rng(11)
        pts = np.vstack([rng.normal(0, 0.7, (80, 2)), rng.normal(3, 0.7, (80, 2))])
        labels = np.concatenate([np.ones(80, dtype=int), -np.ones(80, dtype=int)])
        ps = PointSet(pts, labels)
        nodes, mult = backbone_from_sample(ps, k=40, seed=3)
        assert nodes.n == 40
        assert np.all(mult >= 1)
        assert mult.sum() >= ps.n  # counts, floored at one
        cfg = SoftConfig(0.5, 1.0, 1.0)
        g = build_graph(nodes, GraphConfig(mode="epsilon", eps_cut=0.0, sigma=0.8))
        scores = backbone_cad(g, mult, nodes.labels.astype(float), cfg)
        assert scores.shape == (40,)
        # flipping one backbone label must raise that node's score
        y = nodes.labels.astype(float)
        y[7] = -y[7]
        flipped_scores = backbone_cad(g, mult, y, cfg)
        assert flipped_scores[7] > scores[7]


class TestScaleScores:
    def test_endpoints_and_clamp(self):
        scaling = TaskScaling.fit(np.array([2.0, 4.0, 3.0]))
        assert scale_scores(scaling, np.array([2.0]))[0] == 0.0
        assert scale_scores(scaling, np.array([4.0]))[0] == 1.0
        assert scale_scores(scaling, np.array([-5.0]))[0] == 0.0
        assert scale_scores(scaling, np.array([9.0]))[0] == 1.0

    def test_degenerate_range_maps_to_half(self):
        scaling = TaskScaling.fit(np.array([1.0, 1.0]))
        assert np.all(scale_scores(scaling, np.array([0.0, 1.0, 2.0])) == 0.5)

    def test_affine_invariance(self):
        rng = np.random.default_rng(10)
        train = rng.random(50)
        test = rng.random(20)
        a, b = 3.7, -1.2
        base = scale_scores(TaskScaling.fit(train), test)
        shifted = scale_scores(TaskScaling.fit(a * train + b), a * test + b)
        assert np.allclose(base, shifted, atol=1e-12)
