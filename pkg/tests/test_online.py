import time

import numpy as np
import pytest
import scipy.sparse as sp

from graphssl import (CompactGraph, GraphConfig, InputError, PointSet,
                      QuantizerState, SimilarityGraph, build_graph,
                      compact_harmonic, hard_harmonic, max_distortion, observe,
                      predict_online)


def replay_assignments(stream, capacity, growth):
    """Drive a quantizer over the stream while tracking every point's
    current centroid through merges; returns (state, assignment array)."""
    state = QuantizerState(capacity, growth)
    assign = []
    for x in stream:
        idx = state.observe(np.asarray(x, dtype=float))
        if state.last_repartition is not None:
            assign = [state.last_repartition[a] for a in assign]
        assign.append(idx)
    return state, np.array(assign)


class TestQuantizer:
    def test_first_point_becomes_centroid(self):
        state = QuantizerState(4)
        assert state.observe(np.array([1.0, 2.0])) == 0
        assert state.multiplicities == [1]

    def test_repeated_point_single_centroid(self):
        state = QuantizerState(4)
        for _ in range(7):
            idx = state.observe(np.array([3.0, 3.0]))
        assert idx == 0 and state.size == 1
        assert state.multiplicities == [7]

    def test_initial_radius_from_first_two_distinct(self):
        state = QuantizerState(4)
        state.observe(np.zeros(2))
        state.observe(np.zeros(2))
        assert state.radius is None
        state.observe(np.array([0.0, 2.5]))
        assert state.radius == pytest.approx(2.5)

    def test_capacity_and_separation_on_uniform_stream(self):
        rng = np.random.default_rng(0)
        stream = rng.random((1500, 2))
        state, assign = replay_assignments(stream, capacity=16, growth=1.5)
        assert state.size <= 16
        assert sum(state.multiplicities) == 1500
        pts = state.centroid_matrix()
        d = np.sqrt(((pts[:, None] - pts[None, :]) ** 2).sum(-1))
        np.fill_diagonal(d, np.inf)
        assert d.min() >= state.radius - 1e-12
        # replay oracle: every historical point within the distortion bound
        centroids = pts[assign]
        dist = np.sqrt(((stream - centroids) ** 2).sum(axis=1))
        assert dist.max() <= max_distortion(state) + 1e-12

    def test_invariants_hold_at_every_step(self):
        rng = np.random.default_rng(1)
        stream = rng.random((400, 2)) * 10
        state = QuantizerState(8, 1.5)
        assign = []
        for t, x in enumerate(stream, start=1):
            idx = state.observe(x)
            if state.last_repartition is not None:
                assign = [state.last_repartition[a] for a in assign]
            assign.append(idx)
            assert state.size <= 8
            assert sum(state.multiplicities) == t
            pts = state.centroid_matrix()
            if state.size > 1 and state.radius is not None:
                d = np.sqrt(((pts[:, None] - pts[None, :]) ** 2).sum(-1))
                np.fill_diagonal(d, np.inf)
                assert d.min() >= state.radius - 1e-12
            dist = np.sqrt(((stream[:t] - pts[assign]) ** 2).sum(axis=1))
            assert dist.max() <= state.max_distortion() + 1e-12

    def test_dimension_mismatch_rejected(self):
        state = QuantizerState(4)
        state.observe(np.zeros(3))
        with pytest.raises(InputError):
            state.observe(np.zeros(2))

    def test_label_conflict_counted(self):
        state = QuantizerState(4)
        state.observe(np.zeros(2), label=1)
        state.observe(np.zeros(2), label=-1)
        assert state.label_conflicts == 1
        assert state.centroid_labels == [1]

    def test_observe_wrapper(self):
        state = QuantizerState(3)
        state2, idx = observe(state, np.array([1.0, 1.0]), 1)
        assert state2 is state and idx == 0


class TestMaxDistortion:
    def test_geometric_series_values(self):
        state = QuantizerState(4, growth=2.0)
        state.radius = 1.0
        assert state.max_distortion() == pytest.approx(2.0)
        state = QuantizerState(4, growth=1.5)
        state.radius = 1.0
        assert state.max_distortion() == pytest.approx(3.0)

    def test_distortion_bounds_replayed_stream(self):
        rng = np.random.default_rng(5)
        stream = np.vstack([rng.normal(size=(300, 3)), rng.normal(4, 1, (300, 3))])
        state, assign = replay_assignments(stream, capacity=12, growth=1.5)
        dist = np.sqrt(((stream - state.centroid_matrix()[assign]) ** 2).sum(axis=1))
        assert dist.max() <= max_distortion(state) + 1e-12


class TestCompactHarmonic:
    def test_unit_multiplicities_match_hard_harmonic(self):
        rng = np.random.default_rng(2)
        w = np.triu(rng.random((8, 8)), 1)
        w = w + w.T
        labels = np.array([1, -1, 0, 0, 0, 0, 0, 0])
        cg = CompactGraph(w, np.ones(8))
        got = compact_harmonic(cg, labels, 0.3)
        want = hard_harmonic(SimilarityGraph(sp.csr_matrix(w)), labels, 0.3)
        assert np.allclose(got.values, want.values, atol=1e-10)

    def test_duplicated_rows_match_expanded_graph(self):
        # build a point set with duplicates, collapse them, and compare
        rng = np.random.default_rng(3)
        base = rng.normal(size=(7, 2))
        mult = np.array([1, 3, 2, 1, 4, 2, 1])
        labels_base = np.array([1, 0, 0, -1, 0, 0, 0])
        expanded = np.repeat(base, mult, axis=0)
        labels_exp = np.repeat(labels_base, mult)
        sigma = 1.0
        ps = PointSet(expanded, labels_exp)
        g_exp = build_graph(ps, GraphConfig(mode="epsilon", eps_cut=0.0, sigma=sigma))
        for gamma in (0.0, 0.5, 2.0):
            full = hard_harmonic(g_exp, labels_exp, gamma)
            ps_c = PointSet(base, labels_base)
            g_c = build_graph(ps_c, GraphConfig(mode="epsilon", eps_cut=0.0, sigma=sigma))
            cg = CompactGraph(g_c.dense(), mult.astype(float))
            compact = compact_harmonic(cg, labels_base, gamma)
            # compare one replica per collapsed node
            starts = np.concatenate([[0], np.cumsum(mult)[:-1]])
            assert np.max(np.abs(full.values[starts] - compact.values)) < 1e-8

    def test_large_sink_zeroes_unlabeled(self):
        w = np.array([[0.0, 1.0], [1.0, 0.0]])
        cg = CompactGraph(w, np.array([2.0, 5.0]))
        sol = compact_harmonic(cg, np.array([1, 0]), 1e9)
        assert abs(sol.values[1]) < 1e-6

    def test_needs_a_label(self):
        cg = CompactGraph(np.zeros((2, 2)), np.ones(2))
        with pytest.raises(InputError):
            compact_harmonic(cg, np.zeros(2), 1.0)


class TestPredictOnline:
    CFG = GraphConfig(mode="epsilon", sigma=1.0)

    def test_identical_labeled_stream_predicts_label(self):
        state = QuantizerState(4)
        for _ in range(5):
            step = predict_online(state, np.array([1.0, 1.0]), 1, 0.1, self.CFG)
            assert step.prediction == 1 and not step.abstained

    def test_two_cluster_stream_matches_offline(self):
        rng = np.random.default_rng(4)
        a = rng.normal(0, 0.3, (40, 2))
        b = rng.normal(5, 0.3, (40, 2))
        stream = np.empty((80, 2))
        stream[0::2] = a
        stream[1::2] = b
        labels = np.zeros(80, dtype=int)
        labels[0], labels[1] = 1, -1
        true = np.empty(80, dtype=int)
        true[0::2], true[1::2] = 1, -1

        state = QuantizerState(30, 1.5)
        correct = total = 0
        for t in range(80):
            step = predict_online(state, stream[t], int(labels[t]), 0.01, self.CFG)
            if t >= 2 and not step.abstained:
                total += 1
                correct += int(step.prediction == true[t])
                # offline oracle at this prefix
                ps = PointSet(stream[:t + 1], labels[:t + 1])
                g = build_graph(ps, GraphConfig(mode="epsilon", eps_cut=0.001, sigma=1.0))
                off = hard_harmonic(g, labels[:t + 1], 0.01)
                assert step.prediction == int(np.sign(off.values[t]))
        assert total > 0 and correct == total

    def test_far_point_abstains_under_eps_cut(self):
        state = QuantizerState(8)
        predict_online(state, np.array([0.0, 0.0]), 1, gamma_g=1.0, graph_cfg=self.CFG)
        step = predict_online(state, np.array([100.0, 100.0]), 0, gamma_g=1.0,
                              graph_cfg=self.CFG)
        assert step.abstained

    def test_no_labels_abstains(self):
        state = QuantizerState(4)
        step = predict_online(state, np.array([0.0, 0.0]), 0, 0.1, self.CFG)
        assert step.abstained


def test_per_step_cost_stays_flat():
    # wall time per step must not trend upward with t for fixed capacity
    rng = np.random.default_rng(9)
    capacity = 16
    stream = rng.random((10 * capacity, 2))
    cfg = GraphConfig(mode="epsilon", sigma=1.0)
    state = QuantizerState(capacity, 1.5)
    times = []
    for t, x in enumerate(stream):
        t0 = time.perf_counter()
        predict_online(state, x, 1 if t == 0 else (-1 if t == 1 else 0), 0.05, cfg)
        times.append(time.perf_counter() - t0)
    times = np.array(times[capacity:])  # skip warmup/jit
    t_axis = np.arange(times.size, dtype=float)
    slope = np.polyfit(t_axis, times, 1)[0]
    assert slope * times.size <= max(1.0, 0.5) * np.median(times) * 4
