"""Tests for shell-based modified kNN and the label-histogram embedded kNN."""

import random

import numpy as np
import pytest

from hyperknn.core import build_incidence_index
from hyperknn.geometry import GeometryConfig, SizePolicy, batch_counts, neighborhood_record
from hyperknn.predictors import (
    KClampWarning,
    _point_knn,
    _vote,
    feature_vector,
    knn_shells,
    predict_label_embedded,
    predict_label_modified,
    predict_weight_embedded,
    predict_weight_modified,
)
from hyperknn.weighting import ObservationMap, bucketize_labels

from instances import (
    oracle_feature,
    oracle_point_knn,
    oracle_refined,
    oracle_shells,
    oracle_vote,
    random_config,
    random_hypergraph,
    random_observed,
    random_weights,
)


class TestShells:
    def test_single_shell(self):
        counts = {"e": 2, 1: 1, 2: 2, 3: 5}
        shells = knn_shells("e", [1, 2, 3], counts, 1)
        assert shells.shells == (0,)
        assert shells.member_ids == (2,)

    def test_tie_within_shell(self):
        counts = {"e": 2, 1: 1, 2: 2, 3: 5, 4: 2}
        shells = knn_shells("e", [1, 2, 3, 4], counts, 1)
        assert shells.member_ids == (2, 4)

    def test_k_equal_to_distinct_distances_returns_everything(self):
        counts = {"e": 2, 1: 1, 2: 2, 3: 5}
        shells = knn_shells("e", [1, 2, 3], counts, 3)
        assert set(shells.member_ids) == {1, 2, 3}

    def test_oversized_k_clamps_with_warning(self):
        counts = {"e": 2, 1: 1, 2: 2}
        with pytest.warns(KClampWarning):
            shells = knn_shells("e", [1, 2], counts, 10)
        assert set(shells.member_ids) == {1, 2}

    def test_empty_observed_raises(self):
        with pytest.raises(ValueError, match="no observations"):
            knn_shells("e", [], {"e": 0}, 1)

    def test_shell_property(self):
        rng = random.Random(17)
        for _ in range(40):
            counts = {f: rng.randint(0, 6) for f in range(rng.randint(1, 15))}
            counts["q"] = rng.randint(0, 6)
            observed = [f for f in counts if f != "q"]
            k = rng.randint(1, 5)
            if k > len(set(abs(counts["q"] - counts[f]) for f in observed)):
                continue
            shells = knn_shells("q", observed, counts, k)
            member_set = set(shells.member_ids)
            worst_in = max(d for _, d in shells.members)
            for f in observed:
                if f not in member_set:
                    assert abs(counts["q"] - counts[f]) > worst_in
            assert len(set(d for _, d in shells.members)) <= k

    def test_matches_sorted_scan_oracle(self):
        rng = random.Random(18)
        for _ in range(100):
            observed = list(range(rng.randint(1, 12)))
            counts = {f: rng.randint(0, 8) for f in observed}
            counts["q"] = rng.randint(0, 8)
            k = rng.randint(1, len(set(abs(counts["q"] - counts[f]) for f in observed)))
            shells = knn_shells("q", observed, counts, k)
            exp_shells, exp_members = oracle_shells("q", observed, counts, k)
            assert list(shells.shells) == exp_shells
            assert list(shells.members) == exp_members


class TestModifiedPredictors:
    def test_weight_single_member(self):
        counts = {"e": 2, 1: 1, 2: 2, 3: 5}
        W = ObservationMap.for_weights({1: 0.1, 2: 0.4, 3: 0.9})
        assert predict_weight_modified("e", [1, 2, 3], W, counts, 1) == 0.4

    def test_weight_tied_shell_mean(self):
        counts = {"e": 2, 1: 1, 2: 2, 3: 5, 4: 2}
        W = ObservationMap.for_weights({1: 0.1, 2: 0.4, 3: 0.9, 4: 0.6})
        assert predict_weight_modified("e", [1, 2, 3, 4], W, counts, 1) == pytest.approx(0.5)

    def test_weight_constant_observations(self):
        counts = {"e": 3, 1: 0, 2: 4, 3: 3}
        W = ObservationMap.for_weights({1: 0.7, 2: 0.7, 3: 0.7})
        for k in (1, 2, 3):
            assert predict_weight_modified("e", [1, 2, 3], W, counts, k) == pytest.approx(0.7)

    def test_weight_between_member_extremes(self):
        rng = random.Random(23)
        for _ in range(50):
            observed = list(range(rng.randint(1, 10)))
            counts = {f: rng.randint(0, 5) for f in observed}
            counts["q"] = rng.randint(0, 5)
            W = ObservationMap.for_weights({f: rng.uniform(-1, 1) for f in observed})
            k = rng.randint(1, len(set(abs(counts["q"] - counts[f]) for f in observed)))
            pred = predict_weight_modified("q", observed, W, counts, k)
            members = knn_shells("q", observed, counts, k).member_ids
            assert min(W[f] for f in members) - 1e-12 <= pred <= max(W[f] for f in members) + 1e-12

    def test_label_unique_mode(self):
        counts = {"e": 1, 1: 1, 2: 1, 3: 1}
        L = ObservationMap.for_labels({1: 1, 2: 1, 3: 2}, q=2)
        assert predict_label_modified("e", [1, 2, 3], L, counts, 1) == 1

    def test_label_tie_rounds_mean_half_up(self):
        counts = {"e": 1, 1: 1, 2: 1}
        L = ObservationMap.for_labels({1: 1, 2: 2}, q=2)
        assert predict_label_modified("e", [1, 2], L, counts, 1) == 2

    def test_label_singleton(self):
        counts = {"e": 0, 1: 0}
        L = ObservationMap.for_labels({1: 3}, q=5)
        assert predict_label_modified("e", [1], L, counts, 1) == 3


class TestVote:
    @pytest.mark.parametrize(
        "labels,q,expected",
        [
            ([1, 1, 2], 2, 1),
            ([1, 2], 2, 2),
            ([3], 5, 3),
            ([1, 2, 3], 3, 2),
            ([1, 1, 2, 2], 3, 2),  # tie -> mean 1.5 -> 2
            ([2, 2, 3, 3], 3, 3),  # tie -> mean 2.5 -> 3
        ],
    )
    def test_examples(self, labels, q, expected):
        assert _vote(labels, q) == expected

    def test_matches_fraction_oracle(self):
        rng = random.Random(29)
        for _ in range(300):
            q = rng.randint(2, 6)
            labels = [rng.randint(1, q) for _ in range(rng.randint(1, 12))]
            assert _vote(labels, q) == oracle_vote(labels, q)


class TestFeatureVector:
    def test_tiny(self):
        L = ObservationMap.for_labels({0: 1, 1: 1, 2: 2}, q=2)
        assert feature_vector(9, [0, 1, 2], L, 2).components == (2, 1)

    def test_empty_neighborhood(self):
        L = ObservationMap.for_labels({}, q=3)
        assert feature_vector(9, [], L, 3).components == (0, 0, 0)

    def test_matches_tally_oracle(self):
        rng = random.Random(31)
        for _ in range(50):
            q = rng.randint(2, 5)
            ids = list(range(rng.randint(0, 20)))
            L = ObservationMap.for_labels({f: rng.randint(1, q) for f in ids}, q=q)
            refined = rng.sample(ids, rng.randint(0, len(ids)))
            assert feature_vector(0, refined, L, q).components == oracle_feature(refined, L, q)

    def test_component_sum_equals_count(self):
        rng = random.Random(32)
        for _ in range(20):
            X = random_hypergraph(rng)
            idx = build_incidence_index(X)
            observed = random_observed(rng, X)
            q = 3
            L = ObservationMap.for_labels({f: rng.randint(1, q) for f in observed}, q=q)
            config = random_config(rng)
            for e in range(len(X.edges)):
                rec = neighborhood_record(idx, X, e, observed, L, config)
                assert sum(feature_vector(e, rec.refined, L, q).components) == rec.count


class TestPointKnn:
    def test_nearest_point(self):
        train = np.array([[2, 1], [0, 3]])
        sel = _point_knn(train, np.array([2, 1]), 1)
        assert list(sel) == [0]

    def test_tie_at_kth_radius_includes_all(self):
        train = np.array([[0, 0], [0, 2], [2, 0], [5, 5]])
        sel = _point_knn(train, np.array([0, 0]), 2)
        assert list(sel) == [0, 1, 2]

    def test_clamps_with_warning(self):
        with pytest.warns(KClampWarning):
            sel = _point_knn(np.array([[1]]), np.array([0]), 5)
        assert list(sel) == [0]


def embedded_label_oracle(e, X, observed, L, config, k):
    feats, ids = [], []
    for f in sorted(observed):
        feats.append(oracle_feature(oracle_refined(X, f, observed, L, config), L, L.q))
        ids.append(f)
    query = oracle_feature(oracle_refined(X, e, observed, L, config), L, L.q)
    sel = oracle_point_knn(feats, ids, query, k)
    return oracle_vote([L[f] for f in sel], L.q)


def embedded_weight_oracle(e, X, observed, W, config, q, k):
    L = bucketize_labels(W.restrict(observed), q)
    feats, ids = [], []
    for f in sorted(observed):
        feats.append(oracle_feature(oracle_refined(X, f, observed, W, config), L, q))
        ids.append(f)
    query = oracle_feature(oracle_refined(X, e, observed, W, config), L, q)
    sel = oracle_point_knn(feats, ids, query, k)
    vals = np.array([float(W[f]) for f in sel])
    return float(vals.sum() / vals.size)


class TestEmbeddedPredictors:
    def test_all_training_points_identical(self):
        rng = random.Random(41)
        X = random_hypergraph(rng, max_edges=8)
        observed = random_observed(rng, X)
        L = ObservationMap.for_labels({f: 2 for f in observed}, q=3)
        assert predict_label_embedded(0, X, observed, L, GeometryConfig(), k=1) == 2

    def test_constant_weight_observations(self):
        rng = random.Random(42)
        X = random_hypergraph(rng, max_edges=8)
        observed = random_observed(rng, X)
        if len(observed) < 2:
            observed = [0, 1]
        W = ObservationMap.for_weights({f: 0.3 for f in observed}, bounds=(0, 1))
        with pytest.warns(UserWarning):  # constant weights collapse the buckets
            pred = predict_weight_embedded(0, X, observed, W, GeometryConfig(), q=2, k=2)
        assert pred == 0.3

    def test_label_matches_oracle(self):
        rng = random.Random(43)
        for _ in range(25):
            X = random_hypergraph(rng, max_edges=15)
            observed = random_observed(rng, X)
            q = rng.randint(2, 4)
            L = ObservationMap.for_labels({f: rng.randint(1, q) for f in observed}, q=q)
            config = GeometryConfig(size_policy=random_config(rng).size_policy)
            k = rng.randint(1, len(observed))
            for e in range(len(X.edges)):
                assert predict_label_embedded(e, X, observed, L, config, k=k) == embedded_label_oracle(
                    e, X, observed, L, config, k
                )

    def test_weight_matches_oracle(self):
        rng = random.Random(44)
        for _ in range(25):
            X = random_hypergraph(rng, max_edges=15)
            observed = random_observed(rng, X)
            if len(observed) < 2:
                continue
            W = random_weights(rng, observed)
            config = GeometryConfig(size_policy=random_config(rng).size_policy)
            k = rng.randint(1, len(observed))
            for e in range(len(X.edges)):
                got = predict_weight_embedded(e, X, observed, W, config, q=2, k=k)
                assert got == pytest.approx(embedded_weight_oracle(e, X, observed, W, config, 2, k), abs=1e-12)

    def test_k_equal_to_pool_reduces_to_global_vote(self):
        rng = random.Random(45)
        X = random_hypergraph(rng, max_edges=10)
        observed = random_observed(rng, X)
        q = 3
        L = ObservationMap.for_labels({f: rng.randint(1, q) for f in observed}, q=q)
        queries = [e for e in range(len(X.edges)) if e not in set(observed)]
        for e in queries:
            got = predict_label_embedded(e, X, observed, L, GeometryConfig(), k=len(observed))
            assert got == oracle_vote([L[f] for f in observed], q)


class TestConsistencyInvariants:
    def test_equivalent_queries_get_equal_treatment(self):
        rng = random.Random(51)
        hits = 0
        for _ in range(40):
            X = random_hypergraph(rng, max_edges=25)
            observed = random_observed(rng, X)
            F = random_weights(rng, observed)
            counts = batch_counts(X, observed, F, GeometryConfig())
            queries = [e for e in range(len(X.edges)) if e not in set(observed)]
            for i, a in enumerate(queries):
                for b in queries[i + 1 :]:
                    if counts[a] != counts[b]:
                        continue
                    hits += 1
                    sa = knn_shells(a, observed, counts, 2)
                    sb = knn_shells(b, observed, counts, 2)
                    assert set(sa.member_ids) - {a, b} == set(sb.member_ids) - {a, b}
                    pa = predict_weight_modified(a, observed, F, counts, 2)
                    pb = predict_weight_modified(b, observed, F, counts, 2)
                    assert pa == pb
        assert hits > 10  # the sweep really exercised equivalent pairs

    def test_observation_order_is_irrelevant(self):
        rng = random.Random(52)
        X = random_hypergraph(rng, max_edges=20)
        observed = random_observed(rng, X)
        F = random_weights(rng, observed)
        counts = batch_counts(X, observed, F, GeometryConfig())
        shuffled = observed[:]
        rng.shuffle(shuffled)
        e = next(i for i in range(len(X.edges)) if i not in set(observed))
        assert knn_shells(e, observed, counts, 2) == knn_shells(e, shuffled, counts, 2)
        assert predict_weight_modified(e, observed, F, counts, 2) == predict_weight_modified(
            e, shuffled, F, counts, 2
        )
