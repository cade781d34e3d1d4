import numpy as np
import pytest

from dispmix import (
    ClusterConfig,
    DataError,
    InvalidParameterError,
    LaplaceMode,
    ParameterPoint,
    brute_force_dbscan,
    cluster_mu,
)


def make_points(mus, anchor_mu=None):
    points = [
        ParameterPoint(LaplaceMode(w=0.5, mu=float(mu), b=1.0), member=i)
        for i, mu in enumerate(mus)
    ]
    if anchor_mu is not None:
        points.append(ParameterPoint(LaplaceMode(w=1.0, mu=float(anchor_mu), b=0.8), member=None))
    return points


def as_partition(outcome):
    return {frozenset(c) for c in outcome.clusters}, frozenset(outcome.noise)


class TestExamples:
    def test_tight_group_plus_outlier(self):
        outcome = cluster_mu(make_points([20.1, 20.4, 19.8, 60.0]), ClusterConfig())
        assert as_partition(outcome) == ({frozenset({0, 1, 2})}, frozenset({3}))
        assert outcome.label_cluster is None

    def test_single_anchor_becomes_cluster(self):
        outcome = cluster_mu(make_points([], anchor_mu=37.5), ClusterConfig())
        assert as_partition(outcome) == ({frozenset({0})}, frozenset())
        assert outcome.label_cluster == 0

    def test_chained_reachability(self):
        outcome = cluster_mu(make_points([10.0, 12.0, 14.0, 16.0]), ClusterConfig())
        assert as_partition(outcome) == ({frozenset({0, 1, 2, 3})}, frozenset())

    def test_empty_input(self):
        outcome = cluster_mu([], ClusterConfig())
        assert outcome.clusters == () and outcome.noise == () and outcome.label_cluster is None

    def test_anchor_joins_nearby_cluster(self):
        outcome = cluster_mu(make_points([30.0, 30.5], anchor_mu=31.0), ClusterConfig())
        assert as_partition(outcome) == ({frozenset({0, 1, 2})}, frozenset())
        assert outcome.label_cluster == 0

    def test_far_anchor_rescued_not_noise(self):
        outcome = cluster_mu(make_points([10.0, 10.2, 80.0], anchor_mu=50.0), ClusterConfig())
        clusters, noise = as_partition(outcome)
        assert frozenset({3}) in clusters
        assert 3 not in noise
        assert outcome.clusters[outcome.label_cluster] == (3,)

    def test_two_anchors_rejected(self):
        points = make_points([10.0], anchor_mu=20.0)
        points.append(ParameterPoint(LaplaceMode(w=1.0, mu=30.0, b=0.8), member=None))
        with pytest.raises(DataError):
            cluster_mu(points, ClusterConfig())

    def test_defaults_and_validation(self):
        cfg = ClusterConfig()
        assert cfg.eps == 3.0 and cfg.min_pts == 2
        with pytest.raises(InvalidParameterError):
            ClusterConfig(eps=0.0)
        with pytest.raises(InvalidParameterError):
            ClusterConfig(min_pts=0)


class TestOracleEquivalence:
    def test_random_instances_match_brute_force(self, rng):
        for trial in range(2000):
            n = int(rng.integers(0, 13))
            # clumpy draws exercise chaining, borders and noise
            centers = rng.uniform(0, 40, size=max(1, n // 3))
            mus = [float(rng.choice(centers) + rng.normal(0, 2)) for _ in range(n)]
            mus = [abs(m) for m in mus]
            with_anchor = bool(n) and trial % 3 == 0
            points = make_points(mus[:-1] if with_anchor else mus,
                                 anchor_mu=mus[-1] if with_anchor else None)
            cfg = ClusterConfig(eps=float(rng.uniform(0.5, 4.0)), min_pts=int(rng.integers(1, 5)))
            got = cluster_mu(points, cfg)
            want = brute_force_dbscan(points, cfg)
            assert as_partition(got) == as_partition(want), (mus, cfg)
            got_label = None if got.label_cluster is None else frozenset(got.clusters[got.label_cluster])
            want_label = None if want.label_cluster is None else frozenset(want.clusters[want.label_cluster])
            assert got_label == want_label

    def test_partition_covers_every_point(self, rng):
        for _ in range(300):
            n = int(rng.integers(1, 13))
            points = make_points(rng.uniform(0, 30, n))
            outcome = cluster_mu(points, ClusterConfig(eps=2.0, min_pts=2))
            seen = sorted(i for c in outcome.clusters for i in c) + sorted(outcome.noise)
            assert sorted(seen) == list(range(n))

    def test_brute_force_trivial_cases(self):
        assert brute_force_dbscan([], ClusterConfig()).clusters == ()
        pts = make_points([5.0, 5.0, 5.0])
        outcome = brute_force_dbscan(pts, ClusterConfig())
        assert as_partition(outcome) == ({frozenset({0, 1, 2})}, frozenset())
