import numpy as np
import pytest

from trapcc.errors import EmptyPoolError, NoObservationsError
from trapcc.geometry import Frame, OrientedBox, PointCloud, from_object_frame, to_object_frame
from trapcc.gt_pool import (
    GtKind,
    Observation,
    TrackedInstance,
    aggregate_instance,
    build_pool,
    completeness_check,
    load_pool,
    retrieve_gt,
    save_pool,
    split_front_back,
)
from trapcc.metrics import chamfer, mcd

from conftest import sample_box_surface


def obj_cloud(pts):
    return PointCloud(np.asarray(pts, dtype=np.float64), Frame.OBJECT)


def make_instance(track_id, model_pts, poses, view_masks=None, dims=(4.0, 2.0, 1.6)):
    """Observations of a rigid model placed at (center, yaw) poses."""
    obs = []
    for f, (center, yaw) in enumerate(poses):
        box = OrientedBox(center, *dims, yaw)
        pts = model_pts if view_masks is None else model_pts[view_masks[f]]
        sensor = from_object_frame(obj_cloud(pts), box)
        obs.append(Observation(f, sensor, box))
    return TrackedInstance(track_id, tuple(obs))


class TestAggregate:
    def test_single_observation(self):
        model = sample_box_surface(4.0, 2.0, 1.6, 200, seed=1)
        inst = make_instance(1, model, [((10.0, 5.0, 0.0), 0.8)])
        agg = aggregate_instance(inst)
        expect = to_object_frame(inst.observations[0].cloud, inst.observations[0].box)
        np.testing.assert_array_equal(agg.points, expect.points)
        assert agg.frame is Frame.OBJECT

    def test_opposite_views_cover_both_sides(self):
        model = sample_box_surface(4.0, 2.0, 1.6, 1000, seed=2)
        front_mask = model[:, 0] >= 0.0
        inst = make_instance(
            2, model,
            [((8.0, 0.0, 0.0), 0.3), ((8.0, 0.0, 0.0), 0.3)],
            view_masks=[front_mask, ~front_mask],
        )
        agg = aggregate_instance(inst)
        assert agg.count == 1000
        full = obj_cloud(model)
        d_union = chamfer(agg, full)
        d_front = chamfer(obj_cloud(model[front_mask]), full)
        d_back = chamfer(obj_cloud(model[~front_mask]), full)
        assert d_union < d_front
        assert d_union < d_back
        assert d_union < 1e-12

    def test_yaw_invariance(self):
        model = sample_box_surface(4.0, 2.0, 1.6, 300, seed=3)
        inst = make_instance(
            3, model,
            [((5.0, -3.0, 0.2), 0.0), ((-7.0, 11.0, -0.1), 2.4)],
        )
        agg = aggregate_instance(inst)
        np.testing.assert_allclose(agg.points[:300], model, atol=1e-9)
        np.testing.assert_allclose(agg.points[300:], model, atol=1e-9)

    def test_no_observations_rejected(self):
        with pytest.raises(NoObservationsError):
            aggregate_instance(TrackedInstance(9, ()))

    def test_frame_indices_must_increase(self):
        model = sample_box_surface(4.0, 2.0, 1.6, 50, seed=4)
        box = OrientedBox((0.0, 0.0, 0.0), 4.0, 2.0, 1.6, 0.0)
        sensor = from_object_frame(obj_cloud(model), box)
        with pytest.raises(ValueError):
            TrackedInstance(1, (Observation(3, sensor, box), Observation(3, sensor, box)))


class TestCompleteness:
    def test_uniform_box_passes(self, box_surface_cloud):
        result = completeness_check(box_surface_cloud(n=4096), 0.10)
        assert result.passed
        assert result.fractions.shape == (3, 4)
        np.testing.assert_allclose(result.fractions.sum(axis=1), np.ones(3), atol=1e-12)

    def test_front_half_fails_with_zero_quadrants(self, box_surface_cloud):
        cloud = box_surface_cloud(n=4096)
        front = obj_cloud(cloud.points[cloud.points[:, 0] > 0.0])
        result = completeness_check(front, 0.10)
        assert not result.passed
        side, front_v, bev = result.fractions
        assert side[1] == 0.0 and side[2] == 0.0  # x < 0 quadrants empty
        assert bev[1] == 0.0 and bev[2] == 0.0

    def test_fractions_match_brute_force(self):
        pts = sample_box_surface(4.0, 2.0, 1.6, 3000, seed=7)
        keep = np.concatenate([
            np.flatnonzero(pts[:, 0] >= 0)[:300],    # 30% front
            np.flatnonzero(pts[:, 0] < 0)[:700],     # 70% back
        ])
        cloud = obj_cloud(pts[keep])
        result = completeness_check(cloud, 0.10)
        axes = {0: (0, 2), 1: (1, 2), 2: (0, 1)}
        for vi, (ua, va) in axes.items():
            for qi, (su, sv) in enumerate([(1, 1), (-1, 1), (-1, -1), (1, -1)]):
                count = 0
                for p in cloud.points:
                    cu = p[ua] >= 0 if su > 0 else p[ua] < 0
                    cv = p[va] >= 0 if sv > 0 else p[va] < 0
                    count += cu and cv
                assert result.fractions[vi, qi] == count / cloud.count


class TestSplit:
    def test_tie_rule(self):
        front, back = split_front_back(obj_cloud([[1.0, 0, 0], [-1.0, 0, 0], [0.0, 0, 0]]))
        np.testing.assert_array_equal(front.points, [[1.0, 0, 0], [0.0, 0, 0]])
        np.testing.assert_array_equal(back.points, [[-1.0, 0, 0]])

    def test_symmetric_cloud_splits_evenly(self):
        rng = np.random.Generator(np.random.PCG64(11))
        half = rng.uniform(0.1, 2.0, size=(40, 3))
        pts = np.concatenate([half, half * [-1.0, 1.0, 1.0]])
        front, back = split_front_back(obj_cloud(pts))
        assert front.count == back.count == 40

    def test_partition_property(self):
        rng = np.random.Generator(np.random.PCG64(13))
        pts = rng.normal(size=(500, 3))
        front, back = split_front_back(obj_cloud(pts))
        assert front.count + back.count == 500
        assert (front.points[:, 0] >= 0).all()
        assert (back.points[:, 0] < 0).all()


def full_and_half_instances(n_full, n_half, points_each=1500):
    instances = []
    for t in range(n_full):
        model = sample_box_surface(4.0, 2.0, 1.6, points_each, seed=100 + t)
        instances.append(make_instance(t, model, [((6.0, 2.0, 0.0), 0.5)]))
    for t in range(n_full, n_full + n_half):
        model = sample_box_surface(4.0, 2.0, 1.6, points_each, seed=100 + t)
        mask = model[:, 0] > 0.05
        instances.append(make_instance(t, model, [((6.0, 2.0, 0.0), 0.5)],
                                       view_masks=[mask]))
    return instances


class TestBuildPool:
    def test_empty_input(self):
        pool = build_pool([])
        assert pool.whole == [] and pool.partial == []
        assert pool.stats["warnings"] == 1

    def test_full_and_half_scanned_mix(self):
        pool = build_pool(full_and_half_instances(10, 5), 0.10)
        assert len(pool.whole) == 10
        assert len(pool.partial) == 20
        assert pool.stats["accepted"] == 10
        assert pool.stats["uneven"] == 5
        assert sorted(e.source_track_id for e in pool.whole) == list(range(10))

    def test_sparse_instance_excluded(self):
        model = sample_box_surface(4.0, 2.0, 1.6, 900, seed=5)
        inst = make_instance(0, model, [((3.0, 0.0, 0.0), 0.1)])
        pool = build_pool([inst])
        assert pool.whole == []
        assert pool.stats["too_sparse"] == 1

    def test_order_independence(self):
        instances = full_and_half_instances(4, 2)
        a = build_pool(instances)
        b = build_pool(instances[::-1])
        assert [e.source_track_id for e in a.whole] == [e.source_track_id for e in b.whole]
        for ea, eb in zip(a.whole, b.whole):
            np.testing.assert_array_equal(ea.cloud.points, eb.cloud.points)

    def test_entries_satisfy_invariants(self):
        pool = build_pool(full_and_half_instances(6, 0), 0.10)
        for e in pool.whole:
            assert e.cloud.count >= 1024
            assert completeness_check(e.cloud, pool.completeness_threshold).passed
        for track in (e.source_track_id for e in pool.whole):
            front, back = pool.partials_for(track)
            whole = next(e for e in pool.whole if e.source_track_id == track)
            assert front.cloud.count + back.cloud.count == whole.cloud.count


class TestRetrieve:
    @pytest.fixture
    def pool(self):
        return build_pool(full_and_half_instances(5, 0), 0.10)

    def test_identical_input_wins(self, pool):
        target = pool.whole[3]
        got = retrieve_gt(target.cloud, target.size, pool)
        assert got.whole.source_track_id == 3
        assert got.front.kind is GtKind.FRONT_PARTIAL
        assert got.back.kind is GtKind.BACK_PARTIAL

    def test_sparse_subsample_retrieves_superset(self, pool):
        target = pool.whole[2]
        sub = obj_cloud(target.cloud.points[::50][:32])
        got = retrieve_gt(sub, target.size, pool)
        assert got.whole.source_track_id == 2
        assert mcd(sub, got.whole.cloud) == 0.0

    def test_matches_exhaustive_scoring(self, pool):
        rng = np.random.Generator(np.random.PCG64(17))
        for trial in range(20):
            n = int(rng.integers(8, 600))
            pts = rng.normal(size=(n, 3)) * [2.0, 1.0, 0.8]
            inp = obj_cloud(pts)
            size = (4.0, 2.0, 1.6)
            got = retrieve_gt(inp, size, pool)
            scores = []
            for e in pool.whole:
                s = mcd(inp, e.cloud) if n < 256 else chamfer(inp, e.cloud)
                scores.append((s, e.source_track_id))
            want = min(scores)[1]
            assert got.whole.source_track_id == want

    def test_size_filter_prefers_matching_dims(self):
        small = sample_box_surface(3.0, 1.5, 1.2, 1500, seed=41)
        large = sample_box_surface(5.5, 2.4, 2.0, 1500, seed=42)
        instances = [
            make_instance(0, small, [((4.0, 0.0, 0.0), 0.0)], dims=(3.0, 1.5, 1.2)),
            make_instance(1, large, [((4.0, 0.0, 0.0), 0.0)], dims=(5.5, 2.4, 2.0)),
        ]
        pool = build_pool(instances)
        # size filter alone should rule out the large car for a small input
        inp = obj_cloud(sample_box_surface(3.0, 1.5, 1.2, 100, seed=43))
        got = retrieve_gt(inp, (3.0, 1.5, 1.2), pool, size_tol=0.15)
        assert got.whole.source_track_id == 0

    def test_size_fallback_when_no_candidate(self, pool):
        inp = obj_cloud(pool.whole[0].cloud.points[:64])
        got = retrieve_gt(inp, (40.0, 20.0, 16.0), pool, size_tol=0.05)
        assert got.whole is not None  # falls back to shape-only matching

    def test_empty_pool_rejected(self):
        pool = build_pool([])
        with pytest.raises(EmptyPoolError):
            retrieve_gt(obj_cloud([[0.0, 0, 0]]), (4.0, 2.0, 1.6), pool)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        pool = build_pool(full_and_half_instances(3, 1))
        save_pool(pool, tmp_path / "pool")
        loaded = load_pool(tmp_path / "pool")
        assert loaded.completeness_threshold == pool.completeness_threshold
        assert len(loaded.whole) == len(pool.whole)
        assert len(loaded.partial) == len(pool.partial)
        for a, b in zip(pool.whole, loaded.whole):
            assert a.source_track_id == b.source_track_id
            assert a.cloud.count == b.cloud.count
            np.testing.assert_allclose(a.cloud.points, b.cloud.points, atol=1e-6)

    def test_manifest_is_deterministic(self, tmp_path):
        pool = build_pool(full_and_half_instances(2, 0))
        save_pool(pool, tmp_path / "a")
        save_pool(pool, tmp_path / "b")
        assert (tmp_path / "a" / "pool.json").read_bytes() == (tmp_path / "b" / "pool.json").read_bytes()
