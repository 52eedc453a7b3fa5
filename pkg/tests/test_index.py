import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rssh.errors import DimensionError, InvalidParamsError
from rssh.eval import generate_planted_instance
from rssh.index import (
    BuildParams,
    CaptureMode,
    IndexModel,
    PartitionLevel,
    PointSet,
    build_partition_index,
    capture_set,
    level_count_bound,
    point_subspace_distance,
    subspace_distances,
)
from rssh.linalg import SubspaceBasis, orthonormalize


def plane_basis():
    """span{e1, e2} in R^3."""
    return SubspaceBasis(dim=3, k=2, basis=np.eye(3)[:, :2], singular_values=[1.0, 1.0])


class TestPointSubspaceDistance:
    def test_axis_residual(self):
        basis = SubspaceBasis(dim=2, k=1, basis=np.eye(2)[:, :1], singular_values=[1.0])
        assert point_subspace_distance(np.array([3.0, 4.0]), basis) == pytest.approx(4.0)

    def test_membership_gives_zero(self):
        basis = plane_basis()
        assert point_subspace_distance(np.array([2.5, -1.0, 0.0]), basis) < 1e-10

    def test_matches_random_search_oracle(self):
        # derivative-free random search over the span: sample 1e5 candidate
        # points in shrinking balls around the best one found so far
        rng = np.random.default_rng(21)
        V = orthonormalize(rng.standard_normal((6, 2)))
        basis = SubspaceBasis(dim=6, k=2, basis=V, singular_values=[1.0, 1.0])
        p = rng.standard_normal(6)
        best_coords = np.zeros(2)
        best = np.linalg.norm(p - V @ best_coords)
        radius = float(np.linalg.norm(p)) + 1.0
        for _ in range(20):
            cand = best_coords + rng.uniform(-radius, radius, size=(5000, 2))
            dists = np.linalg.norm(p[None, :] - cand @ V.T, axis=1)
            i = int(np.argmin(dists))
            if dists[i] < best:
                best = float(dists[i])
                best_coords = cand[i]
            radius *= 0.5
        got = point_subspace_distance(p, basis)
        assert got == pytest.approx(best, abs=1e-3)
        # cross-check against the closed-form projector residual
        assert got == pytest.approx(float(np.linalg.norm(p - V @ (V.T @ p))), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            point_subspace_distance(np.ones(4), plane_basis())


class TestCaptureSet:
    def hand_placed(self):
        # e3 component IS the distance to span{e1, e2}
        dists = [0.0, 0.1, 0.2, 0.5, 0.9, 1.0]
        rng = np.random.default_rng(3)
        pts = np.column_stack(
            [rng.standard_normal(6), rng.standard_normal(6), np.array(dists)]
        )
        return PointSet.from_points(pts)

    def test_all_in_span(self):
        pts = PointSet.from_points(np.array([[1.0, 2.0, 0.0], [3.0, -1.0, 0.0]]))
        captured, remaining = capture_set(pts, plane_basis(), threshold=0.5)
        assert captured.tolist() == [0, 1]
        assert remaining.size == 0

    def test_threshold_below_everything(self):
        pts = PointSet.from_points(np.array([[0.0, 0.0, 2.0], [0.0, 0.0, 3.0]]))
        captured, remaining = capture_set(pts, plane_basis(), threshold=0.5)
        assert captured.size == 0
        assert remaining.tolist() == [0, 1]

    def test_boundary_included_and_order_preserved(self):
        captured, remaining = capture_set(self.hand_placed(), plane_basis(), 0.5)
        assert captured.tolist() == [0, 1, 2, 3]
        assert remaining.tolist() == [4, 5]

    def test_nonpositive_threshold_rejected(self):
        with pytest.raises(InvalidParamsError):
            capture_set(self.hand_placed(), plane_basis(), 0.0)


class TestLevelCountBound:
    @pytest.mark.parametrize("n,expected", [(1, 1), (2, 2), (256, 9), (1000, 11)])
    def test_values(self, n, expected):
        assert level_count_bound(n) == expected

    @settings(deadline=None, max_examples=50)
    @given(st.integers(min_value=1, max_value=10**9))
    def test_matches_float_formula_and_monotone(self, n):
        assert level_count_bound(n) == int(np.ceil(np.log2(n) if n > 1 else 0)) + 1
        assert level_count_bound(n + 1) >= level_count_bound(n)


class TestBuildPartitionIndex:
    def params(self, **kw):
        base = dict(k=2, epsilon=0.5, eta=0.1, seed=0)
        base.update(kw)
        return BuildParams(**base)

    def test_single_point(self):
        data = PointSet.from_points(np.array([[1.0, 2.0, 3.0]]))
        model = build_partition_index(data, self.params(k=1))
        assert len(model.levels) == 1
        assert model.levels[0].member_ids.tolist() == [0]

    def test_exact_subspace_zero_noise_single_level(self):
        rng = np.random.default_rng(5)
        V = orthonormalize(rng.standard_normal((8, 2)))
        data = PointSet.from_points(rng.standard_normal((40, 2)) @ V.T)
        model = build_partition_index(data, self.params())
        assert len(model.levels) == 1
        level = model.levels[0]
        assert level.capture_mode is CaptureMode.PAPER_THRESHOLD
        assert level.member_ids.shape[0] == 40

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_planted_instance_levels_and_capture(self, seed):
        inst = generate_planted_instance(n=256, d=32, k=8, epsilon=0.5, seed=seed)
        model = build_partition_index(
            inst.data, BuildParams(k=8, epsilon=0.5, eta=0.1, seed=seed)
        )
        assert len(model.levels) <= 9
        remaining = 256
        for level in model.levels:
            captured = level.member_ids.shape[0]
            if level.capture_mode is CaptureMode.PAPER_THRESHOLD:
                assert 2 * captured >= remaining
            remaining -= captured

    def test_partition_property(self):
        rng = np.random.default_rng(6)
        data = PointSet.from_points(rng.standard_normal((100, 6)))
        model = build_partition_index(data, self.params(k=3))
        all_ids = np.concatenate([level.member_ids for level in model.levels])
        assert sorted(all_ids.tolist()) == list(range(100))
        assert len(set(all_ids.tolist())) == 100

    def test_level_bound_on_arbitrary_data(self):
        # uniform noise violates the bounded-noise model; the median fallback
        # must still respect the level cap
        rng = np.random.default_rng(7)
        data = PointSet.from_points(rng.uniform(-1, 1, size=(130, 5)))
        model = build_partition_index(data, self.params(k=2))
        assert len(model.levels) <= level_count_bound(130)
        modes = {level.capture_mode for level in model.levels}
        assert CaptureMode.MEDIAN_FALLBACK in modes

    def test_members_within_threshold(self):
        rng = np.random.default_rng(8)
        data = PointSet.from_points(rng.standard_normal((64, 6)))
        model = build_partition_index(data, self.params(k=2))
        for level in model.levels:
            members = data.rows_for_ids(level.member_ids)
            dist = subspace_distances(members, level.basis)
            assert np.all(dist <= level.threshold_used + 1e-12)

    def test_small_remainder_final_sweep(self):
        # 3 colinear-ish points with k=2: once fewer than k points remain the
        # tail level must sweep them up
        rng = np.random.default_rng(9)
        data = PointSet.from_points(rng.standard_normal((3, 4)))
        model = build_partition_index(data, self.params(k=2))
        assert model.levels[-1].capture_mode in (
            CaptureMode.FINAL_SWEEP,
            CaptureMode.PAPER_THRESHOLD,
            CaptureMode.MEDIAN_FALLBACK,
        )
        total = sum(level.member_ids.shape[0] for level in model.levels)
        assert total == 3

    def test_max_levels_override(self):
        rng = np.random.default_rng(10)
        data = PointSet.from_points(rng.uniform(-1, 1, size=(64, 5)))
        model = build_partition_index(data, self.params(k=2, max_levels=2))
        assert len(model.levels) <= 2
        assert model.levels[-1].capture_mode is CaptureMode.FINAL_SWEEP

    def test_determinism_byte_for_byte(self, tmp_path):
        from rssh.io import save_index

        rng = np.random.default_rng(11)
        data = PointSet.from_points(rng.standard_normal((50, 6)))
        a, b = tmp_path / "a.idx", tmp_path / "b.idx"
        save_index(build_partition_index(data, self.params(k=3, seed=42)), a)
        save_index(build_partition_index(data, self.params(k=3, seed=42)), b)
        assert a.read_bytes() == b.read_bytes()

    def test_rank_too_large_rejected(self):
        data = PointSet.from_points(np.eye(3))
        with pytest.raises(InvalidParamsError):
            build_partition_index(data, self.params(k=4))

    def test_duplicate_points_land_together(self):
        row = np.array([1.0, 2.0, 3.0, 4.0])
        rng = np.random.default_rng(12)
        pts = np.vstack([row, row, rng.standard_normal((20, 4))])
        data = PointSet.from_points(pts)
        model = build_partition_index(data, self.params(k=2))
        home = [
            level.level_id for level in model.levels if 0 in level.member_ids
        ]
        twin = [
            level.level_id for level in model.levels if 1 in level.member_ids
        ]
        assert home == twin


class TestTypes:
    def test_point_set_unique_ids(self):
        with pytest.raises(InvalidParamsError):
            PointSet(points=np.eye(2), ids=np.array([1, 1]))

    def test_ids_stable_across_subsets(self):
        rng = np.random.default_rng(13)
        data = PointSet(points=rng.standard_normal((6, 3)), ids=np.array([9, 4, 7, 1, 8, 2]))
        sub = data.take_ids([7, 8, 4])
        assert sub.ids.tolist() == [4, 7, 8]  # original row order kept
        np.testing.assert_array_equal(sub.points[1], data.points[2])
        np.testing.assert_array_equal(
            sub.rows_for_ids([8, 4]), data.points[[4, 1]]
        )

    def test_rows_for_unknown_id_rejected(self):
        data = PointSet(points=np.eye(3), ids=np.array([5, 6, 7]))
        with pytest.raises(InvalidParamsError):
            data.rows_for_ids([6, 99])

    def test_point_set_id_count(self):
        with pytest.raises(DimensionError):
            PointSet(points=np.eye(2), ids=np.array([0, 1, 2]))

    def test_build_params_validation(self):
        with pytest.raises(InvalidParamsError):
            BuildParams(k=0, epsilon=0.5, eta=0.5)
        with pytest.raises(InvalidParamsError):
            BuildParams(k=1, epsilon=1.5, eta=0.5)
        with pytest.raises(InvalidParamsError):
            BuildParams(k=1, epsilon=0.5, eta=0.0)
        with pytest.raises(InvalidParamsError):
            BuildParams(k=1, epsilon=0.5, eta=0.5, alpha=-1.0)

    def test_alpha_defaults_to_epsilon_fraction(self):
        assert BuildParams(k=1, epsilon=0.5, eta=0.5).alpha == pytest.approx(0.02)

    def test_level_requires_members(self):
        with pytest.raises(InvalidParamsError):
            PartitionLevel(
                level_id=0,
                basis=plane_basis(),
                member_ids=np.array([], dtype=np.int64),
                threshold_used=1.0,
                capture_mode=CaptureMode.PAPER_THRESHOLD,
            )

    def test_model_rejects_overlapping_levels(self):
        level = PartitionLevel(
            level_id=0,
            basis=plane_basis(),
            member_ids=np.array([0, 1]),
            threshold_used=1.0,
            capture_mode=CaptureMode.PAPER_THRESHOLD,
        )
        dup = PartitionLevel(
            level_id=1,
            basis=plane_basis(),
            member_ids=np.array([1, 2]),
            threshold_used=1.0,
            capture_mode=CaptureMode.PAPER_THRESHOLD,
        )
        with pytest.raises(InvalidParamsError):
            IndexModel(
                params=BuildParams(k=1, epsilon=0.5, eta=0.5),
                levels=(level, dup),
                d=3,
                total_points=4,
            )
