"""Geometry kernel: exact volumes, clipping, faces, seeded sampling."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from breaklab import geometry

from util import grid_partition, random_convex_polygon, random_polytope


class TestVolume:
    def test_unit_square(self):
        sq = geometry.box([0, 0], [1, 1])
        assert sq.volume == pytest.approx(1.0, abs=1e-15)

    def test_triangle(self):
        tri = geometry.from_vertices([[0, 0], [1, 0], [0, 1]])
        assert tri.volume == pytest.approx(0.5, abs=1e-15)

    def test_interval(self):
        iv = geometry.interval(-0.25, 1.75)
        assert iv.volume == pytest.approx(2.0, abs=1e-15)

    def test_unit_cube(self):
        cube = geometry.box([0, 0, 0], [1, 1, 1])
        assert cube.volume == pytest.approx(1.0, rel=1e-12)

    def test_tetrahedron(self):
        tet = geometry.from_vertices([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
        assert tet.volume == pytest.approx(1.0 / 6.0, rel=1e-12)

    def test_degenerate_flagged(self):
        flat = geometry.from_vertices([[0, 0], [1, 1], [2, 2]])
        assert flat.degenerate
        assert flat.volume == 0.0

    def test_hexagon_against_mc(self):
        hexagon = geometry.regular_polygon([0.3, -0.2], 0.8, segments=6)
        exact = hexagon.volume
        mc = geometry.volume_mc(hexagon, samples=200_000, seed=7)
        assert abs(mc.estimate - exact) < 4.0 * mc.sigma

    def test_mc_sigma_shrinks(self):
        p = geometry.from_vertices([[0, 0], [2, 0], [2, 1], [0.5, 1.5]])
        s1 = geometry.volume_mc(p, 4_000, seed=1).sigma
        s2 = geometry.volume_mc(p, 64_000, seed=1).sigma
        assert s2 < s1 / 3.0  # ~1/sqrt(16) = 1/4 up to hit-fraction noise


class TestHalfspaceSync:
    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_vertices_satisfy_halfspaces(self, dim):
        rng = np.random.default_rng(42 + dim)
        p = random_polytope(rng, dim)
        slack = p.vertices @ p.normals.T - p.offsets[None, :]
        assert np.max(slack) < 1e-9

    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_each_halfspace_touched(self, dim):
        rng = np.random.default_rng(99 + dim)
        p = random_polytope(rng, dim)
        slack = p.offsets[None, :] - p.vertices @ p.normals.T
        assert np.all(np.min(slack, axis=0) < 1e-7)

    def test_normals_unit(self):
        rng = np.random.default_rng(5)
        for dim in (2, 3):
            p = random_polytope(rng, dim)
            assert np.allclose(np.linalg.norm(p.normals, axis=1), 1.0, atol=1e-12)


class TestIntersection:
    def test_rectangles_closed_form(self):
        a = geometry.box([0, 0], [1, 1])
        b = geometry.box([0.5, 0], [1.5, 1])
        ab = geometry.intersect(a, b)
        assert ab is not None
        assert ab.volume == pytest.approx(0.5, abs=1e-12)

    def test_disjoint_is_none(self):
        a = geometry.box([0, 0], [1, 1])
        b = geometry.box([2, 2], [3, 3])
        assert geometry.intersect(a, b) is None

    def test_touching_is_measure_zero(self):
        a = geometry.box([0, 0], [1, 1])
        b = geometry.box([1, 0], [2, 1])
        assert geometry.intersect(a, b) is None

    def test_cubes_closed_form(self):
        a = geometry.box([0, 0, 0], [1, 1, 1])
        b = geometry.box([0.25, 0.25, -1], [2, 2, 0.5])
        ab = geometry.intersect(a, b)
        assert ab is not None
        assert ab.volume == pytest.approx(0.75 * 0.75 * 0.5, rel=1e-9)

    def test_intervals(self):
        a = geometry.interval(0, 2)
        b = geometry.interval(1.5, 3)
        ab = geometry.intersect(a, b)
        assert ab is not None and ab.volume == pytest.approx(0.5, abs=1e-15)

    @given(st.integers(0, 10_000), st.integers(1, 3))
    @settings(max_examples=60, deadline=None)
    def test_volume_bounded_by_min(self, seed, dim):
        rng = np.random.default_rng(seed)
        p = random_polytope(rng, dim)
        q = random_polytope(rng, dim)
        if p.degenerate or q.degenerate:
            return
        pq = geometry.intersect(p, q)
        if pq is not None:
            assert pq.volume <= min(p.volume, q.volume) + 1e-9

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_matches_mc_2d(self, seed):
        rng = np.random.default_rng(seed)
        p = random_convex_polygon(rng)
        q = random_convex_polygon(rng, center=rng.uniform(-0.5, 0.5, 2))
        pq = geometry.intersect(p, q)
        exact = 0.0 if pq is None else pq.volume
        lo = np.minimum(*geometry.bounding_box(p))  # noqa: F841 (clarity)
        pts = geometry.sample_points(p, 20_000, seed=seed).points
        frac = geometry.contains_many(q, pts).mean()
        mc = frac * p.volume
        sigma = p.volume * np.sqrt(max(frac * (1 - frac), 5e-5) / 20_000)
        assert abs(mc - exact) < 5.0 * sigma + 1e-4


class TestTranslate:
    def test_volume_preserved(self):
        p = geometry.from_vertices([[0, 0], [2, 0], [1, 2]])
        q = geometry.translate(p, [3.5, -1.0])
        assert q.volume == p.volume
        assert np.allclose(q.vertices, p.vertices + np.array([3.5, -1.0]))

    def test_halfspaces_follow(self):
        p = geometry.box([0, 0], [1, 2])
        q = geometry.translate(p, [0.5, 0.5])
        assert geometry.contains(q, [1.2, 2.2])
        assert not geometry.contains(q, [0.2, 0.2])


class TestMeasures:
    def test_centroid_square(self):
        sq = geometry.box([0, 0], [2, 2])
        assert np.allclose(geometry.centroid(sq), [1, 1], atol=1e-12)

    def test_centroid_tetrahedron(self):
        tet = geometry.from_vertices([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
        assert np.allclose(geometry.centroid(tet), [0.25, 0.25, 0.25], atol=1e-12)

    def test_diameter(self):
        sq = geometry.box([0, 0], [1, 1])
        assert geometry.diameter(sq) == pytest.approx(np.sqrt(2.0), rel=1e-12)

    def test_inradius_square(self):
        sq = geometry.box([0, 0], [2, 2])
        assert geometry.inradius(sq) == pytest.approx(1.0, abs=1e-8)

    def test_inradius_triangle(self):
        # right triangle with legs 3, 4: r = (3 + 4 - 5) / 2 = 1
        tri = geometry.from_vertices([[0, 0], [3, 0], [0, 4]])
        assert geometry.inradius(tri) == pytest.approx(1.0, abs=1e-8)

    def test_surface_measure_cube(self):
        cube = geometry.box([0, 0, 0], [1, 1, 1])
        assert geometry.surface_measure(cube) == pytest.approx(6.0, rel=1e-9)


class TestFaces:
    def test_interval_partition_faces(self):
        part = grid_partition([0.0], [3.0], (3,))
        assert len(part.faces) == 2
        xs = sorted(f.vertices[0, 0] for f in part.faces)
        assert xs == pytest.approx([1.0, 2.0], abs=1e-12)
        for f in part.faces:
            assert f.measure == 1.0

    def test_split_square_face(self):
        left = geometry.box([0, 0], [0.5, 1])
        right = geometry.box([0.5, 0], [1, 1])
        faces = geometry.extract_faces([left, right])
        assert len(faces) == 1
        f = faces[0]
        assert f.measure == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(np.abs(f.normal), [1, 0], atol=1e-12)
        # oriented from cell_a=0 (left) into cell_b=1 (right)
        assert f.normal[0] > 0

    def test_partial_overlap_edge(self):
        a = geometry.box([0, 0], [1, 1])
        b = geometry.box([1, 0.5], [2, 2])
        faces = geometry.extract_faces([a, b])
        assert len(faces) == 1
        assert faces[0].measure == pytest.approx(0.5, abs=1e-12)

    def test_grid_face_count_2d(self):
        part = grid_partition([0, 0], [1, 1], (3, 3))
        # 2 * 3 vertical + 2 * 3 horizontal interior facets
        assert len(part.faces) == 12
        assert sum(f.measure for f in part.faces) == pytest.approx(4.0, abs=1e-9)

    def test_grid_face_count_3d(self):
        part = grid_partition([0, 0, 0], [1, 1, 1], (2, 2, 2))
        assert len(part.faces) == 12
        assert sum(f.measure for f in part.faces) == pytest.approx(3.0, rel=1e-9)

    def test_face_centroid_on_plane(self):
        part = grid_partition([0, 0], [2, 1], (2, 1))
        f = part.faces[0]
        assert f.centroid[0] == pytest.approx(1.0, abs=1e-12)


class TestPartitionValidation:
    def test_valid_grid(self):
        part = grid_partition([0, 0], [1, 1], (4, 4))
        assert geometry.validate_partition(part) == []

    def test_missing_cell_detected(self):
        full = grid_partition([0, 0], [1, 1], (2, 2))
        broken = geometry.CellPartition(full.domain, full.cells[:3], full.faces)
        issues = geometry.validate_partition(broken)
        assert any("volume" in s for s in issues)

    def test_overlap_detected(self):
        dom = geometry.box([0, 0], [1, 1])
        a = geometry.box([0, 0], [0.6, 1])
        b = geometry.box([0.4, 0], [1, 1])
        part = geometry.CellPartition((dom,), (a, b), ())
        issues = geometry.validate_partition(part)
        assert any("overlap" in s for s in issues)

    def test_dimension_mismatch_raises(self):
        with pytest.raises(geometry.DimensionMismatchError):
            geometry.make_partition(geometry.box([0, 0], [1, 1]),
                                    [geometry.interval(0, 1)])


class TestSampling:
    def test_deterministic(self):
        p = geometry.box([0, 0], [1, 1])
        s1 = geometry.sample_points(p, 500, seed=11)
        s2 = geometry.sample_points(p, 500, seed=11)
        assert np.array_equal(s1.points, s2.points)

    def test_seed_changes_points(self):
        p = geometry.box([0, 0], [1, 1])
        s1 = geometry.sample_points(p, 500, seed=11)
        s2 = geometry.sample_points(p, 500, seed=12)
        assert not np.array_equal(s1.points, s2.points)

    def test_points_inside(self):
        tri = geometry.from_vertices([[0, 0], [1, 0], [0, 1]])
        s = geometry.sample_points(tri, 2_000, seed=3)
        assert np.all(geometry.contains_many(tri, s.points, tol=1e-9))

    def test_weight(self):
        tri = geometry.from_vertices([[0, 0], [1, 0], [0, 1]])
        s = geometry.sample_points(tri, 1_000, seed=3)
        assert s.weight == pytest.approx(tri.volume / 1_000)

    def test_degenerate_raises(self):
        flat = geometry.from_vertices([[0, 0], [1, 1]])
        with pytest.raises(geometry.DegenerateRegionError):
            geometry.sample_points(flat, 10, seed=0)

    def test_uniformity_moments(self):
        sq = geometry.box([0, 0], [1, 1])
        s = geometry.sample_points(sq, 40_000, seed=21)
        assert np.allclose(s.points.mean(axis=0), [0.5, 0.5], atol=0.01)
        assert np.allclose(s.points.var(axis=0), 1.0 / 12.0, atol=0.005)
