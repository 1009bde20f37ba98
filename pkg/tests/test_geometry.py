import numpy as np
import pytest

from radiomapper import geometry

SQUARE = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]])
LSHAPE = np.array([[0.0, 0.0], [4.0, 0.0], [4.0, 2.0], [2.0, 2.0], [2.0, 4.0], [0.0, 4.0]])


def test_area_and_centroid_square():
    assert geometry.polygon_area(SQUARE) == pytest.approx(4.0)
    assert geometry.polygon_centroid(SQUARE) == pytest.approx([1.0, 1.0])


def test_centroid_lshape():
    # decompose into two rectangles: [0,4]x[0,2] (area 8, c=(2,1)) and
    # [0,2]x[2,4] (area 4, c=(1,3))
    expected = (8 * np.array([2.0, 1.0]) + 4 * np.array([1.0, 3.0])) / 12
    assert geometry.polygon_centroid(LSHAPE) == pytest.approx(expected.tolist())


def test_point_in_polygon_interior_exterior_boundary():
    assert geometry.point_in_polygon(SQUARE, [1.0, 1.0])
    assert not geometry.point_in_polygon(SQUARE, [3.0, 1.0])
    assert geometry.point_in_polygon(SQUARE, [2.0, 1.0])  # edge
    assert geometry.point_in_polygon(SQUARE, [0.0, 0.0])  # vertex


def test_point_in_polygon_nonconvex():
    assert geometry.point_in_polygon(LSHAPE, [1.0, 3.0])
    assert not geometry.point_in_polygon(LSHAPE, [3.0, 3.0])


def test_points_in_polygon_vectorized_matches_scalar():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 5, size=(200, 2))
    vec = geometry.points_in_polygon(LSHAPE, pts)
    scal = np.array([geometry.point_in_polygon(LSHAPE, p) for p in pts])
    assert np.array_equal(vec, scal)


def test_segments_intersect_cases():
    assert geometry.segments_intersect([0, 0], [2, 2], [0, 2], [2, 0])
    assert not geometry.segments_intersect([0, 0], [1, 0], [0, 1], [1, 1])
    # touching at an endpoint counts
    assert geometry.segments_intersect([0, 0], [1, 1], [1, 1], [2, 0])
    # collinear overlap
    assert geometry.segments_intersect([0, 0], [2, 0], [1, 0], [3, 0])


def test_segment_segment_distance():
    assert geometry.segment_segment_distance([0, 0], [1, 0], [0, 1], [1, 1]) == pytest.approx(1.0)
    assert geometry.segment_segment_distance([0, 0], [2, 2], [0, 2], [2, 0]) == 0.0


def test_polygon_distance_adjacent_and_apart():
    a = SQUARE
    b = SQUARE + np.array([2.0, 0.0])  # shares an edge
    c = SQUARE + np.array([5.0, 0.0])  # 3 m gap between x=2 and x=5
    assert geometry.polygon_polygon_distance(a, b) == 0.0
    assert geometry.polygon_polygon_distance(a, c) == pytest.approx(3.0)


def test_projection_inside_is_identity():
    p = np.array([0.5, 1.5])
    assert geometry.project_point_into_polygon(SQUARE, p) == pytest.approx(p.tolist())


def test_projection_outside_lands_on_nearest_boundary():
    assert geometry.project_point_into_polygon(SQUARE, [3.0, 1.0]) == pytest.approx([2.0, 1.0])
    assert geometry.project_point_into_polygon(SQUARE, [-1.0, -1.0]) == pytest.approx([0.0, 0.0])
    # every projected point must be inside
    rng = np.random.default_rng(1)
    pts = rng.uniform(-3, 7, size=(100, 2))
    proj = geometry.project_points_into_polygon(LSHAPE, pts)
    assert geometry.points_in_polygon(LSHAPE, proj).all()


def test_is_axis_aligned_rectangle():
    assert geometry.is_axis_aligned_rectangle(SQUARE)
    assert not geometry.is_axis_aligned_rectangle(LSHAPE)
    rot = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 1.0], [1.0, 2.0]])
    assert not geometry.is_axis_aligned_rectangle(rot)


def test_is_simple_polygon():
    assert geometry.is_simple_polygon(SQUARE)
    bowtie = np.array([[0.0, 0.0], [2.0, 2.0], [2.0, 0.0], [0.0, 2.0]])
    assert not geometry.is_simple_polygon(bowtie)
