"""Box geometry primitives."""

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from shiftwatch.geometry import box_area, box_center, center_distance, contains_point, iou


def boxes(min_side=0.1, max_coord=1000.0):
    side = st.floats(min_value=min_side, max_value=max_coord, allow_nan=False)
    coord = st.floats(min_value=-max_coord, max_value=max_coord, allow_nan=False)
    return st.tuples(coord, coord, side, side)


class TestBoxBasics:
    def test_center(self):
        assert box_center((10, 20, 40, 80)) == (30, 60)

    def test_area(self):
        assert box_area((0, 0, 4, 5)) == 20

    def test_contains_point_interior(self):
        assert contains_point((0, 0, 10, 10), (5, 5))

    def test_contains_point_edges_inclusive(self):
        assert contains_point((0, 0, 10, 10), (0, 0))
        assert contains_point((0, 0, 10, 10), (10, 10))

    def test_contains_point_outside(self):
        assert not contains_point((0, 0, 10, 10), (10.001, 5))

    def test_center_distance_is_euclidean(self):
        # centers (5, 5) and (8, 9): 3-4-5 triangle
        assert center_distance((0, 0, 10, 10), (3, 4, 10, 10)) == pytest.approx(5.0)


class TestIoU:
    def test_identical_boxes(self):
        assert iou((0, 0, 10, 10), (0, 0, 10, 10)) == pytest.approx(1.0)

    def test_disjoint_boxes(self):
        assert iou((0, 0, 10, 10), (20, 20, 10, 10)) == 0.0

    def test_touching_edges_count_as_disjoint(self):
        """Zero-area overlap must not produce a positive score."""
        assert iou((0, 0, 10, 10), (10, 0, 10, 10)) == 0.0

    def test_half_overlap(self):
        # overlap 5x10 = 50, union 100 + 100 - 50 = 150
        assert iou((0, 0, 10, 10), (5, 0, 10, 10)) == pytest.approx(50 / 150)

    def test_nested_box(self):
        # inner 2x2 = 4 inside 10x10 = 100
        assert iou((0, 0, 10, 10), (4, 4, 2, 2)) == pytest.approx(4 / 100)

    @given(boxes(), boxes())
    def test_bounded_and_symmetric(self, a, b):
        v = iou(a, b)
        assert 0.0 <= v <= 1.0 + 1e-9
        assert v == pytest.approx(iou(b, a))

    @given(boxes())
    def test_self_iou_is_one(self, a):
        assert iou(a, a) == pytest.approx(1.0)

    @given(boxes(), boxes())
    def test_matches_area_oracle(self, a, b):
        """Brute-force overlap area from interval arithmetic."""
        ax, ay, aw, ah = a
        bx, by, bw, bh = b
        ox = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
        oy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
        inter = ox * oy
        if inter == 0.0:
            assert iou(a, b) == 0.0
        else:
            union = aw * ah + bw * bh - inter
            assert iou(a, b) == pytest.approx(inter / union)


@given(boxes(), st.floats(-1000, 1000), st.floats(-1000, 1000))
def test_center_distance_oracle(a, dx, dy):
    b = (a[0] + dx, a[1] + dy, a[2], a[3])
    assert center_distance(a, b) == pytest.approx(math.hypot(dx, dy), abs=1e-6)
