"""Bounding-box geometry helpers.

Boxes are ``(x, y, w, h)`` tuples in pixels, origin top-left, y growing
downward. Used by the tracker (IoU association) and the PPE associator
(center-point containment).
"""

from __future__ import annotations

import math

Box = tuple[float, float, float, float]
Point = tuple[float, float]


def box_center(box: Box) -> Point:
    x, y, w, h = box
    return (x + w / 2.0, y + h / 2.0)


def box_area(box: Box) -> float:
    return box[2] * box[3]


def contains_point(box: Box, point: Point) -> bool:
    """Inclusive containment: points on the box edge count as inside."""
    x, y, w, h = box
    px, py = point
    return x <= px <= x + w and y <= py <= y + h


def center_distance(a: Box, b: Box) -> float:
    """Euclidean distance between two box centers."""
    ax, ay = box_center(a)
    bx, by = box_center(b)
    return math.hypot(bx - ax, by - ay)


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two (x, y, w, h) boxes, in [0, 1]."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = max(ax, bx)
    iy = max(ay, by)
    ix2 = min(ax + aw, bx + bw)
    iy2 = min(ay + ah, by + bh)
    inter = max(0.0, ix2 - ix) * max(0.0, iy2 - iy)
    if inter <= 0.0:
        return 0.0
    union = aw * ah + bw * bh - inter
    return inter / union
