"""2-D geometry kernels: polygons, segments, containment, projection.

All polygons are simple (non-self-intersecting) and given as (V, 2) float
arrays of vertices in meters, in either winding order. Containment tests
include the boundary.
"""

from __future__ import annotations

import numpy as np

BOUNDARY_EPS = 1e-9


def as_polygon(vertices) -> np.ndarray:
    poly = np.asarray(vertices, dtype=float)
    if poly.ndim != 2 or poly.shape[0] < 3 or poly.shape[1] != 2:
        raise ValueError(f"polygon must be a (V>=3, 2) array, got shape {poly.shape}")
    return poly


def polygon_area(vertices) -> float:
    """Unsigned polygon area via the shoelace formula."""
    poly = as_polygon(vertices)
    x, y = poly[:, 0], poly[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    return abs(0.5 * float(np.sum(cross)))


def polygon_centroid(vertices) -> np.ndarray:
    """Area-weighted centroid; falls back to the vertex mean for zero area."""
    poly = as_polygon(vertices)
    x, y = poly[:, 0], poly[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    area6 = 3.0 * float(np.sum(cross))
    if abs(area6) < 1e-12:
        return poly.mean(axis=0)
    cx = float(np.sum((x + np.roll(x, -1)) * cross)) / area6
    cy = float(np.sum((y + np.roll(y, -1)) * cross)) / area6
    return np.array([cx, cy])


def polygon_bounds(vertices) -> tuple[float, float, float, float]:
    poly = as_polygon(vertices)
    return (
        float(poly[:, 0].min()),
        float(poly[:, 1].min()),
        float(poly[:, 0].max()),
        float(poly[:, 1].max()),
    )


def is_axis_aligned_rectangle(vertices) -> bool:
    poly = as_polygon(vertices)
    if poly.shape[0] != 4:
        return False
    xs = np.unique(np.round(poly[:, 0], 12))
    ys = np.unique(np.round(poly[:, 1], 12))
    return len(xs) == 2 and len(ys) == 2


def points_in_polygon(vertices, points, eps: float = BOUNDARY_EPS) -> np.ndarray:
    """Boundary-inclusive containment test for an (N, 2) array of points."""
    poly = as_polygon(vertices)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[0]
    inside = np.zeros(n, dtype=bool)
    on_boundary = np.zeros(n, dtype=bool)

    a = poly
    b = np.roll(poly, -1, axis=0)
    for i in range(poly.shape[0]):
        ax, ay = a[i]
        bx, by = b[i]
        # even-odd ray crossing for the strict interior
        cond = (ay > pts[:, 1]) != (by > pts[:, 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = ax + (pts[:, 1] - ay) * (bx - ax) / (by - ay)
        crossing = cond & (pts[:, 0] < x_cross)
        inside ^= crossing
        # boundary proximity
        d = _point_segment_distance_batch(pts, (ax, ay), (bx, by))
        on_boundary |= d <= eps

    return inside | on_boundary


def point_in_polygon(vertices, point, eps: float = BOUNDARY_EPS) -> bool:
    return bool(points_in_polygon(vertices, np.asarray(point, dtype=float)[None, :], eps)[0])


def _point_segment_distance_batch(pts: np.ndarray, a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-18:
        return np.linalg.norm(pts - a, axis=1)
    t = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(pts - proj, axis=1)


def point_segment_distance(point, a, b) -> float:
    p = np.asarray(point, dtype=float)[None, :]
    return float(_point_segment_distance_batch(p, a, b)[0])


def _orient(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _on_segment(p, a, b) -> bool:
    return (
        min(a[0], b[0]) - BOUNDARY_EPS <= p[0] <= max(a[0], b[0]) + BOUNDARY_EPS
        and min(a[1], b[1]) - BOUNDARY_EPS <= p[1] <= max(a[1], b[1]) + BOUNDARY_EPS
    )


def segments_intersect(p1, p2, q1, q2) -> bool:
    """True if segment p1-p2 meets q1-q2 anywhere (touching counts)."""
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    if abs(d1) <= BOUNDARY_EPS and _on_segment(p1, q1, q2):
        return True
    if abs(d2) <= BOUNDARY_EPS and _on_segment(p2, q1, q2):
        return True
    if abs(d3) <= BOUNDARY_EPS and _on_segment(q1, p1, p2):
        return True
    if abs(d4) <= BOUNDARY_EPS and _on_segment(q2, p1, p2):
        return True
    return False


def segment_segment_distance(p1, p2, q1, q2) -> float:
    if segments_intersect(p1, p2, q1, q2):
        return 0.0
    cands = (
        point_segment_distance(p1, q1, q2),
        point_segment_distance(p2, q1, q2),
        point_segment_distance(q1, p1, p2),
        point_segment_distance(q2, p1, p2),
    )
    return min(cands)


def polygon_polygon_distance(verts_a, verts_b) -> float:
    """Minimum distance between two polygon boundaries (0 on touch/overlap)."""
    pa = as_polygon(verts_a)
    pb = as_polygon(verts_b)
    if point_in_polygon(verts_a, pb[0]) or point_in_polygon(verts_b, pa[0]):
        return 0.0
    best = np.inf
    ea = list(zip(pa, np.roll(pa, -1, axis=0)))
    eb = list(zip(pb, np.roll(pb, -1, axis=0)))
    for a1, a2 in ea:
        for b1, b2 in eb:
            d = segment_segment_distance(a1, a2, b1, b2)
            if d < best:
                best = d
            if best == 0.0:
                return 0.0
    return float(best)


def project_points_into_polygon(vertices, points) -> np.ndarray:
    """Map points to themselves if inside, else to the nearest boundary point."""
    poly = as_polygon(vertices)
    pts = np.atleast_2d(np.asarray(points, dtype=float)).copy()
    inside = points_in_polygon(poly, pts)
    if np.all(inside):
        return pts
    out = ~inside
    outside_pts = pts[out]

    a = poly
    b = np.roll(poly, -1, axis=0)
    best_d = np.full(outside_pts.shape[0], np.inf)
    best_p = np.zeros_like(outside_pts)
    for i in range(poly.shape[0]):
        seg_a, seg_b = a[i], b[i]
        ab = seg_b - seg_a
        denom = float(ab @ ab)
        if denom < 1e-18:
            proj = np.broadcast_to(seg_a, outside_pts.shape)
        else:
            t = np.clip(((outside_pts - seg_a) @ ab) / denom, 0.0, 1.0)
            proj = seg_a + t[:, None] * ab
        d = np.linalg.norm(outside_pts - proj, axis=1)
        closer = d < best_d
        best_d[closer] = d[closer]
        best_p[closer] = proj[closer]
    pts[out] = best_p
    return pts


def project_point_into_polygon(vertices, point) -> np.ndarray:
    return project_points_into_polygon(vertices, np.asarray(point, dtype=float)[None, :])[0]


def is_simple_polygon(vertices) -> bool:
    """Check that no two non-adjacent edges intersect."""
    poly = as_polygon(vertices)
    v = poly.shape[0]
    edges = [(poly[i], poly[(i + 1) % v]) for i in range(v)]
    for i in range(v):
        for j in range(i + 1, v):
            if j == i or (j == (i + 1) % v) or ((j + 1) % v == i):
                continue
            if segments_intersect(edges[i][0], edges[i][1], edges[j][0], edges[j][1]):
                return False
    return True
