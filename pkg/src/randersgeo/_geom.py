"""Low-level geometry kernels (numba-compiled).

All polylines are passed as float64 arrays of shape (n, 2) holding (x, y)
pixel coordinates; segments of a closed polyline wrap around.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _seg_point_dist2(px, py, ax, ay, bx, by):
    """Squared distance from point p to segment [a, b]."""
    dx = bx - ax
    dy = by - ay
    l2 = dx * dx + dy * dy
    if l2 <= 0.0:
        ex = px - ax
        ey = py - ay
        return ex * ex + ey * ey
    t = ((px - ax) * dx + (py - ay) * dy) / l2
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    ex = px - (ax + t * dx)
    ey = py - (ay + t * dy)
    return ex * ex + ey * ey


@njit(cache=True)
def polyline_distance_field(points, closed, width, height, spacing):
    """Exact distance from every cell center to the nearest polyline segment.

    Cell (ix, iy) has center (ix * spacing, iy * spacing); polyline
    coordinates are in the same units.
    """
    n = points.shape[0]
    nseg = n if closed else n - 1
    out = np.empty((height, width), dtype=np.float64)
    for iy in range(height):
        py = iy * spacing
        for ix in range(width):
            px = ix * spacing
            best = 1e300
            for k in range(nseg):
                k2 = (k + 1) % n
                d2 = _seg_point_dist2(px, py,
                                      points[k, 0], points[k, 1],
                                      points[k2, 0], points[k2, 1])
                if d2 < best:
                    best = d2
            out[iy, ix] = np.sqrt(best)
    return out


@njit(cache=True)
def polyline_point_distance(points, closed, px, py):
    """Exact distance from a single point to the nearest polyline segment."""
    n = points.shape[0]
    nseg = n if closed else n - 1
    best = 1e300
    for k in range(nseg):
        k2 = (k + 1) % n
        d2 = _seg_point_dist2(px, py,
                              points[k, 0], points[k, 1],
                              points[k2, 0], points[k2, 1])
        if d2 < best:
            best = d2
    return np.sqrt(best)


@njit(cache=True)
def open_path_distance_trimmed(points, px, py, cap):
    """Distance from a point to an open path, ignoring a cap-length run at
    each endpoint (open-interval distance used by subregion decomposition)."""
    n = points.shape[0]
    best = 1e300
    # arclength positions of the vertices
    total = 0.0
    for k in range(n - 1):
        total += np.hypot(points[k + 1, 0] - points[k, 0],
                          points[k + 1, 1] - points[k, 1])
    lo = cap
    hi = total - cap
    if hi <= lo:
        lo = 0.4 * total
        hi = 0.6 * total
    s = 0.0
    for k in range(n - 1):
        ax, ay = points[k, 0], points[k, 1]
        bx, by = points[k + 1, 0], points[k + 1, 1]
        seg = np.hypot(bx - ax, by - ay)
        s1 = s + seg
        if s1 > lo and s < hi and seg > 0.0:
            # clip segment parameter range to [lo, hi]
            t0 = max(0.0, (lo - s) / seg)
            t1 = min(1.0, (hi - s) / seg)
            cax = ax + t0 * (bx - ax)
            cay = ay + t0 * (by - ay)
            cbx = ax + t1 * (bx - ax)
            cby = ay + t1 * (by - ay)
            d2 = _seg_point_dist2(px, py, cax, cay, cbx, cby)
            if d2 < best:
                best = d2
        s = s1
    return np.sqrt(best)


@njit(cache=True)
def trimmed_distance_field(points, width, height, spacing, cap, cells_x,
                           cells_y):
    """open_path_distance_trimmed evaluated on a list of cells."""
    out = np.empty(cells_x.shape[0], dtype=np.float64)
    for i in range(cells_x.shape[0]):
        out[i] = open_path_distance_trimmed(
            points, cells_x[i] * spacing, cells_y[i] * spacing, cap)
    return out


@njit(cache=True)
def _segments_properly_cross(ax, ay, bx, by, cx, cy, dx, dy):
    """True when open segments (a,b) and (c,d) cross transversally."""
    d1x = bx - ax
    d1y = by - ay
    d2x = dx - cx
    d2y = dy - cy
    denom = d1x * d2y - d1y * d2x
    if denom == 0.0:
        return False
    t = ((cx - ax) * d2y - (cy - ay) * d2x) / denom
    u = ((cx - ax) * d1y - (cy - ay) * d1x) / denom
    eps = 1e-12
    return eps < t < 1.0 - eps and eps < u < 1.0 - eps


@njit(cache=True)
def count_self_intersections(points, closed):
    """Number of transversal crossings between non-adjacent segments."""
    n = points.shape[0]
    nseg = n if closed else n - 1
    count = 0
    for i in range(nseg):
        i2 = (i + 1) % n
        for j in range(i + 2, nseg):
            if closed and i == 0 and j == nseg - 1:
                continue  # wrap-around neighbours
            j2 = (j + 1) % n
            if _segments_properly_cross(points[i, 0], points[i, 1],
                                        points[i2, 0], points[i2, 1],
                                        points[j, 0], points[j, 1],
                                        points[j2, 0], points[j2, 1]):
                count += 1
    return count


@njit(cache=True)
def list_self_intersections(points, closed, max_report):
    """Indices (i, j) of transversally crossing non-adjacent segments."""
    n = points.shape[0]
    nseg = n if closed else n - 1
    out = np.empty((max_report, 2), dtype=np.int64)
    count = 0
    for i in range(nseg):
        i2 = (i + 1) % n
        for j in range(i + 2, nseg):
            if closed and i == 0 and j == nseg - 1:
                continue
            j2 = (j + 1) % n
            if _segments_properly_cross(points[i, 0], points[i, 1],
                                        points[i2, 0], points[i2, 1],
                                        points[j, 0], points[j, 1],
                                        points[j2, 0], points[j2, 1]):
                if count < max_report:
                    out[count, 0] = i
                    out[count, 1] = j
                count += 1
    return out[:min(count, max_report)], count


@njit(cache=True)
def _seg_seg_dist2(ax, ay, bx, by, cx, cy, dx, dy):
    if _segments_properly_cross(ax, ay, bx, by, cx, cy, dx, dy):
        return 0.0
    d = _seg_point_dist2(ax, ay, cx, cy, dx, dy)
    d = min(d, _seg_point_dist2(bx, by, cx, cy, dx, dy))
    d = min(d, _seg_point_dist2(cx, cy, ax, ay, bx, by))
    d = min(d, _seg_point_dist2(dx, dy, ax, ay, bx, by))
    return d


@njit(cache=True)
def tangency_length(points, closed, tol, min_gap):
    """Half-sum of lengths of segments lying within tol of a far-in-index
    segment; measures the length of near-coincident contour runs.  Pairs
    closer than min_gap indices are skipped (shared corners are not
    tangencies)."""
    n = points.shape[0]
    nseg = n if closed else n - 1
    tol2 = tol * tol
    total = 0.0
    for i in range(nseg):
        i2 = (i + 1) % n
        near = False
        for j in range(nseg):
            if j == i:
                continue
            gap = abs(i - j)
            if closed:
                gap = min(gap, nseg - gap)
            if gap <= min_gap:
                continue
            j2 = (j + 1) % n
            if _seg_seg_dist2(points[i, 0], points[i, 1],
                              points[i2, 0], points[i2, 1],
                              points[j, 0], points[j, 1],
                              points[j2, 0], points[j2, 1]) < tol2:
                near = True
                break
        if near:
            total += 0.5 * np.hypot(points[i2, 0] - points[i, 0],
                                    points[i2, 1] - points[i, 1])
    return total


@njit(cache=True)
def winding_number_at(points, px, py):
    """Signed winding number of a closed polyline around (px, py),
    accumulated from the per-segment turn angles."""
    n = points.shape[0]
    angle = 0.0
    for k in range(n):
        k2 = (k + 1) % n
        ax = points[k, 0] - px
        ay = points[k, 1] - py
        bx = points[k2, 0] - px
        by = points[k2, 1] - py
        cross = ax * by - ay * bx
        dot = ax * bx + ay * by
        angle += np.arctan2(cross, dot)
    return int(np.round(angle / (2.0 * np.pi)))
