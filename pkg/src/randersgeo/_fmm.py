"""Numba kernels for the Finsler fast-marching solver.

Grid cells are indexed idx = iy * W + ix.  Stencils are stored CSR-style:
``segs[seg_ptr[idx]:seg_ptr[idx+1]]`` holds the boundary segments of the
cell's polygonal neighborhood as integer offset pairs (e1x, e1y, e2x, e2y).
The Hopf-Lax update minimizes linearly-interpolated distance plus metric
cost over each boundary segment; the metric cost of reaching cell x from a
boundary point y is F_x(x - y), hence the norm is evaluated on the negated
offsets.
"""

from __future__ import annotations

import numpy as np
from numba import njit

INF = np.inf
FAR, TRIAL, ACCEPTED = 0, 1, 2
MAX_REFINE_DEPTH = 8

# base 8-neighbor fan, counter-clockwise
_BASE_FAN = np.array(
    [[1, 0], [1, 1], [0, 1], [-1, 1], [-1, 0], [-1, -1], [0, -1], [1, -1]],
    dtype=np.int32)


@njit(cache=True)
def _acute(m11, m12, m22, wx, wy, e1x, e1y, e2x, e2y):
    """Causality predicate for a stencil boundary segment.

    The update evaluates F on directions x - y = -(offset), so acuteness is
    required for the reversed vectors: <dF(-e1), -e2> >= 0 and symmetrically,
    with dF(v) = M v / ||v||_M + omega.
    """
    f1x, f1y = -float(e1x), -float(e1y)
    f2x, f2y = -float(e2x), -float(e2y)
    # dF(f1) . f2
    g1x = m11 * f1x + m12 * f1y
    g1y = m12 * f1x + m22 * f1y
    n1 = np.sqrt(f1x * g1x + f1y * g1y)
    a = (g1x / n1 + wx) * f2x + (g1y / n1 + wy) * f2y
    if a < 0.0:
        return False
    g2x = m11 * f2x + m12 * f2y
    g2y = m12 * f2x + m22 * f2y
    n2 = np.sqrt(f2x * g2x + f2y * g2y)
    b = (g2x / n2 + wx) * f1x + (g2y / n2 + wy) * f1y
    return b >= 0.0


@njit(cache=True)
def _m_angle_ok(m11, m12, m22, e1x, e1y, e2x, e2y, cos_cap):
    """Accuracy criterion: the M-angle spanned by a segment must stay below
    the cap, so stencil density grows with the local anisotropy."""
    g1x = m11 * e1x + m12 * e1y
    g1y = m12 * e1x + m22 * e1y
    g2x = m11 * e2x + m12 * e2y
    g2y = m12 * e2x + m22 * e2y
    dot = e1x * g2x + e1y * g2y
    n1 = np.sqrt(e1x * g1x + e1y * g1y)
    n2 = np.sqrt(e2x * g2x + e2y * g2y)
    return dot >= cos_cap * n1 * n2


@njit(cache=True)
def _refine_cell(m11, m12, m22, wx, wy, out, count_only, min_depth, cos_cap):
    """Stern-Brocot refinement of the 8-fan until every segment passes both
    the acuteness (causality) predicate and the M-angle accuracy criterion
    (depth capped).  Segments are bisected unconditionally up to
    ``min_depth`` levels; one mandatory level (a 16-direction fan) keeps the
    angular interpolation error of the first-order scheme within the
    accuracy budget.  Returns the count."""
    # explicit stack of (e1x, e1y, e2x, e2y, depth)
    stack = np.empty((8 + 4 * (MAX_REFINE_DEPTH + 2) * 8, 5), dtype=np.int64)
    top = 0
    for k in range(8):
        k2 = (k + 1) % 8
        stack[top, 0] = _BASE_FAN[k, 0]
        stack[top, 1] = _BASE_FAN[k, 1]
        stack[top, 2] = _BASE_FAN[k2, 0]
        stack[top, 3] = _BASE_FAN[k2, 1]
        stack[top, 4] = 0
        top += 1
    nseg = 0
    while top > 0:
        top -= 1
        e1x, e1y, e2x, e2y, depth = (stack[top, 0], stack[top, 1],
                                     stack[top, 2], stack[top, 3],
                                     stack[top, 4])
        if depth >= MAX_REFINE_DEPTH or (
                depth >= min_depth
                and _acute(m11, m12, m22, wx, wy, e1x, e1y, e2x, e2y)
                and _m_angle_ok(m11, m12, m22, e1x, e1y, e2x, e2y, cos_cap)):
            if not count_only:
                out[nseg, 0] = e1x
                out[nseg, 1] = e1y
                out[nseg, 2] = e2x
                out[nseg, 3] = e2y
            nseg += 1
        else:
            mx = e1x + e2x
            my = e1y + e2y
            stack[top, 0] = e1x
            stack[top, 1] = e1y
            stack[top, 2] = mx
            stack[top, 3] = my
            stack[top, 4] = depth + 1
            top += 1
            stack[top, 0] = mx
            stack[top, 1] = my
            stack[top, 2] = e2x
            stack[top, 3] = e2y
            stack[top, 4] = depth + 1
            top += 1
    return nseg


@njit(cache=True)
def build_stencils(m11, m12, m22, wx, wy, domain, W, H, min_depth, cos_cap):
    """Build per-cell stencil segments (CSR).  Out-of-domain cells get no
    segments.  Returns (seg_ptr, segs)."""
    ncells = W * H
    counts = np.zeros(ncells, dtype=np.int64)
    scratch = np.empty((4096, 4), dtype=np.int32)
    for idx in range(ncells):
        if domain[idx]:
            counts[idx] = _refine_cell(m11[idx], m12[idx], m22[idx],
                                       wx[idx], wy[idx], scratch, True,
                                       min_depth, cos_cap)
    seg_ptr = np.zeros(ncells + 1, dtype=np.int64)
    for idx in range(ncells):
        seg_ptr[idx + 1] = seg_ptr[idx] + counts[idx]
    segs = np.empty((seg_ptr[ncells], 4), dtype=np.int32)
    for idx in range(ncells):
        if domain[idx]:
            n = _refine_cell(m11[idx], m12[idx], m22[idx],
                             wx[idx], wy[idx], scratch, False, min_depth,
                             cos_cap)
            segs[seg_ptr[idx]:seg_ptr[idx] + n] = scratch[:n]
    return seg_ptr, segs


@njit(cache=True)
def build_reverse_adjacency(seg_ptr, segs, domain, W, H):
    """CSR lists: for every cell z, the cells y whose stencil has z as a
    vertex (deduplicated per y)."""
    ncells = W * H
    counts = np.zeros(ncells, dtype=np.int64)
    # pass 1: count unique vertices per cell, attribute to target cells
    buf = np.empty((4096, 2), dtype=np.int64)
    for y in range(ncells):
        if not domain[y]:
            continue
        yx = y % W
        yy = y // W
        nb = 0
        for s in range(seg_ptr[y], seg_ptr[y + 1]):
            for which in range(2):
                ex = segs[s, 2 * which]
                ey = segs[s, 2 * which + 1]
                dup = False
                for t in range(nb):
                    if buf[t, 0] == ex and buf[t, 1] == ey:
                        dup = True
                        break
                if not dup:
                    buf[nb, 0] = ex
                    buf[nb, 1] = ey
                    nb += 1
                    zx = yx + ex
                    zy = yy + ey
                    if 0 <= zx < W and 0 <= zy < H:
                        counts[zy * W + zx] += 1
    rev_ptr = np.zeros(ncells + 1, dtype=np.int64)
    for idx in range(ncells):
        rev_ptr[idx + 1] = rev_ptr[idx] + counts[idx]
    rev_src = np.empty(rev_ptr[ncells], dtype=np.int64)
    fill = rev_ptr[:-1].copy()
    for y in range(ncells):
        if not domain[y]:
            continue
        yx = y % W
        yy = y // W
        nb = 0
        for s in range(seg_ptr[y], seg_ptr[y + 1]):
            for which in range(2):
                ex = segs[s, 2 * which]
                ey = segs[s, 2 * which + 1]
                dup = False
                for t in range(nb):
                    if buf[t, 0] == ex and buf[t, 1] == ey:
                        dup = True
                        break
                if not dup:
                    buf[nb, 0] = ex
                    buf[nb, 1] = ey
                    nb += 1
                    zx = yx + ex
                    zy = yy + ey
                    if 0 <= zx < W and 0 <= zy < H:
                        z = zy * W + zx
                        rev_src[fill[z]] = y
                        fill[z] += 1
    return rev_ptr, rev_src


@njit(cache=True)
def segment_update(d1, d2, e1x, e1y, e2x, e2y, m11, m12, m22, wx, wy, h):
    """Hopf-Lax update over one boundary segment.

    Minimizes f(t) = (1-t) d1 + t d2 + F(v(t)) with v(t) = -h((1-t)e1 + te2)
    over t in [0, 1]; f is convex.  Returns (value, t_opt).
    """
    if d1 == INF and d2 == INF:
        return INF, 0.0
    ax = -h * e1x
    ay = -h * e1y
    cx = -h * e2x
    cy = -h * e2y
    if d2 == INF:
        val = d1 + np.sqrt(ax * (m11 * ax + m12 * ay)
                           + ay * (m12 * ax + m22 * ay)) + wx * ax + wy * ay
        return val, 0.0
    if d1 == INF:
        val = d2 + np.sqrt(cx * (m11 * cx + m12 * cy)
                           + cy * (m12 * cx + m22 * cy)) + wx * cx + wy * cy
        return val, 1.0
    ux = cx - ax
    uy = cy - ay
    q0 = ax * (m11 * ax + m12 * ay) + ay * (m12 * ax + m22 * ay)
    q1 = ax * (m11 * ux + m12 * uy) + ay * (m12 * ux + m22 * uy)
    q2 = ux * (m11 * ux + m12 * uy) + uy * (m12 * ux + m22 * uy)
    L1 = (d2 - d1) + wx * ux + wy * uy

    def _f(t):
        qt = q0 + 2.0 * q1 * t + q2 * t * t
        if qt < 0.0:
            qt = 0.0
        return (d1 + t * (d2 - d1) + np.sqrt(qt)
                + wx * (ax + t * ux) + wy * (ay + t * uy))

    best_t = 0.0
    best = _f(0.0)
    v1 = _f(1.0)
    if v1 < best:
        best = v1
        best_t = 1.0
    # interior critical points of the convex objective:
    # (q1 + q2 t)^2 = L1^2 q(t)
    A = q2 * (q2 - L1 * L1)
    B = 2.0 * q1 * (q2 - L1 * L1)
    C = q1 * q1 - L1 * L1 * q0
    if A != 0.0:
        disc = B * B - 4.0 * A * C
        if disc >= 0.0:
            sq = np.sqrt(disc)
            for sgn in (-1.0, 1.0):
                t = (-B + sgn * sq) / (2.0 * A)
                if 0.0 < t < 1.0:
                    v = _f(t)
                    if v < best:
                        best = v
                        best_t = t
        else:
            # roundoff near-degenerate case: ternary search fallback
            lo = 0.0
            hi = 1.0
            for _ in range(60):
                t1 = lo + (hi - lo) / 3.0
                t2 = hi - (hi - lo) / 3.0
                if _f(t1) <= _f(t2):
                    hi = t2
                else:
                    lo = t1
                if hi - lo < 1e-10:
                    break
            t = 0.5 * (lo + hi)
            v = _f(t)
            if v < best:
                best = v
                best_t = t
    elif B != 0.0:
        t = -C / B
        if 0.0 < t < 1.0:
            v = _f(t)
            if v < best:
                best = v
                best_t = t
    return best, best_t


@njit(cache=True)
def _heap_push(heap_val, heap_idx, size, val, idx):
    i = size
    heap_val[i] = val
    heap_idx[i] = idx
    while i > 0:
        p = (i - 1) // 2
        if heap_val[p] <= heap_val[i]:
            break
        heap_val[p], heap_val[i] = heap_val[i], heap_val[p]
        heap_idx[p], heap_idx[i] = heap_idx[i], heap_idx[p]
        i = p
    return size + 1


@njit(cache=True)
def _heap_pop(heap_val, heap_idx, size):
    val = heap_val[0]
    idx = heap_idx[0]
    size -= 1
    heap_val[0] = heap_val[size]
    heap_idx[0] = heap_idx[size]
    i = 0
    while True:
        l = 2 * i + 1
        r = l + 1
        s = i
        if l < size and heap_val[l] < heap_val[s]:
            s = l
        if r < size and heap_val[r] < heap_val[s]:
            s = r
        if s == i:
            break
        heap_val[s], heap_val[i] = heap_val[i], heap_val[s]
        heap_idx[s], heap_idx[i] = heap_idx[i], heap_idx[s]
        i = s
    return val, idx, size


@njit(cache=True)
def fmm_run(m11, m12, m22, wx, wy, domain, W, H, h,
            seg_ptr, segs, rev_ptr, rev_src,
            sources, stop_cells, labels_wanted, stop_slack):
    """Single-pass fast marching.

    * ``stop_cells``: indices to accept before early exit (empty = full sweep).
    * ``labels_wanted``: when True, runs the two-source partial scheme;
      sources alternate label 0/1 by order, fronts stop once the meeting
      interface is complete (min trial value > max interface value +
      ``stop_slack``).

    Returns (D, state, parent_seg, parent_t, labels, monotone_ok).
    """
    ncells = W * H
    D = np.full(ncells, INF)
    state = np.zeros(ncells, dtype=np.uint8)
    parent_seg = np.full(ncells, -1, dtype=np.int64)
    parent_t = np.zeros(ncells, dtype=np.float64)
    labels = np.full(ncells, -1, dtype=np.int8)

    cap = 4 * rev_ptr[ncells] + 16 * len(sources) + 64
    heap_val = np.empty(cap, dtype=np.float64)
    heap_idx = np.empty(cap, dtype=np.int64)
    size = 0
    for si in range(len(sources)):
        s = sources[si]
        D[s] = 0.0
        state[s] = TRIAL
        if labels_wanted:
            labels[s] = si % 2
        size = _heap_push(heap_val, heap_idx, size, 0.0, s)

    nstop = len(stop_cells)
    remaining = 0
    for i in range(nstop):
        remaining += 1

    last_accepted = -INF
    monotone_ok = True
    max_interface = -1.0

    while size > 0:
        val, z, size = _heap_pop(heap_val, heap_idx, size)
        if state[z] == ACCEPTED:
            continue
        if val > D[z] + 1e-12:
            continue  # stale entry
        state[z] = ACCEPTED
        if val < last_accepted - 1e-9 * (1.0 + abs(val)):
            monotone_ok = False
        if val > last_accepted:
            last_accepted = val

        if labels_wanted:
            # detect meeting interface on 4-neighbors
            zx = z % W
            zy = z // W
            for k in range(4):
                nx = zx + (1 if k == 0 else -1 if k == 1 else 0)
                ny = zy + (1 if k == 2 else -1 if k == 3 else 0)
                if 0 <= nx < W and 0 <= ny < H:
                    nb = ny * W + nx
                    if state[nb] == ACCEPTED and labels[nb] >= 0 \
                            and labels[nb] != labels[z]:
                        if D[z] > max_interface:
                            max_interface = D[z]
            if max_interface >= 0.0 and val > max_interface + stop_slack:
                break

        if nstop > 0:
            for i in range(nstop):
                if stop_cells[i] == z:
                    remaining -= 1
            if remaining == 0:
                break

        for r in range(rev_ptr[z], rev_ptr[z + 1]):
            y = rev_src[r]
            if state[y] == ACCEPTED or not domain[y]:
                continue
            yx = y % W
            yy = y // W
            ex_t = (z % W) - yx
            ey_t = (z // W) - yy
            best = D[y]
            best_seg = parent_seg[y]
            best_t = parent_t[y]
            best_label = labels[y]
            for s in range(seg_ptr[y], seg_ptr[y + 1]):
                e1x, e1y, e2x, e2y = segs[s, 0], segs[s, 1], segs[s, 2], segs[s, 3]
                if not ((e1x == ex_t and e1y == ey_t)
                        or (e2x == ex_t and e2y == ey_t)):
                    continue
                d1 = INF
                d2 = INF
                l1 = -1
                l2 = -1
                v1x = yx + e1x
                v1y = yy + e1y
                if 0 <= v1x < W and 0 <= v1y < H:
                    v1 = v1y * W + v1x
                    if state[v1] == ACCEPTED and domain[v1]:
                        d1 = D[v1]
                        l1 = labels[v1]
                v2x = yx + e2x
                v2y = yy + e2y
                if 0 <= v2x < W and 0 <= v2y < H:
                    v2 = v2y * W + v2x
                    if state[v2] == ACCEPTED and domain[v2]:
                        d2 = D[v2]
                        l2 = labels[v2]
                v, t = segment_update(d1, d2, e1x, e1y, e2x, e2y,
                                      m11[y], m12[y], m22[y],
                                      wx[y], wy[y], h)
                if v < best:
                    best = v
                    best_seg = s
                    best_t = t
                    best_label = l1 if (d1 <= d2 or l2 < 0) else l2
            if best < D[y] * (1.0 - 1e-15) or (D[y] == INF and best < INF):
                D[y] = best
                parent_seg[y] = best_seg
                parent_t[y] = best_t
                labels[y] = best_label
                state[y] = TRIAL
                if size >= cap:
                    # should not happen (capacity bound); fail loudly
                    monotone_ok = False
                    return D, state, parent_seg, parent_t, labels, monotone_ok
                size = _heap_push(heap_val, heap_idx, size, best, y)
    return D, state, parent_seg, parent_t, labels, monotone_ok


@njit(cache=True)
def hopf_lax_at(idx, D, domain, W, H, h, seg_ptr, segs,
                m11, m12, m22, wx, wy):
    """Full Hopf-Lax operator at one cell using the final distance table
    (any finite value counts, regardless of acceptance state)."""
    yx = idx % W
    yy = idx // W
    best = INF
    for s in range(seg_ptr[idx], seg_ptr[idx + 1]):
        e1x, e1y, e2x, e2y = segs[s, 0], segs[s, 1], segs[s, 2], segs[s, 3]
        d1 = INF
        d2 = INF
        v1x, v1y = yx + e1x, yy + e1y
        if 0 <= v1x < W and 0 <= v1y < H:
            v1 = v1y * W + v1x
            if domain[v1]:
                d1 = D[v1]
        v2x, v2y = yx + e2x, yy + e2y
        if 0 <= v2x < W and 0 <= v2y < H:
            v2 = v2y * W + v2x
            if domain[v2]:
                d2 = D[v2]
        v, _ = segment_update(d1, d2, e1x, e1y, e2x, e2y,
                              m11[idx], m12[idx], m22[idx],
                              wx[idx], wy[idx], h)
        if v < best:
            best = v
    return best
