"""Generalized eikonal solver on a grid: causal stencils, fast marching,
geodesic backtracking, walls, and two-source partial propagation.

The solver computes the geodesic distance map of a Randers metric field by
a single-pass semi-Lagrangian scheme.  Each cell carries a polygonal
stencil refined until every boundary segment satisfies the acuteness
(causality) predicate of the local norm; the per-cell update linearly
interpolates the distance table along stencil boundary segments and adds
the metric cost of the connecting step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _fmm
from .errors import BacktrackError, DomainError, UnreachableError
from .grid import BinaryMask, Grid2D, Polyline, ScalarField, TensorField2, VectorField2
from .randers import RandersNorm

FAR, TRIAL, ACCEPTED = _fmm.FAR, _fmm.TRIAL, _fmm.ACCEPTED


@dataclass
class MetricField:
    """Per-cell Randers norm (tensor + drift) over a grid domain.

    Cells outside ``domain`` carry infinite cost (the front never enters)."""

    grid: Grid2D
    tensor: TensorField2
    omega: VectorField2
    domain: BinaryMask

    @classmethod
    def isotropic(cls, grid, cost=1.0, domain=None):
        """F(x, v) = c(x) ||v||, i.e. M = c^2 Id, omega = 0."""
        c = np.broadcast_to(np.asarray(cost, dtype=np.float64), grid.shape)
        c2 = c * c
        tensor = TensorField2(grid, c2.copy(), np.zeros(grid.shape), c2.copy())
        return cls(grid, tensor, VectorField2.zeros(grid),
                   domain or BinaryMask(grid, np.ones(grid.shape, dtype=bool)))

    @classmethod
    def riemannian(cls, grid, tensor, domain=None):
        return cls(grid, tensor, VectorField2.zeros(grid),
                   domain or BinaryMask(grid, np.ones(grid.shape, dtype=bool)))

    @classmethod
    def constant(cls, grid, M, omega, domain=None):
        M = np.asarray(M, dtype=np.float64)
        ones = np.ones(grid.shape)
        tensor = TensorField2(grid, M[0, 0] * ones, M[0, 1] * ones,
                              M[1, 1] * ones)
        vec = np.empty(grid.shape + (2,))
        vec[:, :, 0] = omega[0]
        vec[:, :, 1] = omega[1]
        return cls(grid, tensor, VectorField2(grid, vec),
                   domain or BinaryMask(grid, np.ones(grid.shape, dtype=bool)))

    def norm_at(self, ix, iy):
        return RandersNorm(self.tensor.matrix_at(ix, iy),
                           self.omega.vectors[iy, ix])

    def compatibility_margins(self):
        """1 - <omega, M^-1 omega> per cell (NaN outside the domain)."""
        t = self.tensor
        det = t.m11 * t.m22 - t.m12 * t.m12
        v = self.omega.vectors
        quad = (t.m22 * v[:, :, 0] ** 2 - 2 * t.m12 * v[:, :, 0] * v[:, :, 1]
                + t.m11 * v[:, :, 1] ** 2) / det
        margins = 1.0 - quad
        margins[~self.domain.bits] = np.nan
        return margins

    def validate(self):
        from .errors import InvalidMetricError

        if not self.tensor.is_spd():
            raise InvalidMetricError("tensor field is not SPD everywhere")
        margins = self.compatibility_margins()
        inside = margins[self.domain.bits]
        if inside.size and np.nanmin(inside) <= 0:
            iy, ix = np.unravel_index(np.nanargmin(margins), margins.shape)
            raise InvalidMetricError(
                f"compatibility violated at cell ({ix}, {iy}): "
                f"margin {margins[iy, ix]:.3e}")

    def rho_max_bound(self):
        """Upper bound on the per-cell maximum norm ratio rho_max."""
        t = self.tensor
        lam_max = 0.5 * (t.m11 + t.m22) + np.sqrt(
            0.25 * (t.m11 - t.m22) ** 2 + t.m12 ** 2)
        wn = np.hypot(self.omega.vectors[:, :, 0], self.omega.vectors[:, :, 1])
        bound = np.sqrt(lam_max) + wn
        return float(np.max(bound[self.domain.bits]))

    def dual_fields(self):
        """Dual-norm coefficient planes (a11, a12, a22, bx, by)."""
        t = self.tensor
        det = t.m11 * t.m22 - t.m12 * t.m12
        i11 = t.m22 / det
        i12 = -t.m12 / det
        i22 = t.m11 / det
        ox = self.omega.vectors[:, :, 0]
        oy = self.omega.vectors[:, :, 1]
        wx = i11 * ox + i12 * oy
        wy = i12 * ox + i22 * oy
        delta = 1.0 - (ox * wx + oy * wy)
        delta = np.where(delta > 1e-12, delta, np.nan)
        a11 = wx * wx / delta ** 2 + i11 / delta
        a12 = wx * wy / delta ** 2 + i12 / delta
        a22 = wy * wy / delta ** 2 + i22 / delta
        return a11, a12, a22, -wx / delta, -wy / delta

    def _flat(self):
        t = self.tensor
        v = self.omega.vectors
        return (np.ascontiguousarray(t.m11).ravel(),
                np.ascontiguousarray(t.m12).ravel(),
                np.ascontiguousarray(t.m22).ravel(),
                np.ascontiguousarray(v[:, :, 0]).ravel(),
                np.ascontiguousarray(v[:, :, 1]).ravel())


@dataclass
class Stencils:
    grid: Grid2D
    seg_ptr: np.ndarray
    segs: np.ndarray
    rev_ptr: np.ndarray
    rev_src: np.ndarray

    def segments_of(self, ix, iy):
        idx = iy * self.grid.width + ix
        return self.segs[self.seg_ptr[idx]:self.seg_ptr[idx + 1]]

    def vertices_of(self, ix, iy):
        segs = self.segments_of(ix, iy)
        return np.unique(np.vstack([segs[:, :2], segs[:, 2:]]), axis=0)


def build_stencils(metric, min_depth=1, max_angle_deg=30.0):
    """Causal stencil fan for every in-domain cell of the metric field.

    ``min_depth`` levels of unconditional bisection are applied before the
    acuteness-driven refinement; the default single level (16 directions)
    keeps the first-order angular error within the accuracy budget."""
    g = metric.grid
    m11, m12, m22, wx, wy = metric._flat()
    domain = np.ascontiguousarray(metric.domain.bits.astype(np.uint8)).ravel()
    cos_cap = np.cos(np.deg2rad(max_angle_deg))
    seg_ptr, segs = _fmm.build_stencils(m11, m12, m22, wx, wy, domain,
                                        g.width, g.height, min_depth, cos_cap)
    rev_ptr, rev_src = _fmm.build_reverse_adjacency(seg_ptr, segs, domain,
                                                    g.width, g.height)
    return Stencils(g, seg_ptr, segs, rev_ptr, rev_src)


def stencil_is_acute(metric, stencils=None):
    """Check the acuteness predicate on every stored segment (diagnostic)."""
    st = stencils or build_stencils(metric)
    m11, m12, m22, wx, wy = metric._flat()
    g = metric.grid
    doms = metric.domain.bits.ravel()
    for idx in range(g.width * g.height):
        if not doms[idx]:
            continue
        for s in range(st.seg_ptr[idx], st.seg_ptr[idx + 1]):
            e = st.segs[s]
            if not _fmm._acute(m11[idx], m12[idx], m22[idx], wx[idx], wy[idx],
                               e[0], e[1], e[2], e[3]):
                return False
    return True


@dataclass
class DistanceMap:
    distances: ScalarField
    state: np.ndarray        # (h, w) uint8 in {FAR, TRIAL, ACCEPTED}
    parent_seg: np.ndarray   # (h, w) int64 index into stencils.segs
    parent_t: np.ndarray     # (h, w) float64 barycentric coordinate
    stencils: Stencils
    metric: MetricField
    sources: list
    monotone: bool = True
    labels: np.ndarray | None = None

    @property
    def grid(self):
        return self.distances.grid

    def accepted(self):
        return self.state == ACCEPTED


def _cells_to_indices(cells, grid):
    idx = []
    for c in cells:
        ix, iy = int(c[0]), int(c[1])
        if not (0 <= ix < grid.width and 0 <= iy < grid.height):
            raise DomainError(f"cell {(ix, iy)} outside grid")
        idx.append(iy * grid.width + ix)
    return np.asarray(idx, dtype=np.int64)


def fmm_solve(metric, sources, stop_at=None, wall=None, stencils=None,
              _two_source=False):
    """Fast-marching solve from a source cell set.

    ``stop_at``: optional cell set; propagation halts once all are accepted.
    ``wall``: optional blocked-cell mask (or object with ``blocked_cells``);
    walled cells are never accepted and block interpolation across them.
    """
    g = metric.grid
    domain_bits = metric.domain.bits.copy()
    if wall is not None:
        blocked = getattr(wall, "blocked_cells", wall)
        if isinstance(blocked, BinaryMask):
            blocked = blocked.bits
        domain_bits &= ~np.asarray(blocked, dtype=bool)

    src_idx = _cells_to_indices(sources, g)
    if src_idx.size == 0:
        raise DomainError("source set is empty")
    flat_domain = domain_bits.ravel()
    for i in src_idx:
        if not flat_domain[i]:
            raise DomainError("source cell outside domain (or on wall)")

    work = metric if not np.any(domain_bits != metric.domain.bits) else \
        MetricField(g, metric.tensor, metric.omega, BinaryMask(g, domain_bits))
    if stencils is None or wall is not None:
        st = build_stencils(work)
    else:
        st = stencils

    m11, m12, m22, wx, wy = metric._flat()
    dom8 = np.ascontiguousarray(domain_bits.astype(np.uint8)).ravel()
    stop_idx = (_cells_to_indices(stop_at, g) if stop_at else
                np.empty(0, dtype=np.int64))
    slack = 2.0 * metric.rho_max_bound() * g.spacing if _two_source else 0.0

    D, state, pseg, pt, labels, monotone = _fmm.fmm_run(
        m11, m12, m22, wx, wy, dom8, g.width, g.height, g.spacing,
        st.seg_ptr, st.segs, st.rev_ptr, st.rev_src,
        src_idx, stop_idx, _two_source, slack)

    shape = g.shape
    dmap = DistanceMap(
        distances=ScalarField(g, D.reshape(shape)),
        state=state.reshape(shape),
        parent_seg=pseg.reshape(shape),
        parent_t=pt.reshape(shape),
        stencils=st,
        metric=metric,
        sources=[(int(i % g.width), int(i // g.width)) for i in src_idx],
        monotone=bool(monotone),
        labels=labels.reshape(shape) if _two_source else None,
    )
    if stop_at:
        for i in stop_idx:
            if state[i] != ACCEPTED:
                raise UnreachableError(
                    "stop cell unreachable: distance +inf at stop set")
    return dmap


def hopf_lax_update(dmap, cell):
    """Evaluate the Hopf-Lax operator at a cell from the final table."""
    g = dmap.grid
    ix, iy = int(cell[0]), int(cell[1])
    m11, m12, m22, wx, wy = dmap.metric._flat()
    dom8 = np.ascontiguousarray(
        dmap.metric.domain.bits.astype(np.uint8)).ravel()
    return float(_fmm.hopf_lax_at(
        iy * g.width + ix, dmap.distances.values.ravel(), dom8,
        g.width, g.height, g.spacing, dmap.stencils.seg_ptr,
        dmap.stencils.segs, m11, m12, m22, wx, wy))


def fixed_point_residual(dmap, skip_sources=True):
    """max |D(x) - Lambda D(x)| over accepted non-source cells."""
    g = dmap.grid
    src = set(dmap.sources)
    res = 0.0
    acc = np.argwhere(dmap.accepted())
    for iy, ix in acc:
        if skip_sources and (ix, iy) in src:
            continue
        lam = hopf_lax_update(dmap, (ix, iy))
        d = dmap.distances.values[iy, ix]
        if np.isfinite(lam) or np.isfinite(d):
            res = max(res, abs(d - lam))
    return res


class _FlowInterpolator:
    """Bilinear interpolation of the geodesic flow V = A dD/||dD||_A + b
    and of D itself, restricted to valid (finite, in-domain) cells."""

    def __init__(self, dmap):
        g = dmap.grid
        D = dmap.distances.values
        valid = np.isfinite(D) & dmap.metric.domain.bits
        h = g.spacing
        gx = np.full(g.shape, np.nan)
        gy = np.full(g.shape, np.nan)
        # masked centered/one-sided differences
        for axis, target in ((1, gx), (0, gy)):
            fwd = np.full(g.shape, np.nan)
            bwd = np.full(g.shape, np.nan)
            dplus = np.roll(D, -1, axis=axis)
            vplus = np.roll(valid, -1, axis=axis)
            dminus = np.roll(D, 1, axis=axis)
            vminus = np.roll(valid, 1, axis=axis)
            if axis == 1:
                vplus[:, -1] = False
                vminus[:, 0] = False
            else:
                vplus[-1, :] = False
                vminus[0, :] = False
            okf = valid & vplus
            okb = valid & vminus
            fwd[okf] = (dplus[okf] - D[okf]) / h
            bwd[okb] = (D[okb] - dminus[okb]) / h
            both = okf & okb
            target[both] = 0.5 * (fwd[both] + bwd[both])
            onlyf = okf & ~okb
            target[onlyf] = fwd[onlyf]
            onlyb = okb & ~okf
            target[onlyb] = bwd[onlyb]
        a11, a12, a22, bx, by = dmap.metric.dual_fields()
        vx = a11 * gx + a12 * gy
        vy = a12 * gx + a22 * gy
        norm = np.sqrt(np.maximum(gx * vx + gy * vy, 0.0))
        with np.errstate(invalid="ignore"):
            vx = np.where(norm > 0, vx / norm + bx, np.nan)
            vy = np.where(norm > 0, vy / norm + by, np.nan)
        self.grid = g
        self.D = D
        self.valid = valid & np.isfinite(vx) & np.isfinite(vy)
        self.vx = vx
        self.vy = vy

    def _corners(self, p):
        g = self.grid
        fx = p[0] / g.spacing
        fy = p[1] / g.spacing
        ix = int(np.floor(fx))
        iy = int(np.floor(fy))
        ix = min(max(ix, 0), g.width - 2)
        iy = min(max(iy, 0), g.height - 2)
        tx = min(max(fx - ix, 0.0), 1.0)
        ty = min(max(fy - iy, 0.0), 1.0)
        w = np.array([(1 - tx) * (1 - ty), tx * (1 - ty),
                      (1 - tx) * ty, tx * ty])
        cells = [(ix, iy), (ix + 1, iy), (ix, iy + 1), (ix + 1, iy + 1)]
        return cells, w

    def _interp(self, plane, p):
        cells, w = self._corners(p)
        tot = 0.0
        acc = 0.0
        for (cx, cy), wk in zip(cells, w):
            if self.valid[cy, cx] and wk > 0:
                acc += wk * plane[cy, cx]
                tot += wk
        if tot <= 0:
            return np.nan
        return acc / tot

    def flow(self, p):
        return np.array([self._interp(self.vx, p), self._interp(self.vy, p)])

    def dist(self, p):
        return self._interp(self.D, p)


def backtrack(dmap, target, step_frac=0.25, snap_cells=2.0, stall_limit=20):
    """Open geodesic from target back to a source by descending the
    distance map along the dual-metric flow (explicit midpoint scheme)."""
    g = dmap.grid
    target = np.asarray(target, dtype=np.float64)
    tc = g.nearest_cell(target)
    if dmap.state[tc[1], tc[0]] != ACCEPTED:
        raise BacktrackError("target not accepted by the front")
    interp = _FlowInterpolator(dmap)
    hs = step_frac * g.spacing
    sources = np.array([[sx * g.spacing, sy * g.spacing]
                        for sx, sy in dmap.sources])
    snap = snap_cells * g.spacing

    pts = [target.copy()]
    x = target.copy()
    best = interp.dist(x)
    if not np.isfinite(best):
        best = dmap.distances.values[tc[1], tc[0]]
    stall = 0
    max_steps = int(80 * (g.width + g.height) / step_frac)
    for _ in range(max_steps):
        gap = np.hypot(*(sources - x).T).min()
        if gap <= snap:
            k = int(np.argmin(np.hypot(*(sources - x).T)))
            pts.append(sources[k].copy())
            return Polyline(np.asarray(pts), False)
        stepped = False
        v1 = interp.flow(x)
        if np.all(np.isfinite(v1)) and np.hypot(*v1) > 1e-12:
            v1 = v1 / np.hypot(*v1)
            xm = x - 0.5 * hs * v1
            vm = interp.flow(xm)
            v = vm if np.all(np.isfinite(vm)) and np.hypot(*vm) > 1e-12 \
                else v1
            v = v / np.hypot(*v)
            xn = x - hs * v
            xn[0] = min(max(xn[0], 0.0), (g.width - 1) * g.spacing)
            xn[1] = min(max(xn[1], 0.0), (g.height - 1) * g.spacing)
            dn = interp.dist(xn)
            if np.isfinite(dn) and dn < best - 1e-12:
                best = dn
                stall = 0
                pts.append(xn.copy())
                x = xn
                stepped = True
        if not stepped:
            # recovery: follow the solver's parent linkage (descends by
            # construction), else hop to any smaller-valued nearby cell
            hop = _parent_point(dmap, x)
            hop_val = interp.dist(hop) if hop is not None else np.inf
            if not (np.isfinite(hop_val) and hop_val < best - 1e-12):
                hop = _descend_cell(dmap, x, best)
                if hop is not None:
                    cx2, cy2 = g.nearest_cell(hop)
                    hop_val = dmap.distances.values[cy2, cx2]
            if hop is None:
                stall = stall_limit + 1
            else:
                x = hop
                best = float(hop_val)
                pts.append(x.copy())
                stall = 0  # the hop strictly decreased the distance
            if stall > stall_limit:
                raise BacktrackError(
                    f"no descent over {stall_limit} steps (D={best:.6g})")
    raise BacktrackError("backtracking exceeded the step budget")


def _parent_point(dmap, x):
    """Optimizer record of the nearest cell: the boundary point of the
    winning Hopf-Lax segment.  Returns its coordinates, or None when the
    record is missing or refers to cells outside the current validity mask
    (masked distance-map views)."""
    g = dmap.grid
    cx, cy = g.nearest_cell(x)
    seg_idx = int(dmap.parent_seg[cy, cx])
    if seg_idx < 0:
        return None
    e = dmap.stencils.segs[seg_idx]
    t = float(dmap.parent_t[cy, cx])
    for ex, ey, need in ((e[0], e[1], t < 1.0), (e[2], e[3], t > 0.0)):
        if not need:
            continue
        nx, ny = cx + int(ex), cy + int(ey)
        if not (0 <= nx < g.width and 0 <= ny < g.height):
            return None
        if not (dmap.metric.domain.bits[ny, nx]
                and np.isfinite(dmap.distances.values[ny, nx])):
            return None
    px = (cx + (1.0 - t) * e[0] + t * e[2]) * g.spacing
    py = (cy + (1.0 - t) * e[1] + t * e[3]) * g.spacing
    return np.array([px, py])


def _descend_cell(dmap, x, current):
    """Center of a strictly smaller-distance cell near x, or None."""
    g = dmap.grid
    cx, cy = g.nearest_cell(x)
    best = None
    bestd = current - 1e-12
    for dy in range(-4, 5):
        for dx in range(-4, 5):
            nx, ny = cx + dx, cy + dy
            if 0 <= nx < g.width and 0 <= ny < g.height:
                d = dmap.distances.values[ny, nx]
                if np.isfinite(d) and d < bestd:
                    bestd = d
                    best = (nx, ny)
    if best is None:
        return None
    return np.array([best[0] * g.spacing, best[1] * g.spacing])


def path_length(metric, polyline):
    """Randers length of a polyline under the metric field (midpoint rule)."""
    pts = polyline.points
    n = pts.shape[0]
    nseg = n if polyline.closed else n - 1
    g = metric.grid
    total = 0.0
    for k in range(nseg):
        a = pts[k]
        b = pts[(k + 1) % n]
        mid = 0.5 * (a + b)
        ix, iy = g.nearest_cell(mid)
        d = b - a
        t = metric.tensor
        m11, m12, m22 = t.m11[iy, ix], t.m12[iy, ix], t.m22[iy, ix]
        w = metric.omega.vectors[iy, ix]
        total += (np.sqrt(d[0] * (m11 * d[0] + m12 * d[1])
                          + d[1] * (m12 * d[0] + m22 * d[1]))
                  + w[0] * d[0] + w[1] * d[1])
    return float(total)


def solve_with_wall(metric, anchor, wall, tube):
    """Closed geodesic through ``anchor`` circling the ring-shaped ``tube``.

    The wall through the anchor cuts the ring; the front starts at the grid
    cell adjacent to the anchor on the + side of the wall and is stopped at
    the adjacent cell on the - side; backtracking and closing through the
    anchor yields the minimizing loop.

    The blocked band is dilated to the largest stencil offset of the local
    metric: refined stencils interpolate across cells, so a one-cell wall
    would not actually block the front.
    """
    g = metric.grid
    domain = BinaryMask(g, tube.bits & metric.domain.bits)
    work = MetricField(g, metric.tensor, metric.omega, domain)
    anchor = np.asarray(anchor, dtype=np.float64)
    thick = _thickened_wall(work, wall)
    plus, minus = _wall_side_cells(g, domain.bits, thick, anchor)
    dmap = fmm_solve(work, [plus], stop_at=[minus], wall=thick)
    path = backtrack(dmap, np.array([minus[0] * g.spacing,
                                     minus[1] * g.spacing]))
    # path runs target(minus) -> source(plus); orient plus -> minus and
    # close through the anchor point itself
    pts = path.points[::-1]
    closed = np.vstack([anchor[None, :], pts])
    return Polyline(closed, True)


class _ThickWall:
    def __init__(self, direction, blocked_cells):
        self.direction = direction
        self.blocked_cells = blocked_cells


def _thickened_wall(metric, wall):
    """Dilate the wall band to the largest stencil offset of the metric so
    no boundary segment can interpolate across it."""
    from . import _geom

    st = build_stencils(metric)
    if st.segs.shape[0]:
        max_off = float(np.abs(st.segs).max())
    else:
        max_off = 1.0
    radius = (max_off + 0.6) * metric.grid.spacing
    seg = np.asarray(wall.segment, dtype=np.float64)
    dist = _geom.polyline_distance_field(
        seg, False, metric.grid.width, metric.grid.height,
        metric.grid.spacing)
    blocked = (dist <= radius) | wall.blocked_cells
    return _ThickWall(wall.direction, blocked)


def _wall_side_cells(grid, domain_bits, wall, anchor):
    """Seed cells adjacent to the anchor on either side of the wall.

    The + seed lies forward along the CCW tangent of the centerline so the
    computed loop traverses the ring counter-clockwise; the drift term of
    the metric is oriented for CCW contours, so a CW traversal would
    minimize the wrong sign of the region term."""
    normal = np.asarray(wall.direction, dtype=np.float64)
    tangent = np.array([normal[1], -normal[0]])  # undo the +90 rotation
    blocked = wall.blocked_cells
    ax, ay = anchor / grid.spacing
    cands_plus = []
    cands_minus = []
    r = 10
    cx, cy = int(round(ax)), int(round(ay))
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            nx, ny = cx + dx, cy + dy
            if not (0 <= nx < grid.width and 0 <= ny < grid.height):
                continue
            if not domain_bits[ny, nx] or blocked[ny, nx]:
                continue
            rel = np.array([nx - ax, ny - ay])
            along = tangent[0] * rel[0] + tangent[1] * rel[1]
            d = np.hypot(*rel)
            if along > 0.3:
                cands_plus.append((d, (nx, ny)))
            elif along < -0.3:
                cands_minus.append((d, (nx, ny)))
    if not cands_plus or not cands_minus:
        raise UnreachableError("no seed cells on both sides of the wall")
    plus = min(cands_plus)[1]
    minus = min(cands_minus)[1]
    return plus, minus


def partial_two_source(metric, p, q):
    """Two-front propagation from p and q with per-cell front labels.

    Returns (dmap, labels, interface) where labels is 0 for the p-front and
    1 for the q-front, and interface marks accepted cells adjacent to an
    accepted cell of the opposite label.
    """
    p = (int(p[0]), int(p[1]))
    q = (int(q[0]), int(q[1]))
    if p == q:
        raise DomainError("the two sources must differ")
    dmap = fmm_solve(metric, [p, q], _two_source=True)
    labels = dmap.labels
    acc = dmap.accepted()
    interface = np.zeros(metric.grid.shape, dtype=bool)
    for axis in (0, 1):
        for shift in (1, -1):
            nb_lab = np.roll(labels, shift, axis=axis)
            nb_acc = np.roll(acc, shift, axis=axis)
            if axis == 0:
                if shift == 1:
                    nb_acc[0, :] = False
                else:
                    nb_acc[-1, :] = False
            else:
                if shift == 1:
                    nb_acc[:, 0] = False
                else:
                    nb_acc[:, -1] = False
            interface |= acc & nb_acc & (nb_lab != labels) & (nb_lab >= 0)
    return dmap, labels, BinaryMask(metric.grid, interface)
