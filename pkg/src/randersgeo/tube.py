"""Tubular search domains around contours: construction, adaptive
(asymmetric) refinement, subregion decomposition for landmark schemes,
walls, and the squared-distance contour divergence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _geom
from .errors import TopologyError, WidthError
from .grid import BinaryMask, ScalarField, euclidean_distance_to_contour

MIN_TUBE_CELLS = 2.0  # widths below ~2 grid cells break the discrete scheme


@dataclass
class TubularDomain:
    mask: BinaryMask
    centerline: Polyline
    width: float
    dist: ScalarField  # the distance field whose sublevel set cut the mask


@dataclass
class Wall:
    anchor_t: float
    anchor: np.ndarray
    direction: np.ndarray  # unit vector along the wall segment
    segment: np.ndarray    # (2, 2) endpoints spanning the tube width
    blocked_cells: np.ndarray  # (h, w) bool


@dataclass
class SubregionDecomposition:
    regions: list  # list[BinaryMask], one per path
    anchors: np.ndarray  # (m, 2) landmark points


def _ring_check(mask_bits):
    """A tube must be one connected component whose complement has a
    nonempty bounded piece (the ring interior)."""
    lab, n = ndimage.label(mask_bits)
    if n != 1:
        raise TopologyError(f"tube mask has {n} components, expected 1")
    comp_lab, nc = ndimage.label(~mask_bits)
    border = np.zeros_like(mask_bits)
    border[0, :] = border[-1, :] = True
    border[:, 0] = border[:, -1] = True
    border_labels = set(np.unique(comp_lab[border & ~mask_bits]))
    bounded = [k for k in range(1, nc + 1) if k not in border_labels]
    if not bounded:
        raise TopologyError("tube is not a ring: bounded complement empty")


def build_tube(contour, width, grid, dist=None, require_ring=True):
    """Symmetric tube {x : d(x, contour) < width} with ring topology.

    ``require_ring=False`` skips the bounded-complement check (used by the
    landmark scheme when a thin contour's interior is narrower than the
    width; the subregion decomposition then confines the search instead)."""
    if width < MIN_TUBE_CELLS * grid.spacing:
        raise WidthError(
            f"tube width {width} below {MIN_TUBE_CELLS} grid cells")
    if not contour.closed:
        raise TopologyError("tube centerline must be a closed contour")
    if dist is None:
        dist = euclidean_distance_to_contour(contour, grid)
    bits = dist.values < width
    if require_ring:
        _ring_check(bits)
    return TubularDomain(BinaryMask(grid, bits), contour, float(width), dist)


def adaptive_tube(td, xi, shape_mask, upsilon=0.2, varrho_frac=0.1):
    """Asymmetric refinement of a tube from the shape-gradient sign pattern.

    Cells where the contour is likely to move (inside the shape with
    xi >= rho, or outside with xi <= -rho) get front speed 1/upsilon;
    indifferent cells (|xi| < rho) speed 1; the rest speed upsilon.  An
    isotropic front from the contour, cut at the tube width, yields a tube
    reaching further on the likely side.
    """
    if not 0 < upsilon <= 1:
        raise ValueError("upsilon must lie in (0, 1]")
    from .eikonal import MetricField, fmm_solve

    grid = td.mask.grid
    xiv = xi.values if isinstance(xi, ScalarField) else np.asarray(xi)
    xi_max = float(np.abs(xiv).max())
    if xi_max == 0.0:
        potential = np.ones(grid.shape)  # no gradient signal: keep symmetric
    else:
        rho = varrho_frac * xi_max
        inside = shape_mask.bits
        likely = (inside & (xiv >= rho)) | (~inside & (xiv <= -rho))
        indifferent = np.abs(xiv) < rho
        potential = np.full(grid.shape, 1.0 / upsilon)
        potential[likely] = upsilon
        potential[indifferent] = 1.0

    metric = MetricField.isotropic(grid, potential, domain=td.mask)
    source_band = td.dist.values <= 0.75 * grid.spacing
    sources = [(int(ix), int(iy)) for iy, ix in np.argwhere(
        source_band & td.mask.bits)]
    dmap = fmm_solve(metric, sources)
    dvals = np.where(source_band, 0.0, dmap.distances.values)
    bits = (dvals < td.width) & td.mask.bits
    try:
        _ring_check(bits)
    except TopologyError:
        # degenerate refinements fall back to the symmetric tube
        return td
    return TubularDomain(BinaryMask(grid, bits), td.centerline, td.width,
                         ScalarField(grid, dvals))


def decompose(td, paths, anchors=None):
    """Assign each tube cell to the nearest open path (ties break toward the
    lowest path index); landmark cells join both adjacent regions."""
    grid = td.mask.grid
    m = len(paths)
    pts_list = [np.asarray(p.points, dtype=np.float64) for p in paths]
    if anchors is None:
        anchors = np.array([p[0] for p in pts_list])
    for k in range(m):
        nxt = pts_list[(k + 1) % m]
        if np.hypot(*(pts_list[k][-1] - nxt[0])) > 2.0 * grid.spacing:
            raise TopologyError(
                f"paths {k} and {(k + 1) % m} do not share an endpoint")
    cells = np.argwhere(td.mask.bits)
    cy = np.ascontiguousarray(cells[:, 0]).astype(np.float64)
    cx = np.ascontiguousarray(cells[:, 1]).astype(np.float64)
    cap = 0.5 * grid.spacing
    dists = np.empty((m, cells.shape[0]))
    for k in range(m):
        dists[k] = _geom.trimmed_distance_field(
            pts_list[k], grid.width, grid.height, grid.spacing, cap, cx, cy)
    owner = np.argmin(dists, axis=0)  # argmin takes the lowest index on ties
    regions = []
    for k in range(m):
        bits = np.zeros(grid.shape, dtype=bool)
        sel = cells[owner == k]
        bits[sel[:, 0], sel[:, 1]] = True
        regions.append(bits)
    # landmarks belong to both adjacent regions
    for k in range(m):
        ix, iy = grid.nearest_cell(anchors[k])
        regions[k][iy, ix] = True
        regions[(k - 1) % m][iy, ix] = True
    return SubregionDecomposition(
        [BinaryMask(grid, b) for b in regions], np.asarray(anchors))


def make_wall(td, t, centerline=None):
    """Wall at curve abscissa t: the normal segment spanning the tube,
    rasterized one cell wide.  ``centerline`` overrides the tube's own
    centerline as the parametrizing curve (used when the tube is frozen
    while the contour keeps evolving)."""
    grid = td.mask.grid
    center = centerline if centerline is not None else td.centerline
    anchor = center.point_at_arclength(t)
    eps = max(0.5 * grid.spacing, 1e-3)
    ahead = center.point_at_arclength(t + eps)
    behind = center.point_at_arclength(t - eps)
    tangent = ahead - behind
    norm = np.hypot(*tangent)
    if norm < 1e-12:
        raise TopologyError("degenerate centerline tangent at the wall")
    tangent /= norm
    normal = np.array([-tangent[1], tangent[0]])

    # extend the wall along the normal until it actually leaves the tube;
    # near concave contour sections the tube reaches beyond the nominal
    # width measured from this anchor, and any gap would let a "closed"
    # geodesic slip around the wall end
    blocked = np.zeros(grid.shape, dtype=bool)
    ends = []
    for sign in (1.0, -1.0):
        s = 0.0
        last_inside = 0.0
        cap = 4.0 * td.width
        while s <= cap:
            p = anchor + sign * s * normal
            ix, iy = grid.nearest_cell(p)
            if td.mask.bits[iy, ix]:
                blocked[iy, ix] = True
                last_inside = s
            elif s > td.width:
                break
            s += 0.25 * grid.spacing
        ends.append(anchor + sign * (last_inside + grid.spacing) * normal)
    seg = np.array([ends[1], ends[0]])
    remaining = td.mask.bits & ~blocked
    _, n = ndimage.label(remaining)
    if n != 1:
        raise TopologyError(
            f"wall slices the tube into {n} components, expected 1")
    return Wall(anchor_t=float(t), anchor=anchor, direction=normal,
                segment=seg, blocked_cells=blocked)


def divergence(contour, ref_contour, tensor):
    """Squared-distance-to-reference weighted Riemannian length of a contour
    (midpoint quadrature); zero exactly when the contours coincide."""
    if not (contour.closed and ref_contour.closed):
        raise ValueError("divergence is defined for closed contours")
    grid = tensor.grid
    pts = contour.points
    n = pts.shape[0]
    total = 0.0
    for k in range(n):
        a = pts[k]
        b = pts[(k + 1) % n]
        mid = 0.5 * (a + b)
        d = ref_contour.distance_to_point(mid)
        ix, iy = grid.nearest_cell(mid)
        dv = b - a
        m11 = tensor.m11[iy, ix]
        m12 = tensor.m12[iy, ix]
        m22 = tensor.m22[iy, ix]
        speed = np.sqrt(dv[0] * (m11 * dv[0] + m12 * dv[1])
                        + dv[1] * (m12 * dv[0] + m22 * dv[1]))
        total += d * d * speed
    return float(total)
