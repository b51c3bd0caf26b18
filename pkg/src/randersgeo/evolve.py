"""Outer segmentation loops.

Two drivers share one iteration body (tube, shape gradient, curl solve,
metric assembly):

* circular evolution: the new contour is a single closed geodesic through a
  moving anchor point, computed in the walled tube;
* landmark evolution: the contour is a concatenation of per-subregion
  geodesics between fixed landmark points.

Also here: the two initial-contour constructions (polygon and simple-closed
variants of the two-front candidate scheme), the contour simplicity
energy, Jaccard scoring, and the random landmark sampling protocol.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _geom
from .eikonal import (
    MetricField,
    backtrack,
    fmm_solve,
    partial_two_source,
    solve_with_wall,
)
from .errors import (
    DomainError,
    EvolutionError,
    GeometryError,
    InitError,
    RandersGeoError,
    UnreachableError,
)
from .features import (
    Balloon,
    Bhattacharyya,
    PiecewiseConstant,
    build_tensor_field,
    edge_features,
    hybrid_energy,
    region_energy,
    riemannian_length,
    shape_gradient,
)
from .grid import BinaryMask, Polyline, ScalarField, rasterize_contour
from .tube import (MIN_TUBE_CELLS, adaptive_tube, build_tube, decompose,
                   make_wall)
from .vectorfield import (
    assemble_metric,
    omega_by_convolution,
    omega_by_poisson,
    psi_rescale,
)

SIMPLICITY_CROSSING_WEIGHT = 10.0
SIMPLICITY_TANGENCY_WEIGHT = 1.0
SADDLE_NMS_RADIUS = 5.0


@dataclass
class SegmentationConfig:
    model: str = "piecewise_constant"  # piecewise_constant|bhattacharyya|balloon
    balloon_force: int = -1
    bins: int = 32
    kernel_sigma: float = 1.0
    edge_sigma: float = 2.0
    alpha: float = 1.0            # region-term weight of the hybrid energy
    alpha_tilde: float = 6.0      # drift strength of the variant metric
    beta_data: float = 2.0
    beta_aniso: float = 1.0
    tube_width: float = 15.0
    upsilon: float = 0.2
    varrho_frac: float = 0.1
    use_adaptive_tube: bool = True
    curl_method: str = "poisson"  # poisson|convolution
    divergence_weight: float = 0.0  # lambda; > 0 switches to the full metric
    freeze_tube: bool = False
    max_iters: int = 100
    stop_area_frac: float = 0.001
    init_method: str = "polygon"  # polygon|simple_closed|user_contour
    alpha_euclid: float = 0.05
    alpha_edge: float = 1.0
    eps_comb: float = 0.05
    beta_comb: float = 0.0        # 0 = auto (2 / max g)
    saddles_per_pair: int = 3
    resample_step: float = 1.0
    seed: int = 0

    def validate(self):
        if self.model not in ("piecewise_constant", "bhattacharyya",
                              "balloon"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.curl_method not in ("poisson", "convolution"):
            raise ValueError(f"unknown curl method {self.curl_method!r}")
        if self.init_method not in ("polygon", "simple_closed",
                                    "user_contour"):
            raise ValueError(f"unknown init method {self.init_method!r}")
        if not 0 < self.upsilon <= 1:
            raise ValueError("upsilon must lie in (0, 1]")
        if self.tube_width <= 0 or self.alpha_tilde <= 0:
            raise ValueError("tube_width and alpha_tilde must be positive")
        if self.alpha < 0 or self.beta_data < 0 or self.beta_aniso < 0:
            raise ValueError("weights must be non-negative")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        bad = set(d) - known
        if bad:
            raise ValueError(f"unknown config keys: {sorted(bad)}")
        return cls(**d).validate()

    def make_model(self):
        if self.model == "piecewise_constant":
            return PiecewiseConstant()
        if self.model == "bhattacharyya":
            return Bhattacharyya(bins=self.bins, sigma=self.kernel_sigma)
        return Balloon(f=self.balloon_force)


@dataclass
class LandmarkSet:
    points: np.ndarray  # (m, 2) ordered counter-clockwise

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if pts.shape[0] < 1:
            raise ValueError("need at least one landmark")
        for i in range(pts.shape[0]):
            for j in range(i + 1, pts.shape[0]):
                if np.hypot(*(pts[i] - pts[j])) < 2.0:
                    raise ValueError(
                        f"landmarks {i} and {j} closer than 2 px")
        self.points = pts

    def __len__(self):
        return self.points.shape[0]


@dataclass
class EvolutionState:
    iteration: int
    contour: Polyline
    mask: BinaryMask
    energy: float
    source_anchor: np.ndarray | None
    history: list = field(default_factory=list)
    converged: bool = False
    contours: list = field(default_factory=list)


def simplicity_energy(contour, tol=1.0, min_gap=3):
    """Crossing count plus near-coincident run length, weighted."""
    pts = contour.points
    if pts.shape[0] < 3:
        raise GeometryError("simplicity energy needs >= 3 points")
    crossings = _geom.count_self_intersections(pts, contour.closed)
    tangency = _geom.tangency_length(pts, contour.closed, tol, min_gap)
    return (SIMPLICITY_CROSSING_WEIGHT * crossings
            + SIMPLICITY_TANGENCY_WEIGHT * tangency)


def jaccard(a, b):
    """Intersection over union of two masks (1.0 when both are empty)."""
    if a.grid.shape != b.grid.shape:
        raise ValueError("masks live on different grids")
    inter = int((a.bits & b.bits).sum())
    union = int((a.bits | b.bits).sum())
    if union == 0:
        return 1.0
    return inter / union


def sample_landmarks(gt_contour, m, seed):
    """m random points on a contour, counter-clockwise, with every
    consecutive arc at least 0.3 L / m long; deterministic per seed."""
    if m < 2:
        raise ValueError("need at least 2 landmarks to sample")
    contour = gt_contour.oriented_ccw()
    L = contour.length()
    min_gap = 0.3 * L / m
    rng = np.random.default_rng(seed)
    for _ in range(10000):
        t = np.sort(rng.uniform(0.0, L, size=m))
        gaps = np.diff(np.concatenate([t, [t[0] + L]]))
        if np.all(gaps >= min_gap):
            pts = np.array([contour.point_at_arclength(s) for s in t])
            try:
                return LandmarkSet(pts)
            except ValueError:
                continue
    raise RandersGeoError("landmark sampling failed to satisfy spacing")


# -- iteration machinery ------------------------------------------------------


class _Pipeline:
    """Per-image precomputations and the shared per-iteration body."""

    def __init__(self, img, cfg, ring_required=True):
        cfg.validate()
        self.img = img
        self.cfg = cfg
        self.grid = img.grid
        self.edge = edge_features(img, cfg.edge_sigma)
        self.tensor = build_tensor_field(self.edge, cfg.beta_data,
                                         cfg.beta_aniso)
        self.model = cfg.make_model()
        self.frozen_tube = None
        self.ring_required = ring_required
        self.last_fields = {}

    def _tube(self, contour, dist):
        """Symmetric tube at the configured width; thin contours fall back
        to smaller widths, then (landmark mode only) to a ring-free tube."""
        from .errors import TopologyError

        width = self.cfg.tube_width
        while True:
            try:
                return build_tube(contour, width, self.grid, dist=dist)
            except TopologyError:
                if width > 2 * MIN_TUBE_CELLS * self.grid.spacing:
                    width = max(width / 2,
                                MIN_TUBE_CELLS * self.grid.spacing)
                    continue
                if self.ring_required:
                    raise
                return build_tube(contour, self.cfg.tube_width, self.grid,
                                  dist=dist, require_ring=False)

    def fit_model(self, mask):
        if isinstance(self.model, PiecewiseConstant):
            return self.model.fit(self.img, mask)
        return self.model

    def energy(self, model, mask, contour):
        return hybrid_energy(model, self.img, mask, contour, self.tensor,
                             self.cfg.alpha)

    def metric_for(self, contour, mask, dist):
        """Tube, shape gradient, curl solve and metric assembly for the
        current shape; returns (metric, search_tube, symmetric_tube)."""
        cfg = self.cfg
        model = self.fit_model(mask)
        xi = shape_gradient(model, self.img, mask)

        if cfg.freeze_tube and self.frozen_tube is not None:
            td = self.frozen_tube
        else:
            td = self._tube(contour, dist)
            if self.frozen_tube is None:
                self.frozen_tube = td

        search = td
        if cfg.use_adaptive_tube and not cfg.freeze_tube:
            search = adaptive_tube(td, xi, mask, cfg.upsilon,
                                   cfg.varrho_frac)

        xi_eff = ScalarField(self.grid, cfg.alpha * xi.values)
        if cfg.curl_method == "poisson":
            sol = omega_by_poisson(xi_eff, td.mask,
                                   cut=(td.dist, td.width))
        else:
            from .grid import BinaryMask as _BM

            tube2 = _BM(self.grid, td.dist.values < 2 * td.width)
            sol = omega_by_convolution(xi_eff, tube2)

        if cfg.divergence_weight > 0:
            metric = assemble_metric(self.tensor, sol.omega,
                                     dist_to_boundary=dist,
                                     lam=cfg.divergence_weight,
                                     domain=search.mask)
        else:
            drift = psi_rescale(sol.omega, cfg.alpha_tilde, domain=td.mask)
            metric = assemble_metric(self.tensor, drift, domain=search.mask)
        self.last_fields = {"xi": xi, "omega": sol.omega, "tube": td,
                            "search": search, "curl_residual": sol.residual}
        return metric, search, td


def _excise_micro_loops(points, max_loop_px=12.0, anchors=None,
                        anchor_loop_px=24.0):
    """Remove tiny self-crossing loops (sub-pixel numerical artifacts near
    subregion boundaries); genuine large-scale crossings are left alone.

    Loops grazing an anchor point (adjacent geodesics entering a sharp
    landmark corner) are replaced by the anchor itself, up to a larger
    length cap, which both uncrosses the contour and keeps the pinning."""
    pts = points.copy()
    for _ in range(64):
        pairs, count = _geom.list_self_intersections(pts, True, 64)
        if count == 0:
            return pts
        n = pts.shape[0]
        fixed = False
        for i, j in pairs:
            inner = pts[i + 1:j + 1]
            seg = np.diff(np.vstack([pts[i], inner, pts[(j + 1) % n]]),
                          axis=0)
            inner_len = float(np.hypot(seg[:, 0], seg[:, 1]).sum())
            rep = _loop_replacement(pts[i], pts[(j + 1) % n], inner_len,
                                    max_loop_px, anchors, anchor_loop_px)
            if rep is not None:
                pts = np.vstack([pts[:i + 1], rep[None, :], pts[j + 1:]])
                fixed = True
                break
            # the crossing loop may wrap around index 0: measure the
            # complement arc j+1 .. i and excise that side when short
            comp = np.vstack([pts[j + 1:], pts[:i + 1]])
            seg = np.diff(comp, axis=0)
            comp_len = float(np.hypot(seg[:, 0], seg[:, 1]).sum())
            rep = _loop_replacement(pts[(j + 1) % n], pts[i], comp_len,
                                    max_loop_px, anchors, anchor_loop_px)
            if rep is not None:
                pts = np.vstack([pts[i + 1:j + 1], rep[None, :]])
                fixed = True
                break
        if not fixed:
            return pts
    return pts


def _loop_replacement(a, b, loop_len, max_loop_px, anchors,
                      anchor_loop_px):
    """Vertex replacing an excised loop, or None when the loop is too big."""
    mid = 0.5 * (a + b)
    if anchors is not None and loop_len <= anchor_loop_px:
        d = np.hypot(*(anchors - mid).T)
        k = int(np.argmin(d))
        if d[k] <= 4.0:
            return anchors[k]
    if loop_len <= max_loop_px:
        return mid
    return None


def _prepare_contour(contour, step, anchors=None):
    c = contour.resampled(step).oriented_ccw()
    if not c.is_simple():
        cleaned = _excise_micro_loops(c.points, anchors=anchors)
        c = Polyline(cleaned, True).oriented_ccw()
        if not c.is_simple():
            raise EvolutionError("contour lost simplicity during resampling")
    return c


def _sym_diff_frac(a, b):
    total = a.bits.size
    return float((a.bits ^ b.bits).sum()) / total


class CircularEvolution:
    """Resumable closed-geodesic contour evolution with a moving anchor."""

    def __init__(self, img, s0, cfg):
        self.img = img
        self.cfg = cfg
        self.pipe = _Pipeline(img, cfg)
        contour = _prepare_contour(s0, cfg.resample_step)
        mask = rasterize_contour(contour, img.grid)
        self.state = EvolutionState(
            0, contour, mask,
            self.pipe.energy(self.pipe.fit_model(mask), mask, contour),
            source_anchor=None)
        self.prev_anchor = None

    @property
    def done(self):
        return (self.state.converged
                or self.state.iteration >= self.cfg.max_iters)

    def step(self):
        from .grid import euclidean_distance_to_contour

        cfg = self.cfg
        img = self.img
        pipe = self.pipe
        state = self.state
        n = state.iteration
        contour, mask = state.contour, state.mask
        dist = euclidean_distance_to_contour(contour, img.grid)
        try:
            metric, search, td = pipe.metric_for(contour, mask, dist)
        except RandersGeoError as e:
            raise EvolutionError(f"iteration {n}: {e}",
                                 diagnostics=pipe.last_fields) from e

        anchor_t = _pick_anchor_arclength(contour, self.prev_anchor)
        L = contour.length()
        new_contour = None
        anchor = None
        last_err = None
        for shift in (0.0, 0.125, -0.125, 0.25, -0.25):
            t_try = (anchor_t + shift * L) % L
            anchor = contour.point_at_arclength(t_try)
            try:
                wall = make_wall(td, t_try, centerline=contour)
                new_contour = solve_with_wall(metric, anchor, wall,
                                              search.mask)
                break
            except RandersGeoError as e:
                last_err = e
        if new_contour is None:
            raise EvolutionError(
                f"iteration {n}: geodesic unreachable: {last_err}",
                diagnostics=pipe.last_fields) from last_err
        new_contour = _prepare_contour(new_contour, cfg.resample_step)
        new_mask = rasterize_contour(new_contour, img.grid)
        self.prev_anchor = anchor
        _commit_iteration(self, new_contour, new_mask, anchor=anchor)
        return self.state


class LandmarkEvolution:
    """Resumable piecewise-geodesic evolution between fixed landmarks."""

    def __init__(self, img, landmarks, cfg, initial_contour=None):
        cfg.validate()
        self.img = img
        self.cfg = cfg
        self.pipe = _Pipeline(img, cfg, ring_required=False)
        self.landmarks, self.paths = _initial_paths(self.pipe, landmarks,
                                                    initial_contour)
        contour = _prepare_contour(_concat_paths(self.paths),
                                   cfg.resample_step)
        mask = rasterize_contour(contour, img.grid)
        self.state = EvolutionState(
            0, contour, mask,
            self.pipe.energy(self.pipe.fit_model(mask), mask, contour),
            source_anchor=None)

    @property
    def done(self):
        return (self.state.converged
                or self.state.iteration >= self.cfg.max_iters)

    def step(self):
        from .grid import euclidean_distance_to_contour

        cfg = self.cfg
        img = self.img
        pipe = self.pipe
        state = self.state
        landmarks = self.landmarks
        m = len(landmarks)
        n = state.iteration
        contour_r, mask = state.contour, state.mask

        paths = [p.resampled(cfg.resample_step) for p in self.paths]
        dist = euclidean_distance_to_contour(contour_r, img.grid)
        try:
            metric, search, td = pipe.metric_for(contour_r, mask, dist)
        except RandersGeoError as e:
            raise EvolutionError(f"iteration {n}: {e}",
                                 diagnostics=pipe.last_fields) from e
        dec = decompose(td, paths, anchors=landmarks.points)
        new_paths = []
        for k in range(m):
            region = dec.regions[k].bits & search.mask.bits
            p_k = landmarks.points[k]
            p_next = landmarks.points[(k + 1) % m]
            region = _ensure_anchor_cells(region, img.grid, (p_k, p_next))
            sub = MetricField(img.grid, metric.tensor, metric.omega,
                              BinaryMask(img.grid, region))
            src = img.grid.nearest_cell(p_k)
            dst = img.grid.nearest_cell(p_next)
            try:
                dmap = fmm_solve(sub, [src], stop_at=[dst])
                path = backtrack(dmap, np.array([dst[0] * img.grid.spacing,
                                                 dst[1] * img.grid.spacing]))
            except (UnreachableError, DomainError) as e:
                raise EvolutionError(
                    f"iteration {n}: landmark {(k + 1) % m} unreachable "
                    f"within subregion {k}: {e}",
                    diagnostics=pipe.last_fields) from e
            pts = path.points[::-1].copy()  # orient p_k -> p_{k+1}
            pts = _clip_path_to_anchors(pts, p_k, p_next)
            new_paths.append(Polyline(pts, False))
        self.paths = new_paths
        new_contour = _prepare_contour(_concat_paths(new_paths),
                                       cfg.resample_step,
                                       anchors=landmarks.points)
        new_contour = _repin_landmarks(new_contour, landmarks)
        new_mask = rasterize_contour(new_contour, img.grid)
        _commit_iteration(self, new_contour, new_mask)
        return self.state


def _commit_iteration(driver, new_contour, new_mask, anchor=None):
    """Energy bookkeeping, history row and stopping check shared by both
    evolution drivers."""
    cfg = driver.cfg
    pipe = driver.pipe
    state = driver.state
    model = pipe.fit_model(new_mask)
    psi = region_energy(model, driver.img, new_mask)
    length_term = riemannian_length(new_contour, pipe.tensor)
    energy = cfg.alpha * psi + length_term
    delta = _sym_diff_frac(new_mask, state.mask)
    state.history.append({"iteration": state.iteration + 1, "psi": psi,
                          "length": length_term, "energy": energy,
                          "area_delta": delta})
    state.contours.append(new_contour)
    state.iteration += 1
    state.contour = new_contour
    state.mask = new_mask
    state.energy = energy
    if anchor is not None:
        state.source_anchor = anchor
    if delta < cfg.stop_area_frac:
        state.converged = True


def evolve_circular(img, s0, cfg, callback=None):
    """Closed-geodesic contour evolution until stabilization."""
    driver = CircularEvolution(img, s0, cfg)
    while not driver.done:
        driver.step()
        if callback:
            callback(driver.state)
    return driver.state


def _pick_anchor_arclength(contour, prev_anchor):
    """Anchor so the two arcs to the previous anchor have equal length;
    first anchor at arclength zero."""
    if prev_anchor is None:
        return 0.0
    pts = contour.resampled(1.0).points
    d = np.hypot(*(pts - prev_anchor).T)
    k = int(np.argmin(d))
    seg = np.hypot(*np.diff(np.vstack([pts, pts[:1]]), axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    L = cum[-1]
    return (cum[k] + 0.5 * L) % L


def make_evolution(img, landmarks, cfg, initial_contour=None):
    """Driver for an image + landmark set: landmark scheme for m >= 2, the
    circular scheme anchored at the single landmark otherwise."""
    if len(landmarks) == 1:
        s0 = initial_contour
        if s0 is None:
            s0 = _seed_circle(landmarks.points[0], 0.75 * cfg.tube_width,
                              img.grid)
        return CircularEvolution(img, s0, cfg)
    return LandmarkEvolution(img, landmarks, cfg,
                             initial_contour=initial_contour)


def evolve_landmarks(img, landmarks, cfg, initial_contour=None,
                     callback=None):
    """Piecewise-geodesic evolution between fixed landmark points."""
    cfg.validate()
    driver = make_evolution(img, landmarks, cfg,
                            initial_contour=initial_contour)
    while not driver.done:
        driver.step()
        if callback:
            callback(driver.state)
    return driver.state


def _repin_landmarks(contour, landmarks, tol=0.8):
    """Snap the nearest contour vertex back onto each landmark when
    resampling/loop-excision drifted it; keeps the knot pinning exact."""
    pts = contour.points.copy()
    moved = False
    for p in landmarks.points:
        d = np.hypot(*(pts - p).T)
        k = int(np.argmin(d))
        if d[k] > tol:
            pts[k] = p
            moved = True
    if not moved:
        return contour
    c = Polyline(pts, True)
    if not c.is_simple():
        return contour  # keep the simple contour; pinning stays approximate
    return c


def _clip_path_to_anchors(pts, p_start, p_end, radius=1.5):
    """Drop wiggly path ends inside the shared landmark neighborhood and
    pin the exact landmark coordinates (adjacent paths then approach their
    shared landmark by straight runs, which cannot cross)."""
    d0 = np.hypot(*(pts - p_start).T)
    d1 = np.hypot(*(pts - p_end).T)
    keep = (d0 > radius) & (d1 > radius)
    if keep.any():
        core = pts[keep]
    else:
        core = pts[len(pts) // 2:len(pts) // 2 + 1]
    return np.vstack([p_start[None, :], core, p_end[None, :]])


def _seed_circle(center, radius, grid):
    t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    pts = np.column_stack([center[0] + radius * np.cos(t),
                           center[1] + radius * np.sin(t)])
    pts[:, 0] = np.clip(pts[:, 0], 1.0, (grid.width - 2) * grid.spacing)
    pts[:, 1] = np.clip(pts[:, 1], 1.0, (grid.height - 2) * grid.spacing)
    return Polyline(pts, True)


def _ensure_anchor_cells(region, grid, anchors):
    out = region.copy()
    for p in anchors:
        ix, iy = grid.nearest_cell(p)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                nx, ny = ix + dx, iy + dy
                if 0 <= nx < grid.width and 0 <= ny < grid.height:
                    out[ny, nx] = True
    return out


def _concat_paths(paths):
    pts = []
    for p in paths:
        arr = p.points
        if pts and np.hypot(*(arr[0] - pts[-1])) < 1e-9:
            arr = arr[1:]
        pts.extend(arr)
    if np.hypot(*(np.asarray(pts[0]) - np.asarray(pts[-1]))) < 1e-9:
        pts = pts[:-1]
    return Polyline(np.asarray(pts), True)


def _initial_paths(pipe, landmarks, initial_contour):
    cfg = pipe.cfg
    if initial_contour is not None or cfg.init_method == "user_contour":
        if initial_contour is None:
            raise InitError("user_contour init requires an initial contour")
        contour = initial_contour.oriented_ccw()
        paths = _split_contour_at_landmarks(contour, landmarks)
        return landmarks, paths
    if cfg.init_method == "polygon":
        return init_polygon(landmarks, pipe.grid, cfg.alpha_euclid, cfg)
    return init_simple_closed(pipe, landmarks, cfg)


def _split_contour_at_landmarks(contour, landmarks):
    """Cut a closed contour at the landmark positions (nearest arclength),
    preserving landmark order."""
    c = contour.resampled(1.0)
    pts = c.points
    n = pts.shape[0]
    idx = []
    for p in landmarks.points:
        d = np.hypot(*(pts - p).T)
        idx.append(int(np.argmin(d)))
    paths = []
    m = len(idx)
    for k in range(m):
        i0, i1 = idx[k], idx[(k + 1) % m]
        if i0 <= i1:
            seg = pts[i0:i1 + 1].copy()
        else:
            seg = np.vstack([pts[i0:], pts[:i1 + 1]])
        seg[0] = landmarks.points[k]
        seg[-1] = landmarks.points[(k + 1) % m]
        if seg.shape[0] < 2:
            seg = np.vstack([landmarks.points[k],
                             landmarks.points[(k + 1) % m]])
        paths.append(Polyline(seg, False))
    return paths


# -- initial contour construction ---------------------------------------------


def _interface_saddles(dmap, labels, interface, q_max):
    """Saddle candidates on a two-front meeting interface: local minima of
    the combined crossing score, non-maximum suppressed, padded with spread
    interface cells when fewer than q_max minima exist."""
    g = dmap.grid
    D = dmap.distances.values
    cells = np.argwhere(interface.bits)
    if cells.size == 0:
        return []
    scores = []
    for iy, ix in cells:
        best_other = np.inf
        for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            ny, nx = iy + dy, ix + dx
            if 0 <= ny < g.height and 0 <= nx < g.width \
                    and interface.bits[ny, nx] \
                    and labels[ny, nx] != labels[iy, ix]:
                best_other = min(best_other, D[ny, nx])
        if not np.isfinite(best_other):
            best_other = D[iy, ix]
        scores.append(D[iy, ix] + best_other)
    scores = np.asarray(scores)
    order = np.argsort(scores, kind="stable")
    chosen = []
    for o in order:
        p = cells[o]
        if all(np.hypot(*(p - c)) >= SADDLE_NMS_RADIUS for c in chosen):
            chosen.append(p)
        if len(chosen) >= q_max:
            break
    # pad with interface cells far from the chosen ones to diversify detours
    if len(chosen) < q_max:
        for o in order[::-1]:
            p = cells[o]
            if all(np.hypot(*(p - c)) >= 2 * SADDLE_NMS_RADIUS
                   for c in chosen):
                chosen.append(p)
            if len(chosen) >= q_max:
                break
    return [(int(c[1]), int(c[0])) for c in chosen]  # (ix, iy)


def _masked_dmap(dmap, mask_bits):
    """Distance-map view whose validity is restricted to one front."""
    import copy

    g = dmap.grid
    view = copy.copy(dmap)
    vals = dmap.distances.values.copy()
    vals[~mask_bits] = np.inf
    view.distances = ScalarField(g, vals)
    view.metric = MetricField(g, dmap.metric.tensor, dmap.metric.omega,
                              BinaryMask(g, dmap.metric.domain.bits
                                         & mask_bits))
    return view


def _saddle_paths(metric, p, q, q_max):
    """Candidate p->q paths through two-front saddle points."""
    g = metric.grid
    pc = g.nearest_cell(p)
    qc = g.nearest_cell(q)
    dmap, labels, interface = partial_two_source(metric, pc, qc)
    saddles = _interface_saddles(dmap, labels, interface, q_max)
    paths = []
    for ix, iy in saddles:
        own = labels == labels[iy, ix]
        try:
            half_own = backtrack(_masked_dmap(dmap, own),
                                 np.array([ix * g.spacing, iy * g.spacing]))
            # adjacent cell on the other front
            other_cell = None
            for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                ny, nx = iy + dy, ix + dx
                if 0 <= ny < g.height and 0 <= nx < g.width \
                        and interface.bits[ny, nx] \
                        and labels[ny, nx] != labels[iy, ix]:
                    other_cell = (nx, ny)
                    break
            if other_cell is None:
                continue
            half_other = backtrack(
                _masked_dmap(dmap, ~own & (labels >= 0)),
                np.array([other_cell[0] * g.spacing,
                          other_cell[1] * g.spacing]))
        except RandersGeoError:
            continue
        # orient from p to q: the own-front half descends to one source
        own_is_p = labels[iy, ix] == 0
        to_p = half_own if own_is_p else half_other
        to_q = half_other if own_is_p else half_own
        pts = np.vstack([to_p.points[::-1], to_q.points])
        pts[0] = p
        pts[-1] = q
        paths.append(Polyline(pts, False).resampled(1.0))
    return paths


def _candidate_chain_energy(paths, cfg, pot_interp=None):
    contour = _concat_paths(paths)
    c = contour.resampled(2.0)
    e_simp = simplicity_energy(c)
    if pot_interp is None:
        return e_simp + cfg.alpha_euclid * c.length(), e_simp, contour
    pts = c.points
    nxt = np.roll(pts, -1, axis=0)
    mids = 0.5 * (pts + nxt)
    seglen = np.hypot(*(nxt - pts).T)
    pot = pot_interp(mids)
    e_edge = float((pot * seglen).sum() / seglen.sum())
    return e_simp + cfg.alpha_edge * e_edge, e_simp, contour


def _orient_paths_ccw(landmarks, paths):
    contour = _concat_paths(paths)
    if contour.signed_area() >= 0:
        return landmarks, paths
    m = len(paths)
    rev_paths = [paths[m - 1 - j].reversed() for j in range(m)]
    rev_pts = np.vstack([landmarks.points[:1],
                         landmarks.points[1:][::-1]])
    return LandmarkSet(rev_pts), rev_paths


def _combine_candidates(per_pair, landmarks, cfg, pot_interp=None):
    counts = [len(c) for c in per_pair]
    if any(c == 0 for c in counts):
        raise InitError("no admissible path between some landmark pair")
    best = None
    for combo in itertools.product(*[range(c) for c in counts]):
        paths = [per_pair[k][i] for k, i in enumerate(combo)]
        energy, e_simp, contour = _candidate_chain_energy(paths, cfg,
                                                          pot_interp)
        if contour.is_simple() and (best is None or energy < best[0]):
            best = (energy, paths)
    if best is None:
        raise InitError("all candidate initial contours self-intersect")
    return _orient_paths_ccw(landmarks, best[1])


def init_polygon(landmarks, grid, alpha_euclid, cfg=None):
    """Initial contour as a polygon/polyline chain between landmarks,
    minimizing simplicity penalty plus weighted perimeter."""
    cfg = cfg or SegmentationConfig(alpha_euclid=alpha_euclid)
    m = len(landmarks)
    if m < 3:
        raise InitError("polygon construction needs at least 3 landmarks")
    unit = MetricField.isotropic(grid, 1.0)
    per_pair = []
    for k in range(m):
        p = landmarks.points[k]
        q = landmarks.points[(k + 1) % m]
        straight = Polyline(np.vstack([p, q]), False).resampled(1.0)
        cands = [straight]
        if cfg.saddles_per_pair > 1:
            cands.extend(_saddle_paths(unit, p, q,
                                       cfg.saddles_per_pair - 1))
        per_pair.append(cands)
    return _combine_candidates(per_pair, landmarks, cfg)


def init_simple_closed(pipe, landmarks, cfg):
    """Initial contour hugging image edges: per-pair two-front candidates
    under the edge potential, scored by simplicity + normalized edge
    energy."""
    m = len(landmarks)
    if m < 2:
        raise InitError("simple-closed construction needs >= 2 landmarks")
    g = pipe.grid
    gv = pipe.edge.g.values
    beta = cfg.beta_comb if cfg.beta_comb > 0 else (
        2.0 / gv.max() if gv.max() > 0 else 0.0)
    pot = cfg.eps_comb + np.maximum(0.0, 1.0 - beta * gv)
    metric = MetricField.isotropic(g, pot)

    def pot_interp(points):
        ix = np.clip(np.round(points[:, 0] / g.spacing).astype(int), 0,
                     g.width - 1)
        iy = np.clip(np.round(points[:, 1] / g.spacing).astype(int), 0,
                     g.height - 1)
        return pot[iy, ix]

    per_pair = []
    for k in range(m):
        p = landmarks.points[k]
        q = landmarks.points[(k + 1) % m]
        cands = _saddle_paths(metric, p, q, cfg.saddles_per_pair)
        if not cands:
            cands = [Polyline(np.vstack([p, q]), False).resampled(1.0)]
        per_pair.append(cands)
    return _combine_candidates(per_pair, landmarks, cfg, pot_interp)
