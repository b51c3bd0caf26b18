"""Raster grid primitives, fields, masks, polylines and file I/O.

Conventions used throughout the package:

* a grid cell (ix, iy) has its center at continuous coordinates
  (ix * spacing, iy * spacing), with the origin at cell (0, 0);
* arrays are stored row-major with shape (height, width), indexed [iy, ix];
* polyline points are float (x, y) pairs in the same continuous coordinates;
* images use one pixel per cell with spacing fixed to 1.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PILImage

from . import _geom
from .errors import FormatError, GeometryError

RSF1_MAGIC = b"RSF1"


@dataclass(frozen=True)
class Grid2D:
    width: int
    height: int
    spacing: float = 1.0

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise ValueError("grid must be at least 2x2 cells")
        if not self.spacing > 0:
            raise ValueError("grid spacing must be positive")

    @property
    def shape(self):
        return (self.height, self.width)

    @property
    def cell_area(self):
        return self.spacing * self.spacing

    def cell_centers(self):
        """Meshgrid (X, Y) of cell-center coordinates, shape (h, w) each."""
        x = np.arange(self.width) * self.spacing
        y = np.arange(self.height) * self.spacing
        return np.meshgrid(x, y)

    def contains_point(self, p):
        x, y = float(p[0]), float(p[1])
        return (0.0 <= x <= (self.width - 1) * self.spacing
                and 0.0 <= y <= (self.height - 1) * self.spacing)

    def nearest_cell(self, p):
        ix = int(round(float(p[0]) / self.spacing))
        iy = int(round(float(p[1]) / self.spacing))
        ix = min(max(ix, 0), self.width - 1)
        iy = min(max(iy, 0), self.height - 1)
        return ix, iy


def _check_shape(grid, arr, ncomp=None):
    expect = grid.shape if ncomp is None else grid.shape + (ncomp,)
    if arr.shape != expect:
        raise ValueError(f"array shape {arr.shape} does not match {expect}")


@dataclass
class ScalarField:
    grid: Grid2D
    values: np.ndarray  # (h, w) float64; +inf marks outflow cells

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        _check_shape(self.grid, self.values)

    def copy(self):
        return ScalarField(self.grid, self.values.copy())


@dataclass
class VectorField2:
    grid: Grid2D
    vectors: np.ndarray  # (h, w, 2) float64

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        _check_shape(self.grid, self.vectors, 2)
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("vector field components must be finite")

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape + (2,)))


@dataclass
class TensorField2:
    """Per-cell symmetric positive definite 2x2 matrices, stored as the
    (m11, m12, m22) component planes."""

    grid: Grid2D
    m11: np.ndarray
    m12: np.ndarray
    m22: np.ndarray

    def __post_init__(self):
        self.m11 = np.asarray(self.m11, dtype=np.float64)
        self.m12 = np.asarray(self.m12, dtype=np.float64)
        self.m22 = np.asarray(self.m22, dtype=np.float64)
        for a in (self.m11, self.m12, self.m22):
            _check_shape(self.grid, a)

    @classmethod
    def identity(cls, grid):
        ones = np.ones(grid.shape)
        return cls(grid, ones, np.zeros(grid.shape), ones.copy())

    def is_spd(self):
        det = self.m11 * self.m22 - self.m12 * self.m12
        return bool(np.all(self.m11 > 0) and np.all(det > 0))

    def matrix_at(self, ix, iy):
        return np.array([[self.m11[iy, ix], self.m12[iy, ix]],
                         [self.m12[iy, ix], self.m22[iy, ix]]])

    def scaled(self, factor):
        """Pointwise scaling by a scalar field or constant."""
        f = np.broadcast_to(np.asarray(factor, dtype=np.float64),
                            self.grid.shape)
        return TensorField2(self.grid, self.m11 * f, self.m12 * f,
                            self.m22 * f)


@dataclass
class BinaryMask:
    grid: Grid2D
    bits: np.ndarray  # (h, w) bool

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        _check_shape(self.grid, self.bits)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    def count(self):
        return int(self.bits.sum())

    def area(self):
        return self.count() * self.grid.cell_area


@dataclass
class Image:
    grid: Grid2D
    channels: int
    samples: np.ndarray  # (h, w) for gray, (h, w, 3) for RGB, values in [0,1]

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if self.channels == 1:
            _check_shape(self.grid, self.samples)
        else:
            _check_shape(self.grid, self.samples, 3)
        if self.samples.min() < -1e-9 or self.samples.max() > 1 + 1e-9:
            raise ValueError("image samples must lie in [0, 1]")

    def luminance(self):
        """Gray view: channel mean for RGB, the single plane for gray."""
        if self.channels == 1:
            return self.samples
        return self.samples.mean(axis=2)

    def planes(self):
        if self.channels == 1:
            return [self.samples]
        return [self.samples[:, :, c] for c in range(3)]


class Polyline:
    """Ordered list of (x, y) points, optionally closed (periodic)."""

    def __init__(self, points, closed):
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        if pts.shape[0] < 2:
            raise GeometryError("polyline needs at least 2 points")
        self.points = pts
        self.closed = bool(closed)

    def __len__(self):
        return self.points.shape[0]

    def segment_count(self):
        return len(self) if self.closed else len(self) - 1

    def length(self):
        d = np.diff(self.points, axis=0)
        total = float(np.hypot(d[:, 0], d[:, 1]).sum())
        if self.closed:
            total += float(np.hypot(*(self.points[0] - self.points[-1])))
        return total

    def signed_area(self):
        if not self.closed:
            raise GeometryError("signed area requires a closed polyline")
        x = self.points[:, 0]
        y = self.points[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def is_ccw(self):
        return self.signed_area() > 0

    def oriented_ccw(self):
        if self.closed and not self.is_ccw():
            return Polyline(self.points[::-1].copy(), True)
        return self

    def is_simple(self):
        return _geom.count_self_intersections(self.points, self.closed) == 0

    def reversed(self):
        return Polyline(self.points[::-1].copy(), self.closed)

    def resampled(self, step=1.0):
        """Uniform arclength resampling with spacing ~step."""
        pts = self.points
        if self.closed:
            pts = np.vstack([pts, pts[:1]])
        seg = np.hypot(*(np.diff(pts, axis=0).T))
        s = np.concatenate([[0.0], np.cumsum(seg)])
        total = s[-1]
        if total <= 0:
            raise GeometryError("cannot resample a zero-length polyline")
        n = max(int(round(total / step)), 3 if self.closed else 2)
        if self.closed:
            t = np.linspace(0.0, total, n, endpoint=False)
        else:
            t = np.linspace(0.0, total, n)
        x = np.interp(t, s, pts[:, 0])
        y = np.interp(t, s, pts[:, 1])
        return Polyline(np.column_stack([x, y]), self.closed)

    def point_at_arclength(self, s):
        pts = self.points
        if self.closed:
            pts = np.vstack([pts, pts[:1]])
        seg = np.hypot(*(np.diff(pts, axis=0).T))
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        total = cum[-1]
        s = float(s) % total if self.closed else min(max(float(s), 0.0), total)
        x = np.interp(s, cum, pts[:, 0])
        y = np.interp(s, cum, pts[:, 1])
        return np.array([x, y])

    def distance_to_point(self, p):
        return float(_geom.polyline_point_distance(
            self.points, self.closed, float(p[0]), float(p[1])))


def load_image(path, target_channels=3):
    """Load a PNG/PGM/PPM image, scaled to [0, 1].

    Gray conversion (target_channels=1) averages the RGB channels.
    """
    path = str(path)
    lower = path.lower()
    if lower.endswith((".pgm", ".ppm", ".pnm")):
        arr = _read_pnm(path)
    elif lower.endswith(".png"):
        try:
            with PILImage.open(path) as im:
                im = im.convert("RGB") if im.mode not in ("L", "RGB") else im
                arr = np.asarray(im, dtype=np.float64) / 255.0
        except OSError as e:
            raise FormatError(f"cannot read PNG {path!r}: {e}") from e
    else:
        raise FormatError(f"unsupported image format: {path!r}")

    if arr.ndim == 2 and target_channels == 3:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    elif arr.ndim == 3 and target_channels == 1:
        arr = arr.mean(axis=2)
    h, w = arr.shape[:2]
    grid = Grid2D(w, h, 1.0)
    return Image(grid, target_channels, arr)


def _read_pnm(path):
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise FormatError(f"cannot read {path!r}: {e}") from e
    if data[:2] not in (b"P2", b"P3", b"P5", b"P6"):
        raise FormatError(f"not a supported PNM file: {path!r}")
    magic = data[:2].decode()
    # tokenize header, skipping comments
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"truncated PNM header in {path!r}")
        tokens.append(data[start:pos])
    w, h, maxval = (int(t) for t in tokens)
    if maxval <= 0 or maxval > 255:
        raise FormatError("only 8-bit PNM files are supported")
    nch = 3 if magic in ("P3", "P6") else 1
    count = w * h * nch
    if magic in ("P5", "P6"):
        pos += 1  # single whitespace after maxval
        raw = np.frombuffer(data, dtype=np.uint8, count=count, offset=pos)
    else:
        raw = np.array([int(t) for t in data[pos:].split()[:count]],
                       dtype=np.uint8)
    if raw.size != count:
        raise FormatError(f"truncated PNM pixel data in {path!r}")
    arr = raw.reshape((h, w) if nch == 1 else (h, w, 3))
    return arr.astype(np.float64) / float(maxval)


def write_pgm(path, values):
    """Write an 8-bit binary PGM; values may be uint8, bool or floats in
    [0, 1]."""
    arr = np.asarray(values)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    elif arr.dtype != np.uint8:
        arr = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(arr.tobytes())


def mask_to_pgm_bytes(mask):
    arr = mask.bits.astype(np.uint8) * 255
    h, w = arr.shape
    return f"P5\n{w} {h}\n255\n".encode() + arr.tobytes()


def write_rsf1(path, field_or_values, grid=None):
    """Serialize scalar (or stacked vector-component) planes as RSF1:
    16-byte header {magic "RSF1", u32 width, u32 height, f32 spacing},
    then row-major little-endian float32 planes."""
    if isinstance(field_or_values, ScalarField):
        grid = field_or_values.grid
        planes = field_or_values.values[None]
    elif isinstance(field_or_values, VectorField2):
        grid = field_or_values.grid
        planes = np.stack([field_or_values.vectors[:, :, 0],
                           field_or_values.vectors[:, :, 1]])
    else:
        planes = np.asarray(field_or_values, dtype=np.float64)
        if planes.ndim == 2:
            planes = planes[None]
        if grid is None:
            raise ValueError("grid required for raw arrays")
    with open(path, "wb") as f:
        f.write(rsf1_bytes_from_planes(planes, grid))


def rsf1_bytes_from_planes(planes, grid):
    header = RSF1_MAGIC + struct.pack("<IIf", grid.width, grid.height,
                                      grid.spacing)
    body = np.ascontiguousarray(planes, dtype="<f4").tobytes()
    return header + body


def read_rsf1(path):
    """Read an RSF1 file; returns (grid, planes) with planes (k, h, w)."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != RSF1_MAGIC:
        raise FormatError("not an RSF1 field file")
    w, h, spacing = struct.unpack("<IIf", data[4:16])
    body = np.frombuffer(data, dtype="<f4", offset=16)
    if body.size % (w * h) != 0:
        raise FormatError("RSF1 payload size mismatch")
    planes = body.reshape(-1, h, w).astype(np.float64)
    return Grid2D(int(w), int(h), float(spacing)), planes


def contour_to_json(polyline):
    return json.dumps({
        "closed": polyline.closed,
        "points": [[float(x), float(y)] for x, y in polyline.points],
    })


def contour_from_json(text):
    obj = json.loads(text)
    return Polyline(obj["points"], obj["closed"])


def rasterize_contour(contour, grid):
    """Binary mask of cells whose center has odd crossing number w.r.t. the
    closed simple contour (even-odd rule)."""
    if not contour.closed:
        raise GeometryError("rasterization requires a closed contour")
    if len(contour) < 3:
        raise GeometryError("degenerate contour")
    if not contour.is_simple():
        raise GeometryError("contour is not simple")
    pts = contour.points / grid.spacing  # cell units
    bits = np.zeros(grid.shape, dtype=bool)
    n = pts.shape[0]
    # per-row crossing abscissas of the ray to +x
    row_crossings = [[] for _ in range(grid.height)]
    for k in range(n):
        x1, y1 = pts[k]
        x2, y2 = pts[(k + 1) % n]
        if y1 == y2:
            continue
        ylo, yhi = (y1, y2) if y1 < y2 else (y2, y1)
        iy0 = int(np.ceil(ylo))
        iy1 = int(np.floor(yhi))
        if float(iy1) == yhi:
            iy1 -= 1  # half-open rule at the upper endpoint
        iy0 = max(iy0, 0)
        iy1 = min(iy1, grid.height - 1)
        for iy in range(iy0, iy1 + 1):
            t = (iy - y1) / (y2 - y1)
            row_crossings[iy].append(x1 + t * (x2 - x1))
    xs = np.arange(grid.width, dtype=np.float64)
    for iy, crossings in enumerate(row_crossings):
        if not crossings:
            continue
        cr = np.sort(np.asarray(crossings))
        # odd number of crossings strictly to the right of the center
        counts = cr.size - np.searchsorted(cr, xs, side="right")
        bits[iy] = (counts % 2) == 1
    return BinaryMask(grid, bits)


def euclidean_distance_to_contour(contour, grid):
    """Exact per-cell distance from cell centers to the nearest segment."""
    values = _geom.polyline_distance_field(
        contour.points, contour.closed, grid.width, grid.height, grid.spacing)
    return ScalarField(grid, values)


def winding_number(contour, point):
    """Signed winding number of a closed contour around a point."""
    if not contour.closed:
        raise GeometryError("winding number requires a closed contour")
    if contour.distance_to_point(point) < 1e-9:
        raise GeometryError("point lies on the contour")
    return int(_geom.winding_number_at(contour.points, float(point[0]),
                                       float(point[1])))


def mask_boundary_contour(mask):
    """Closed CCW contour tracing the outer boundary of the largest true
    component of a mask (marching-squares on the 0.5 level)."""
    from skimage import measure  # local import keeps base deps light

    padded = np.pad(mask.bits.astype(np.float64), 1)
    contours = measure.find_contours(padded, 0.5)
    if not contours:
        raise GeometryError("empty mask has no boundary")
    best = max(contours, key=lambda c: c.shape[0])
    # find_contours yields (row, col) = (y, x) in padded coordinates
    pts = np.column_stack([best[:, 1] - 1.0, best[:, 0] - 1.0])
    if np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    poly = Polyline(pts * mask.grid.spacing, True)
    return poly.oriented_ccw()
