"""Image features and region appearance models.

Edge side: Gaussian-derivative gradient magnitude g and the dominant
gradient direction from the 2x2 structure matrix J J^T + Id; both feed the
data-driven tensor field whose eigenvalues are

    lam1 = exp(beta_data (max g - g)),   lam2 = lam1 exp(beta_aniso g),

with the small eigenvalue along the edge tangent, so paths along edges are
cheap and paths across them expensive.

Region side: three appearance models (piecewise constants, Bhattacharyya
histogram overlap, balloon) with their shape gradients xi, normalized so
that adding a pixel at x to the region changes the model energy by
xi(x) * cell_area to first order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .errors import DegenerateRegionError
from .grid import ScalarField, TensorField2, VectorField2

GAUSS_TRUNCATE = 4.0  # derivative kernels cut at 4 sigma


def _ramp_response(sigma):
    """Slope reported by the truncated discrete derivative kernel on a unit
    ramp; used to normalize the kernel to exact unit-ramp response."""
    n = 4 * int(GAUSS_TRUNCATE * sigma + 0.5) + 9
    ramp = np.arange(n, dtype=np.float64)
    out = ndimage.gaussian_filter1d(ramp, sigma, order=1,
                                    truncate=GAUSS_TRUNCATE)
    return float(out[n // 2])


@dataclass
class EdgeFeatures:
    g: ScalarField          # gradient magnitude feature, >= 0
    gdir: VectorField2      # unit vectors along the dominant gradient


def edge_features(img, sigma=2.0):
    """Gradient magnitude (Frobenius norm of the Gaussian-derivative
    Jacobian over channels) and dominant gradient direction."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    planes = img.planes()
    norm = _ramp_response(sigma)
    q11 = np.zeros(img.grid.shape)
    q12 = np.zeros(img.grid.shape)
    q22 = np.zeros(img.grid.shape)
    mean_gx = np.zeros(img.grid.shape)
    mean_gy = np.zeros(img.grid.shape)
    for plane in planes:
        gx = ndimage.gaussian_filter(plane, sigma, order=(0, 1),
                                     truncate=GAUSS_TRUNCATE) / norm
        gy = ndimage.gaussian_filter(plane, sigma, order=(1, 0),
                                     truncate=GAUSS_TRUNCATE) / norm
        q11 += gx * gx
        q12 += gx * gy
        q22 += gy * gy
        mean_gx += gx
        mean_gy += gy
    g = np.sqrt(q11 + q22)
    # dominant eigenvector of Q = J J^T + Id equals that of J J^T
    # (the identity shift moves eigenvalues, not eigenvectors)
    half_tr = 0.5 * (q11 + q22)
    disc = np.sqrt(np.maximum(
        0.25 * (q11 - q22) ** 2 + q12 * q12, 0.0))
    lam_big = half_tr + disc + 1.0
    vx = np.where(np.abs(q12) > 1e-30, q12, lam_big - 1.0 - q22)
    vy = np.where(np.abs(q12) > 1e-30, lam_big - 1.0 - q11, q12 * 0.0)
    nrm = np.hypot(vx, vy)
    flat = (nrm < 1e-12) | (g < 1e-12)
    vx = np.where(flat, 1.0, vx / np.where(nrm > 0, nrm, 1.0))
    vy = np.where(flat, 0.0, vy / np.where(nrm > 0, nrm, 1.0))
    # sign-normalize toward the raw smoothed gradient (channel mean)
    sign = np.where(vx * mean_gx + vy * mean_gy < 0, -1.0, 1.0)
    vecs = np.stack([vx * sign, vy * sign], axis=-1)
    return EdgeFeatures(ScalarField(img.grid, g),
                        VectorField2(img.grid, vecs))


def structure_matrix(img, sigma=2.0):
    """The per-cell matrix Q = J J^T + Id as component planes (diagnostic)."""
    planes = img.planes()
    q11 = np.ones(img.grid.shape)
    q12 = np.zeros(img.grid.shape)
    q22 = np.ones(img.grid.shape)
    for plane in planes:
        gx = ndimage.gaussian_filter(plane, sigma, order=(0, 1),
                                     truncate=GAUSS_TRUNCATE)
        gy = ndimage.gaussian_filter(plane, sigma, order=(1, 0),
                                     truncate=GAUSS_TRUNCATE)
        q11 += gx * gx
        q12 += gx * gy
        q22 += gy * gy
    return q11, q12, q22


def build_tensor_field(ef, beta_data, beta_aniso):
    """Edge-driven SPD tensor field; small eigenvalue (>= 1, = 1 at the
    strongest edge) along the edge tangent, large across it."""
    if beta_data < 0 or beta_aniso < 0:
        raise ValueError("beta weights must be non-negative")
    if beta_data == 0:
        beta_aniso = 0.0
    g = ef.g.values
    gmax = float(g.max())
    lam1 = np.exp(beta_data * (gmax - g))
    lam2 = lam1 * np.exp(beta_aniso * g)
    dx = ef.gdir.vectors[:, :, 0]
    dy = ef.gdir.vectors[:, :, 1]
    # theta2 = gdir (across the edge), theta1 = gdir^perp (along it)
    m11 = lam1 * dy * dy + lam2 * dx * dx
    m12 = (lam2 - lam1) * dx * dy
    m22 = lam1 * dx * dx + lam2 * dy * dy
    return TensorField2(ef.g.grid, m11, m12, m22)


# -- region appearance models ------------------------------------------------


@dataclass(frozen=True)
class PiecewiseConstant:
    """Two-phase piecewise-constant model; c_in/c_out are region means of
    the luminance, re-estimated by fit()."""
    c_in: float | None = None
    c_out: float | None = None

    def fit(self, img, mask):
        _check_regions(mask)
        lum = img.luminance()
        return replace(self,
                       c_in=float(lum[mask.bits].mean()),
                       c_out=float(lum[~mask.bits].mean()))


@dataclass(frozen=True)
class Bhattacharyya:
    """Histogram-overlap model: Gaussian-kernel histograms inside and
    outside, energy = sum_q sqrt(h_in h_out) averaged over channels.

    Every pixel spreads one unit of mass over bins through the
    column-normalized kernel K.  A uniform pseudo-mass of ``prior_frac``
    times the region size keeps the histograms bounded away from zero, so
    the square-root overlap stays differentiable and the shape gradient
    below is the exact derivative of the energy.  With the proportional
    prior a pixel effectively contributes the blended kernel
    (K + prior_frac / bins) / (1 + prior_frac)."""
    bins: int = 32
    sigma: float = 1.0        # bin units for the spreading kernel
    prior_frac: float = 0.05  # uniform pseudo-mass fraction per region
    floor: float = 1e-12

    def _kernel_matrix(self):
        eye = np.eye(self.bins)
        K = np.stack([ndimage.gaussian_filter1d(eye[:, b], self.sigma,
                                                mode="constant")
                      for b in range(self.bins)], axis=1)
        return K / K.sum(axis=0, keepdims=True)

    def _blended_kernel(self):
        return ((self._kernel_matrix() + self.prior_frac / self.bins)
                / (1.0 + self.prior_frac))

    def _bin_of(self, plane):
        return np.clip((plane * self.bins).astype(int), 0, self.bins - 1)

    def region_counts(self, mask):
        return mask.count(), mask.bits.size - mask.count()

    def histograms(self, img, mask):
        _check_regions(mask)
        K = self._kernel_matrix()
        n_in, n_out = self.region_counts(mask)
        c_in = self.prior_frac * n_in / self.bins
        c_out = self.prior_frac * n_out / self.bins
        hin, hout = [], []
        for plane in img.planes():
            b = self._bin_of(plane)
            raw_in = np.bincount(b[mask.bits].ravel(), minlength=self.bins)
            raw_out = np.bincount(b[~mask.bits].ravel(), minlength=self.bins)
            hin.append((K @ raw_in + c_in) / (n_in * (1 + self.prior_frac)))
            hout.append((K @ raw_out + c_out)
                        / (n_out * (1 + self.prior_frac)))
        return hin, hout


@dataclass(frozen=True)
class Balloon:
    """Uniform inflate (f = -1) or deflate (f = +1) force."""
    f: int = -1

    def __post_init__(self):
        if self.f not in (-1, 1):
            raise ValueError("balloon force must be -1 or +1")


def _check_regions(mask):
    n = mask.count()
    if n == 0 or n == mask.bits.size:
        raise DegenerateRegionError("mask must leave both regions nonempty")


def region_energy(model, img, mask):
    """Scalar appearance energy of the masked region."""
    if isinstance(model, Balloon):
        return float(model.f) * mask.area()
    if isinstance(model, PiecewiseConstant):
        fitted = model if model.c_in is not None else model.fit(img, mask)
        lum = img.luminance()
        chi = mask.bits
        res = ((lum - fitted.c_out) ** 2 * ~chi
               + (lum - fitted.c_in) ** 2 * chi)
        return float(res.sum()) * img.grid.cell_area
    if isinstance(model, Bhattacharyya):
        hin, hout = model.histograms(img, mask)
        vals = [float(np.sqrt(hi * ho).sum()) for hi, ho in zip(hin, hout)]
        return float(np.mean(vals))
    raise TypeError(f"unknown appearance model {model!r}")


def shape_gradient(model, img, mask):
    """First-order energy density: moving cell x into the region changes the
    model energy by xi(x) * cell_area."""
    grid = img.grid
    if isinstance(model, Balloon):
        return ScalarField(grid, np.full(grid.shape, float(model.f)))
    if isinstance(model, PiecewiseConstant):
        fitted = model if model.c_in is not None else model.fit(img, mask)
        lum = img.luminance()
        xi = (lum - fitted.c_in) ** 2 - (lum - fitted.c_out) ** 2
        return ScalarField(grid, xi)
    if isinstance(model, Bhattacharyya):
        return ScalarField(grid, _bhattacharyya_gradient(model, img, mask))
    raise TypeError(f"unknown appearance model {model!r}")


def _bhattacharyya_gradient(model, img, mask):
    """Derivative of the kernel-histogram overlap w.r.t. moving area into
    the region, averaged over channels."""
    _check_regions(mask)
    area = img.grid.cell_area
    n_in, n_out = model.region_counts(mask)
    a_in = n_in * area
    a_out = n_out * area
    K = model._blended_kernel()
    total = np.zeros(img.grid.shape)
    planes = img.planes()
    hin_all, hout_all = model.histograms(img, mask)
    for plane, hin, hout in zip(planes, hin_all, hout_all):
        psi = float(np.sqrt(hin * hout).sum())
        lo = model.floor
        r_oi = np.sqrt(np.maximum(hout, lo) / np.maximum(hin, lo))
        r_io = np.sqrt(np.maximum(hin, lo) / np.maximum(hout, lo))
        # per-bin weight of the kernel-spread pixel contribution
        wq = r_oi / a_in - r_io / a_out          # (bins,)
        per_bin = K.T @ wq                       # contribution by pixel bin
        b = model._bin_of(plane)
        xi = 0.5 * psi * (1.0 / a_out - 1.0 / a_in) + 0.5 * per_bin[b]
        total += xi
    return total / len(planes)


def hybrid_energy(model, img, mask, contour, tensor, alpha):
    """alpha * Psi + Riemannian contour length (midpoint quadrature)."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    psi = region_energy(model, img, mask) if alpha > 0 else 0.0
    return alpha * psi + riemannian_length(contour, tensor)


def riemannian_length(contour, tensor):
    grid = tensor.grid
    pts = contour.points
    n = pts.shape[0]
    nseg = n if contour.closed else n - 1
    total = 0.0
    for k in range(nseg):
        a = pts[k]
        b = pts[(k + 1) % n]
        mid = 0.5 * (a + b)
        ix, iy = grid.nearest_cell(mid)
        d = b - a
        m11 = tensor.m11[iy, ix]
        m12 = tensor.m12[iy, ix]
        m22 = tensor.m22[iy, ix]
        total += np.sqrt(d[0] * (m11 * d[0] + m12 * d[1])
                         + d[1] * (m12 * d[0] + m22 * d[1]))
    return float(total)
