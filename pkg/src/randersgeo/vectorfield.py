"""Solvers for the curl PDE  curl omega = xi  on a tubular domain, the
norm-limiting rescaling of the resulting drift field, and assembly of the
final Randers metric field.

Two constructions are provided:

* convolution with the rotational kernel H(z) = z_perp / (2 pi |z|^2) of the
  source cropped to the doubled tube (FFT or windowed direct form);
* the minimal-L2 solution: omega = (grad phi)_perp with the Poisson problem
  Delta phi = xi on the tube, phi = 0 outside (conjugate gradients).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, signal, sparse
from scipy.sparse.linalg import cg as sparse_cg

from .eikonal import MetricField
from .errors import SolverError
from .grid import BinaryMask, ScalarField, VectorField2

KERNEL_SUPERSAMPLE_RADIUS = 4  # cells near the singularity get averaged
KERNEL_SUPERSAMPLE = 9


@dataclass
class CurlSolution:
    omega: VectorField2
    method: str            # "convolution" | "poisson"
    residual: float        # relative L2 of (curl omega - xi) on the interior
    omega_max: float       # recorded ||omega||_inf over the solve domain
    phi: ScalarField | None = None


def _rotational_kernel(grid, half_w, half_h):
    """Sampled kernel H(z) = z_perp/(2 pi |z|^2); cell-averaged near the
    origin where H is singular (the odd symmetry makes H(0) = 0)."""
    h = grid.spacing
    oy, ox = np.mgrid[-half_h:half_h + 1, -half_w:half_w + 1]
    zx = ox * h
    zy = oy * h
    r2 = zx * zx + zy * zy
    with np.errstate(divide="ignore", invalid="ignore"):
        hx = np.where(r2 > 0, -zy / (2 * np.pi * r2), 0.0)
        hy = np.where(r2 > 0, zx / (2 * np.pi * r2), 0.0)
    near = (np.abs(ox) <= KERNEL_SUPERSAMPLE_RADIUS) & \
           (np.abs(oy) <= KERNEL_SUPERSAMPLE_RADIUS)
    n = KERNEL_SUPERSAMPLE
    offs = (np.arange(n) + 0.5) / n - 0.5
    sx, sy = np.meshgrid(offs, offs)
    with np.errstate(divide="ignore", invalid="ignore"):
        for iy, ix in np.argwhere(near):
            zxs = (ox[iy, ix] + sx) * h
            zys = (oy[iy, ix] + sy) * h
            r2s = zxs * zxs + zys * zys
            good = r2s > 1e-30
            hx[iy, ix] = np.mean(
                np.where(good, -zys / (2 * np.pi * r2s), 0.0))
            hy[iy, ix] = np.mean(
                np.where(good, zxs / (2 * np.pi * r2s), 0.0))
    return hx, hy


def omega_by_convolution(xi, tube2, window=None):
    """Drift field as the convolution of the tube2-cropped source with the
    rotational kernel; full-grid FFT by default, direct summation over a
    [-window, window]^2 neighborhood when a window is given."""
    grid = xi.grid
    src = np.where(tube2.bits, xi.values, 0.0)
    if window is None:
        half_w, half_h = grid.width - 1, grid.height - 1
    else:
        half_w = half_h = int(np.ceil(window / grid.spacing))
    hx, hy = _rotational_kernel(grid, half_w, half_h)
    area = grid.cell_area
    # cropping the kernel to a window is equivalent to direct summation
    # over that window; the transform is exact linear convolution either way
    wx = signal.fftconvolve(src, hx, mode="same") * area
    wy = signal.fftconvolve(src, hy, mode="same") * area
    omega = VectorField2(grid, np.stack([wx, wy], axis=-1))
    residual = curl_residual(omega, xi, tube2)
    om_max = float(np.hypot(wx, wy)[tube2.bits].max()) if tube2.count() else 0.0
    return CurlSolution(omega, "convolution", residual, om_max)


def omega_by_poisson(xi, tube, cut=None):
    """Minimal-L2 drift: solve Delta phi = xi with zero Dirichlet data on
    the tube boundary (5-point scheme, CG), set omega = (grad phi)_perp.

    ``cut = (dist_field, threshold)`` optionally supplies the level set that
    carved the tube mask; boundary arms are then shortened to the sub-cell
    zero crossing (symmetric ghost-value weighting), which removes the
    staircase error of the rasterized boundary."""
    grid = xi.grid
    bits = tube.bits
    cells = np.argwhere(bits)
    n = cells.shape[0]
    if n == 0:
        raise SolverError("empty tube domain")
    index = -np.ones(grid.shape, dtype=np.int64)
    index[bits] = np.arange(n)
    h2 = grid.spacing ** 2
    dist = cut[0].values if cut is not None else None
    level = cut[1] if cut is not None else 0.0

    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for k, (iy, ix) in enumerate(cells):
        for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            ny, nx = iy + dy, ix + dx
            if 0 <= ny < grid.height and 0 <= nx < grid.width \
                    and index[ny, nx] >= 0:
                rows.append(k)
                cols.append(index[ny, nx])
                vals.append(-1.0 / h2)
                diag[k] += 1.0 / h2
            else:
                theta = 1.0
                if dist is not None and 0 <= ny < grid.height \
                        and 0 <= nx < grid.width:
                    gap = dist[ny, nx] - dist[iy, ix]
                    if gap > 1e-12:
                        theta = (level - dist[iy, ix]) / gap
                    theta = min(max(theta, 0.05), 1.0)
                diag[k] += 1.0 / (theta * h2)
    rows.extend(range(n))
    cols.extend(range(n))
    vals.extend(diag)
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    b = -xi.values[bits]  # solve -Delta phi = -xi (SPD form)

    phi_vec, info = sparse_cg(A, b, rtol=1e-8, atol=0.0, maxiter=10 * n)
    if info != 0:
        raise SolverError(f"Poisson CG did not converge (info={info})")
    phi = np.zeros(grid.shape)
    phi[bits] = phi_vec

    gx, gy = _masked_gradient(phi, bits, grid.spacing)
    omega = VectorField2(grid, np.stack([-gy, gx], axis=-1))  # (grad phi)^perp
    residual = curl_residual(omega, xi, tube)
    om = np.hypot(gx, gy)
    return CurlSolution(omega, "poisson", residual,
                        float(om[bits].max()), ScalarField(grid, phi))


def _masked_gradient(f, bits, h):
    """Centered differences inside the mask, one-sided at its boundary;
    outside-mask values are treated as zero Dirichlet data."""
    gx = np.zeros_like(f)
    gy = np.zeros_like(f)
    fz = np.where(bits, f, 0.0)
    right = np.roll(fz, -1, axis=1)
    left = np.roll(fz, 1, axis=1)
    up = np.roll(fz, -1, axis=0)
    down = np.roll(fz, 1, axis=0)
    gx[bits] = (right - left)[bits] / (2 * h)
    gy[bits] = (up - down)[bits] / (2 * h)
    return gx, gy


def discrete_curl(omega, h):
    """curl omega = d(omega_y)/dx - d(omega_x)/dy, centered differences."""
    ox = omega.vectors[:, :, 0]
    oy = omega.vectors[:, :, 1]
    dyx = np.gradient(oy, h, axis=1)
    dxy = np.gradient(ox, h, axis=0)
    return dyx - dxy


def curl_residual(omega, xi, domain, interior_erosion=2):
    """Relative L2 of (curl omega - xi) over the eroded domain interior."""
    if interior_erosion > 0:
        inner = ndimage.binary_erosion(domain.bits,
                                       iterations=interior_erosion)
    else:
        inner = domain.bits
    if not inner.any():
        return float("nan")
    c = discrete_curl(omega, omega.grid.spacing)
    diff = (c - xi.values)[inner]
    ref = np.sqrt(np.mean(xi.values[inner] ** 2))
    if ref == 0:
        return float(np.sqrt(np.mean(diff ** 2)))
    return float(np.sqrt(np.mean(diff ** 2)) / ref)


def psi_rescale(omega, alpha_tilde, domain=None):
    """Norm-limiting rescale V = psi(alpha_tilde * omega / ||omega||_inf)
    with psi(z) = (1 - exp(-|z|)) z / |z|; keeps ||V|| < 1 strictly and
    preserves directions."""
    if alpha_tilde <= 0:
        raise ValueError("alpha_tilde must be positive")
    v = omega.vectors
    norms = np.hypot(v[:, :, 0], v[:, :, 1])
    sup = float(norms[domain.bits].max()) if domain is not None \
        else float(norms.max())
    if sup == 0.0:
        return VectorField2.zeros(omega.grid)
    a = alpha_tilde * norms / sup
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(a > 1e-12, (1.0 - np.exp(-a)) / a, 1.0)
    scaled = v * (alpha_tilde / sup * factor)[:, :, None]
    return VectorField2(omega.grid, scaled)


def assemble_metric(tensor, drift, dist_to_boundary=None, lam=0.0,
                    domain=None):
    """Randers metric field  (1 + 2 lam d^2) ||v||_M + <drift, v>.

    lam = 0 gives the variant metric (no divergence weighting); lam > 0
    requires the distance field and scales the tensor by the squared
    factor.  Compatibility is validated cell by cell.
    """
    grid = tensor.grid
    if lam > 0:
        if dist_to_boundary is None:
            raise ValueError("dist_to_boundary required when lam > 0")
        factor = (1.0 + 2.0 * lam * dist_to_boundary.values ** 2) ** 2
        scaled = tensor.scaled(factor)
    else:
        scaled = tensor
    if domain is None:
        domain = BinaryMask(grid, np.ones(grid.shape, dtype=bool))
    metric = MetricField(grid, scaled, drift, domain)
    metric.validate()
    return metric
