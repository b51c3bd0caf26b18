"""Scikit-learn style estimator wrapping the segmentation pipeline.

The estimator keeps all tuning knobs as constructor parameters (so
``get_params`` / ``set_params`` / ``clone`` compose with the usual sklearn
tooling), consumes an image array plus landmark points in ``fit`` and
exposes the final mask through ``predict`` and a Jaccard ``score``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .evolve import LandmarkSet, SegmentationConfig, evolve_landmarks, jaccard
from .grid import BinaryMask, Grid2D, Image, Polyline


def check_image(X):
    """Validate and wrap an image array: (h, w) or (h, w, 3), values in
    [0, 1] (uint8 arrays are rescaled)."""
    arr = np.asarray(X)
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    arr = arr.astype(np.float64)
    if arr.ndim == 2:
        channels = 1
    elif arr.ndim == 3 and arr.shape[2] == 3:
        channels = 3
    else:
        raise ValueError(f"expected (h, w) or (h, w, 3) image, got shape "
                         f"{arr.shape}")
    if arr.min() < 0 or arr.max() > 1:
        raise ValueError("image values must lie in [0, 1]")
    h, w = arr.shape[:2]
    return Image(Grid2D(w, h), channels, arr)


def check_landmarks(landmarks, grid):
    pts = np.asarray(landmarks, dtype=np.float64).reshape(-1, 2)
    for p in pts:
        if not grid.contains_point(p):
            raise ValueError(f"landmark {p.tolist()} outside the image")
    return LandmarkSet(pts)


class RandersGeodesicSegmenter(BaseEstimator):
    """Interactive region segmentation by piecewise Randers geodesics.

    Parameters mirror the segmentation config; see SegmentationConfig for
    semantics.  After ``fit`` the results live in ``mask_``, ``contour_``,
    ``state_``, ``n_iter_`` and ``converged_``.
    """

    def __init__(self, model="piecewise_constant", alpha=1.0,
                 alpha_tilde=6.0, beta_data=2.0, beta_aniso=1.0,
                 tube_width=15.0, upsilon=0.2, varrho_frac=0.1,
                 use_adaptive_tube=True, curl_method="poisson",
                 divergence_weight=0.0, max_iters=100, stop_area_frac=0.001,
                 init_method="polygon", bins=32, kernel_sigma=1.0,
                 edge_sigma=2.0, balloon_force=-1, resample_step=1.0,
                 seed=0):
        self.model = model
        self.alpha = alpha
        self.alpha_tilde = alpha_tilde
        self.beta_data = beta_data
        self.beta_aniso = beta_aniso
        self.tube_width = tube_width
        self.upsilon = upsilon
        self.varrho_frac = varrho_frac
        self.use_adaptive_tube = use_adaptive_tube
        self.curl_method = curl_method
        self.divergence_weight = divergence_weight
        self.max_iters = max_iters
        self.stop_area_frac = stop_area_frac
        self.init_method = init_method
        self.bins = bins
        self.kernel_sigma = kernel_sigma
        self.edge_sigma = edge_sigma
        self.balloon_force = balloon_force
        self.resample_step = resample_step
        self.seed = seed

    def _config(self):
        return SegmentationConfig(
            model=self.model, alpha=self.alpha, alpha_tilde=self.alpha_tilde,
            beta_data=self.beta_data, beta_aniso=self.beta_aniso,
            tube_width=self.tube_width, upsilon=self.upsilon,
            varrho_frac=self.varrho_frac,
            use_adaptive_tube=self.use_adaptive_tube,
            curl_method=self.curl_method,
            divergence_weight=self.divergence_weight,
            max_iters=self.max_iters, stop_area_frac=self.stop_area_frac,
            init_method=self.init_method, bins=self.bins,
            kernel_sigma=self.kernel_sigma, edge_sigma=self.edge_sigma,
            balloon_force=self.balloon_force,
            resample_step=self.resample_step, seed=self.seed).validate()

    def fit(self, X, y=None, landmarks=None, initial_contour=None):
        """Run the contour evolution on image X.

        ``landmarks``: (m, 2) array of boundary points in CCW order.
        ``initial_contour``: optional (n, 2) closed polyline overriding the
        automatic initial-contour construction.
        """
        img = X if isinstance(X, Image) else check_image(X)
        if landmarks is None:
            raise ValueError("fit requires landmark points")
        lm = check_landmarks(landmarks, img.grid)
        contour = None
        if initial_contour is not None:
            contour = initial_contour if isinstance(initial_contour,
                                                    Polyline) \
                else Polyline(initial_contour, True)
        state = evolve_landmarks(img, lm, self._config(),
                                 initial_contour=contour)
        self.image_ = img
        self.state_ = state
        self.mask_ = state.mask
        self.contour_ = state.contour
        self.n_iter_ = state.iteration
        self.converged_ = state.converged
        return self

    def predict(self, X=None):
        """Final binary mask as a (h, w) bool array."""
        if not hasattr(self, "mask_"):
            raise NotFittedError("call fit before predict")
        return self.mask_.bits

    def score(self, X=None, y=None):
        """Jaccard index of the fitted mask against a ground-truth mask."""
        if not hasattr(self, "mask_"):
            raise NotFittedError("call fit before score")
        if y is None:
            raise ValueError("score requires a ground-truth mask")
        gt = y if isinstance(y, BinaryMask) else BinaryMask(
            self.mask_.grid, np.asarray(y, dtype=bool))
        return jaccard(self.mask_, gt)
