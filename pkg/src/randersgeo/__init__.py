"""Region-based Randers geodesic segmentation toolkit."""

from .eikonal import (
    DistanceMap,
    MetricField,
    backtrack,
    build_stencils,
    fmm_solve,
    hopf_lax_update,
    partial_two_source,
    solve_with_wall,
)
from .estimator import RandersGeodesicSegmenter
from .evolve import (
    LandmarkSet,
    SegmentationConfig,
    evolve_circular,
    evolve_landmarks,
    jaccard,
    sample_landmarks,
)
from .features import (
    Balloon,
    Bhattacharyya,
    EdgeFeatures,
    PiecewiseConstant,
    build_tensor_field,
    edge_features,
    hybrid_energy,
    region_energy,
    shape_gradient,
)
from .grid import (
    BinaryMask,
    Grid2D,
    Image,
    Polyline,
    ScalarField,
    TensorField2,
    VectorField2,
    euclidean_distance_to_contour,
    load_image,
    rasterize_contour,
    winding_number,
)
from .randers import DualNorm, RandersNorm, anisotropy, check_compatibility, dual
from .tube import TubularDomain, Wall, adaptive_tube, build_tube, decompose, divergence, make_wall
from .vectorfield import (
    CurlSolution,
    assemble_metric,
    omega_by_convolution,
    omega_by_poisson,
    psi_rescale,
)

__all__ = [
    "Balloon",
    "Bhattacharyya",
    "BinaryMask",
    "CurlSolution",
    "DistanceMap",
    "DualNorm",
    "EdgeFeatures",
    "Grid2D",
    "Image",
    "LandmarkSet",
    "MetricField",
    "PiecewiseConstant",
    "Polyline",
    "RandersGeodesicSegmenter",
    "RandersNorm",
    "ScalarField",
    "SegmentationConfig",
    "TensorField2",
    "TubularDomain",
    "VectorField2",
    "Wall",
    "adaptive_tube",
    "anisotropy",
    "assemble_metric",
    "backtrack",
    "build_stencils",
    "build_tensor_field",
    "build_tube",
    "check_compatibility",
    "decompose",
    "divergence",
    "dual",
    "edge_features",
    "euclidean_distance_to_contour",
    "evolve_circular",
    "evolve_landmarks",
    "fmm_solve",
    "hopf_lax_update",
    "hybrid_energy",
    "jaccard",
    "load_image",
    "make_wall",
    "omega_by_convolution",
    "omega_by_poisson",
    "partial_two_source",
    "psi_rescale",
    "rasterize_contour",
    "region_energy",
    "sample_landmarks",
    "shape_gradient",
    "solve_with_wall",
    "winding_number",
]

__version__ = "0.1.0"
