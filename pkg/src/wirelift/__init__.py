"""wirelift: compact 3D wireframes of Manhattan scenes from 2.5D heatmaps.

Pipeline stages: synthetic scene generation with exact ground truth,
heatmap encoding, heatmap vectorization, vanishing-point self-calibration,
convex depth refinement, and evaluation metrics. See README.md.
"""

from wirelift.core import (
    CameraModel,
    JunctionType,
    VanishingPoints,
    Vertex,
    Violation,
    Wireframe,
    calibrated_ray,
    normalize_vp,
    project,
    validate,
    wireframe_from_json,
    wireframe_to_json,
)

__version__ = "0.1.0"

__all__ = [
    "CameraModel",
    "JunctionType",
    "VanishingPoints",
    "Vertex",
    "Violation",
    "Wireframe",
    "calibrated_ray",
    "normalize_vp",
    "project",
    "validate",
    "wireframe_from_json",
    "wireframe_to_json",
    "__version__",
]
