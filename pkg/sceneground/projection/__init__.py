"""Multi-view ensemble projection from 2D masks to 3D boxes."""
from sceneground.projection.ensemble import ProjectionStats, ViewStats, ensemble_project
from sceneground.projection.geometry import (
    PointCloud3,
    aabb_of,
    chamfer_l2,
    remove_statistical_outliers,
    unproject_mask,
)
from sceneground.projection.morphology import erode_mask, resample_mask_nearest, top_components

__all__ = [
    "PointCloud3",
    "ProjectionStats",
    "ViewStats",
    "aabb_of",
    "chamfer_l2",
    "ensemble_project",
    "erode_mask",
    "remove_statistical_outliers",
    "resample_mask_nearest",
    "top_components",
    "unproject_mask",
]
