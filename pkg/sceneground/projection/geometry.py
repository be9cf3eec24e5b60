"""
Point-cloud geometry: depth unprojection, Chamfer distance, statistical outlier removal, AABB.
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from sceneground.errors import ProjectionError
from sceneground.projection.morphology import resample_mask_nearest
from sceneground.scene.models import Aabb3, Frame, Mask2D

# Slack on the outlier threshold so points whose mean distance equals mu + r*sigma
# up to float rounding are kept.
OUTLIER_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class PointCloud3:
    """(N, 3) world-frame points in meters."""

    points: np.ndarray

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise ValueError("point cloud contains non-finite coordinates")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    @classmethod
    def empty(cls) -> "PointCloud3":
        return cls(np.zeros((0, 3)))

    @classmethod
    def union(cls, clouds: Sequence["PointCloud3"]) -> "PointCloud3":
        if not clouds:
            return cls.empty()
        return cls(np.concatenate([c.points for c in clouds], axis=0))


def unproject_mask(frame: Frame, mask: Mask2D, depth_scale: float = 1000.0) -> PointCloud3:
    """
    Lift every mask pixel with valid depth to world space.

    The mask is resampled to the depth raster first when resolutions differ.
    p_cam = d * K^-1 (u + 0.5, v + 0.5, 1), p_world = world_from_camera * p_cam.
    """
    k = frame.depth_intrinsics
    if mask.shape != frame.depth.shape:
        mask = resample_mask_nearest(mask, k.width, k.height)

    depth = frame.depth_meters(depth_scale)
    valid = mask.bitmap & np.isfinite(depth)
    v, u = np.nonzero(valid)
    if u.size == 0:
        return PointCloud3.empty()

    d = depth[v, u]
    x = (u + 0.5 - k.cx) / k.fx * d
    y = (v + 0.5 - k.cy) / k.fy * d
    points_cam = np.stack([x, y, d], axis=1)
    return PointCloud3(frame.pose.transform_points(points_cam))


def chamfer_l2(a: PointCloud3, b: PointCloud3) -> float:
    """Symmetric mean of Euclidean nearest-neighbor distances, in meters."""
    if a.is_empty or b.is_empty:
        raise ValueError("chamfer distance needs two nonempty clouds")
    a_to_b, _ = cKDTree(b.points).query(a.points, k=1)
    b_to_a, _ = cKDTree(a.points).query(b.points, k=1)
    return 0.5 * (float(np.mean(a_to_b)) + float(np.mean(b_to_a)))


def neighbor_mean_distances(points: np.ndarray, nb: int) -> np.ndarray:
    """
    Mean distance from each point to its nb nearest points in the cloud.

    The point itself is one of the nb, at distance zero, as in Open3D's remove_statistical_outlier.
    """
    distances, _ = cKDTree(points).query(points, k=nb)
    return distances.reshape(len(points), nb).mean(axis=1)


def remove_statistical_outliers(cloud: PointCloud3, nb: int, std_ratio: float) -> PointCloud3:
    """
    Drop points whose mean nb-neighbor distance exceeds mu + std_ratio * sigma.

    mu and sigma (sample standard deviation) are taken over all points' mean distances.
    Clouds with at most nb points are returned unchanged.
    """
    if nb < 1:
        raise ValueError(f"nb must be >= 1, got {nb}")
    if len(cloud) <= nb:
        return cloud

    mean_d = neighbor_mean_distances(cloud.points, nb)
    mu = float(mean_d.mean())
    sigma = float(mean_d.std(ddof=1))
    keep = mean_d <= mu + std_ratio * sigma + OUTLIER_EPS
    return PointCloud3(cloud.points[keep])


def aabb_of(cloud: PointCloud3) -> Aabb3:
    if cloud.is_empty:
        raise ProjectionError("no valid points")
    lo = cloud.points.min(axis=0)
    hi = cloud.points.max(axis=0)
    return Aabb3(min=tuple(float(x) for x in lo), max=tuple(float(x) for x in hi))
