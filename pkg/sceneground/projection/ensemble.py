"""
Multi-view ensemble projection.
Cleans each view's mask, lifts it to 3D, rejects views inconsistent with the anchor,
filters outliers from the union and returns its axis-aligned box.
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel

from sceneground.config import ProjectionConfig
from sceneground.errors import ProjectionError
from sceneground.projection.geometry import (
    PointCloud3,
    aabb_of,
    chamfer_l2,
    remove_statistical_outliers,
    unproject_mask,
)
from sceneground.projection.morphology import erode_mask, top_components
from sceneground.scene.models import Aabb3, Frame, Mask2D

logger = logging.getLogger(__name__)


class ViewStats(BaseModel):
    """Per-view bookkeeping for one projected mask."""

    frame_id: str
    role: str  # anchor | matched
    mask_pixels: int
    cleaned_pixels: int
    points: int
    chamfer: Optional[float] = None
    accepted: bool
    reason: Optional[str] = None


class ProjectionStats(BaseModel):
    views: List[ViewStats]
    union_points: int
    filtered_points: int

    @property
    def views_used(self) -> List[str]:
        return [v.frame_id for v in self.views if v.accepted]

    @property
    def views_rejected(self) -> List[Dict[str, object]]:
        return [
            {"frame_id": v.frame_id, "chamfer": v.chamfer, "reason": v.reason}
            for v in self.views
            if not v.accepted
        ]

    def point_counts(self) -> Dict[str, int]:
        counts = {v.frame_id: v.points for v in self.views if v.accepted}
        counts["union"] = self.union_points
        counts["filtered"] = self.filtered_points
        return counts


def clean_mask(mask: Mask2D, config: ProjectionConfig) -> Mask2D:
    """Erode, then keep the largest components. Passes the mask through when morphology is off."""
    if not config.morphology:
        return mask
    return top_components(erode_mask(mask, config.erosion_kernel), config.top_components)


def project_view(
    frame: Frame,
    mask: Mask2D,
    config: ProjectionConfig,
    depth_scale: float = 1000.0,
) -> Tuple[Mask2D, PointCloud3]:
    cleaned = clean_mask(mask, config)
    return cleaned, unproject_mask(frame, cleaned, depth_scale)


def ensemble_project(
    anchor: Tuple[Frame, Mask2D],
    matched: Sequence[Tuple[Frame, Mask2D]],
    config: ProjectionConfig,
    depth_scale: float = 1000.0,
) -> Tuple[Aabb3, ProjectionStats]:
    """
    Fuse the anchor view with matched views into one box.

    Raises:
        ProjectionError: the anchor mask yields no valid 3D points
    """
    anchor_frame, anchor_mask = anchor
    anchor_clean, anchor_cloud = project_view(anchor_frame, anchor_mask, config, depth_scale)
    if anchor_cloud.is_empty:
        raise ProjectionError(f"anchor view {anchor_frame.frame_id} has no valid points after cleaning")

    views = [ViewStats(
        frame_id=anchor_frame.frame_id,
        role="anchor",
        mask_pixels=anchor_mask.pixel_count,
        cleaned_pixels=anchor_clean.pixel_count,
        points=len(anchor_cloud),
        accepted=True,
    )]
    accepted = [anchor_cloud]

    if not config.ensemble and matched:
        logger.debug("Ensemble disabled, ignoring %d matched views", len(matched))
        matched = []

    for frame, mask in sorted(matched, key=lambda fm: fm[0].frame_id):
        cleaned, cloud = project_view(frame, mask, config, depth_scale)
        stat = dict(
            frame_id=frame.frame_id,
            role="matched",
            mask_pixels=mask.pixel_count,
            cleaned_pixels=cleaned.pixel_count,
            points=len(cloud),
        )
        if cloud.is_empty:
            logger.warning("Excluding view %s: no valid points after cleaning", frame.frame_id)
            views.append(ViewStats(**stat, accepted=False, reason="empty"))
            continue

        distance = chamfer_l2(anchor_cloud, cloud)
        if distance > config.chamfer_threshold:
            logger.warning(
                "Excluding view %s: chamfer %.4f m > %.4f m",
                frame.frame_id, distance, config.chamfer_threshold,
            )
            views.append(ViewStats(**stat, chamfer=distance, accepted=False, reason="chamfer"))
            continue

        views.append(ViewStats(**stat, chamfer=distance, accepted=True))
        accepted.append(cloud)

    union = PointCloud3.union(accepted)
    if config.filtering:
        filtered = remove_statistical_outliers(union, config.outlier_nb, config.outlier_std_ratio)
    else:
        filtered = union
    box = aabb_of(filtered)

    stats = ProjectionStats(views=views, union_points=len(union), filtered_points=len(filtered))
    logger.debug(
        "Projected %d/%d views, %d -> %d points",
        len(stats.views_used), len(views), stats.union_points, stats.filtered_points,
    )
    return box, stats
