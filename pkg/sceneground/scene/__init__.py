"""Posed RGB-D scene model and ingestion."""
from sceneground.scene.loader import load_queries, load_scene, sample_frames, save_scene
from sceneground.scene.models import (
    Aabb3,
    CameraIntrinsics,
    Frame,
    Mask2D,
    Pose,
    Query,
    Scene,
    format_frame_id,
)

__all__ = [
    "Aabb3",
    "CameraIntrinsics",
    "Frame",
    "Mask2D",
    "Pose",
    "Query",
    "Scene",
    "format_frame_id",
    "load_queries",
    "load_scene",
    "sample_frames",
    "save_scene",
]
