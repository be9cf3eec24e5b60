"""
Data model for posed RGB-D scenes, queries and ground truth.
All types are immutable after construction and safe to share across workers.
"""
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from sceneground.errors import PoseValidationError

FRAME_ID_PATTERN = re.compile(r"^[0-9]{5}$")
ORTHONORMAL_TOL = 1e-6


def format_frame_id(index: int) -> str:
    """Zero-padded 5-digit frame id."""
    return f"{index:05d}"


class CameraIntrinsics(BaseModel):
    """Pinhole intrinsics for one raster resolution."""

    model_config = ConfigDict(frozen=True)

    fx: float = Field(gt=0)
    fy: float = Field(gt=0)
    cx: float
    cy: float
    width: int = Field(gt=0)
    height: int = Field(gt=0)

    @model_validator(mode="after")
    def _principal_point_inside(self) -> "CameraIntrinsics":
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} raster"
            )
        return self

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]],
            dtype=np.float64,
        )

    @classmethod
    def from_matrix(cls, k: np.ndarray, width: int, height: int) -> "CameraIntrinsics":
        """Read fx=K[0][0], fy=K[1][1], cx=K[0][2], cy=K[1][2] from a 3x3 or 4x4 matrix."""
        return cls(
            fx=float(k[0, 0]), fy=float(k[1, 1]),
            cx=float(k[0, 2]), cy=float(k[1, 2]),
            width=width, height=height,
        )


@dataclass(frozen=True, eq=False)
class Pose:
    """World-from-camera rigid transform (4x4, meters)."""

    world_from_camera: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.asarray(self.world_from_camera, dtype=np.float64)
        if matrix.shape != (4, 4):
            raise PoseValidationError(f"pose must be 4x4, got {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise PoseValidationError("pose contains non-finite values")
        rotation = matrix[:3, :3]
        if not np.allclose(rotation @ rotation.T, np.eye(3), atol=ORTHONORMAL_TOL, rtol=0.0):
            raise PoseValidationError("pose rotation is not orthonormal")
        if abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOL:
            raise PoseValidationError("pose rotation determinant is not +1")
        matrix.setflags(write=False)
        object.__setattr__(self, "world_from_camera", matrix)

    @property
    def rotation(self) -> np.ndarray:
        return self.world_from_camera[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.world_from_camera[:3, 3]

    def transform_points(self, points_cam: np.ndarray) -> np.ndarray:
        """Map (N, 3) camera-frame points to world frame."""
        return points_cam @ self.rotation.T + self.translation

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(4))


@dataclass(frozen=True, eq=False)
class Mask2D:
    """Binary instance mask on a frame raster."""

    frame_id: str
    bitmap: np.ndarray

    def __post_init__(self) -> None:
        bitmap = np.asarray(self.bitmap, dtype=bool)
        if bitmap.ndim != 2:
            raise ValueError(f"mask must be 2D, got shape {bitmap.shape}")
        object.__setattr__(self, "bitmap", bitmap)

    @property
    def is_empty(self) -> bool:
        return not bool(self.bitmap.any())

    @property
    def pixel_count(self) -> int:
        return int(self.bitmap.sum())

    @property
    def shape(self) -> Tuple[int, int]:
        return self.bitmap.shape  # type: ignore[return-value]

    def with_bitmap(self, bitmap: np.ndarray) -> "Mask2D":
        return Mask2D(frame_id=self.frame_id, bitmap=bitmap)


@dataclass(frozen=True, eq=False)
class Frame:
    """One posed RGB-D observation."""

    frame_id: str
    color: np.ndarray
    depth: np.ndarray
    color_intrinsics: CameraIntrinsics
    depth_intrinsics: CameraIntrinsics
    pose: Pose

    def __post_init__(self) -> None:
        if not FRAME_ID_PATTERN.match(self.frame_id):
            raise ValueError(f"frame_id must be 5 digits, got {self.frame_id!r}")
        color = np.asarray(self.color, dtype=np.uint8)
        depth = np.asarray(self.depth, dtype=np.uint16)
        if color.ndim != 3 or color.shape[2] != 3:
            raise ValueError(f"color raster must be HxWx3, got {color.shape}")
        if depth.shape != (self.depth_intrinsics.height, self.depth_intrinsics.width):
            raise ValueError(
                f"depth {depth.shape} does not match intrinsics "
                f"{self.depth_intrinsics.width}x{self.depth_intrinsics.height}"
            )
        if color.shape[:2] != (self.color_intrinsics.height, self.color_intrinsics.width):
            raise ValueError(
                f"color {color.shape[:2]} does not match intrinsics "
                f"{self.color_intrinsics.width}x{self.color_intrinsics.height}"
            )
        color.setflags(write=False)
        depth.setflags(write=False)
        object.__setattr__(self, "color", color)
        object.__setattr__(self, "depth", depth)

    def depth_meters(self, depth_scale: float = 1000.0) -> np.ndarray:
        """Depth in meters; invalid (0) pixels become NaN."""
        meters = self.depth.astype(np.float64) / depth_scale
        meters[self.depth == 0] = np.nan
        return meters


@dataclass(frozen=True, eq=False)
class Scene:
    """Ordered posed frames of one scanned scene."""

    scene_id: str
    frames: Tuple[Frame, ...]

    def __post_init__(self) -> None:
        frames = tuple(self.frames)
        if not frames:
            raise ValueError(f"scene {self.scene_id} has no frames")
        ids = [f.frame_id for f in frames]
        if any(a >= b for a, b in zip(ids, ids[1:])):
            raise ValueError(f"frame ids of scene {self.scene_id} are not strictly increasing")
        object.__setattr__(self, "frames", frames)

    @property
    def frame_ids(self) -> List[str]:
        return [f.frame_id for f in self.frames]

    def frame(self, frame_id: str) -> Frame:
        for f in self.frames:
            if f.frame_id == frame_id:
                return f
        raise KeyError(frame_id)


class Aabb3(BaseModel):
    """Axis-aligned 3D box in world coordinates (meters)."""

    model_config = ConfigDict(frozen=True)

    min: Tuple[float, float, float]
    max: Tuple[float, float, float]

    @model_validator(mode="after")
    def _ordered(self) -> "Aabb3":
        if any(lo > hi for lo, hi in zip(self.min, self.max)):
            raise ValueError(f"box min {self.min} exceeds max {self.max}")
        return self

    @classmethod
    def from_list(cls, values: Sequence[float]) -> "Aabb3":
        """From [xmin, ymin, zmin, xmax, ymax, zmax]."""
        if len(values) != 6:
            raise ValueError(f"box needs 6 values, got {len(values)}")
        v = [float(x) for x in values]
        return cls(min=(v[0], v[1], v[2]), max=(v[3], v[4], v[5]))

    def as_list(self) -> List[float]:
        return [*self.min, *self.max]

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.min) + np.asarray(self.max)) / 2.0

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.max) - np.asarray(self.min)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    def corners(self) -> np.ndarray:
        lo, hi = np.asarray(self.min), np.asarray(self.max)
        return np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])


@dataclass(frozen=True, eq=False)
class Query:
    """A grounding query with optional ground truth."""

    query_id: str
    scene_id: str
    text: str
    gt_box: Optional[Aabb3] = None
    gt_mask_per_frame: Dict[str, Mask2D] = field(default_factory=dict)
    splits: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.text or not self.text.strip():
            raise ValueError(f"query {self.query_id} has empty text")
        object.__setattr__(self, "splits", tuple(self.splits))
