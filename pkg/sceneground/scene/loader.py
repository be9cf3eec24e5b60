"""
On-disk ingestion for posed RGB-D scenes and query files.

Layout under <root>/<scene_id>/:
    color/<frame_id>.jpg|.png     8-bit RGB
    depth/<frame_id>.png          16-bit grayscale, millimeters, 0 = invalid
    pose/<frame_id>.txt           4x4 row-major world-from-camera
    intrinsics_color.txt          4x4 row-major K
    intrinsics_depth.txt          4x4 row-major K
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from PIL import Image

from sceneground.errors import IngestionError, PoseValidationError
from sceneground.scene.models import (
    FRAME_ID_PATTERN,
    Aabb3,
    CameraIntrinsics,
    Frame,
    Mask2D,
    Pose,
    Query,
    Scene,
)

logger = logging.getLogger(__name__)

COLOR_SUFFIXES = (".jpg", ".png")


def _read_matrix(path: Path) -> np.ndarray:
    try:
        matrix = np.loadtxt(path, dtype=np.float64)
    except (OSError, ValueError) as e:
        raise IngestionError(f"could not read matrix ({e})", path) from e
    if matrix.shape != (4, 4):
        raise IngestionError(f"expected a 4x4 matrix, got {matrix.shape}", path)
    return matrix


def _read_image(path: Path) -> Image.Image:
    try:
        image = Image.open(path)
        image.load()
    except (OSError, ValueError) as e:
        raise IngestionError(f"could not read image ({e})", path) from e
    return image


def read_mask_png(path: Path, frame_id: str) -> Mask2D:
    """Binary mask from a PNG; any nonzero pixel is true."""
    image = _read_image(path)
    return Mask2D(frame_id=frame_id, bitmap=np.asarray(image.convert("L")) > 0)


def write_mask_png(mask: Mask2D, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(mask.bitmap.astype(np.uint8) * 255).save(path)


def _color_path(color_dir: Path, frame_id: str) -> Path:
    for suffix in COLOR_SUFFIXES:
        candidate = color_dir / f"{frame_id}{suffix}"
        if candidate.is_file():
            return candidate
    raise IngestionError("missing color image", color_dir / f"{frame_id}.jpg")


def _check_frame_names(directory: Path) -> None:
    for path in sorted(directory.iterdir()):
        if path.is_file() and not path.name.startswith(".") and not FRAME_ID_PATTERN.match(path.stem):
            raise IngestionError(f"frame name {path.stem!r} is not a 5-digit id", path)


def load_scene(root_path: Union[str, Path], scene_id: str) -> Scene:
    """
    Load every frame of a scene directory, sorted by frame_id.

    Raises:
        IngestionError: missing or corrupt file, or a malformed frame name
        PoseValidationError: a pose rotation that is not orthonormal
    """
    scene_dir = Path(root_path) / scene_id
    if not scene_dir.is_dir():
        raise IngestionError("scene directory not found", scene_dir)

    for sub in ("color", "depth", "pose"):
        if not (scene_dir / sub).is_dir():
            raise IngestionError(f"missing {sub} directory", scene_dir / sub)

    for sub in ("color", "depth"):
        _check_frame_names(scene_dir / sub)
    pose_files = sorted((scene_dir / "pose").glob("*.txt"))
    if not pose_files:
        raise IngestionError("no pose files", scene_dir / "pose")

    k_color = _read_matrix(scene_dir / "intrinsics_color.txt")
    k_depth = _read_matrix(scene_dir / "intrinsics_depth.txt")

    frames: List[Frame] = []
    color_intrinsics: Optional[CameraIntrinsics] = None
    depth_intrinsics: Optional[CameraIntrinsics] = None

    for pose_path in pose_files:
        frame_id = pose_path.stem
        if not FRAME_ID_PATTERN.match(frame_id):
            raise IngestionError(f"frame name {frame_id!r} is not a 5-digit id", pose_path)

        color_img = _read_image(_color_path(scene_dir / "color", frame_id)).convert("RGB")
        depth_path = scene_dir / "depth" / f"{frame_id}.png"
        if not depth_path.is_file():
            raise IngestionError("missing depth image", depth_path)
        depth = np.asarray(_read_image(depth_path)).astype(np.uint16)
        if depth.ndim != 2:
            raise IngestionError("depth image must be single channel", depth_path)

        if color_intrinsics is None:
            try:
                color_intrinsics = CameraIntrinsics.from_matrix(k_color, *color_img.size)
                depth_intrinsics = CameraIntrinsics.from_matrix(k_depth, depth.shape[1], depth.shape[0])
            except ValueError as e:
                raise IngestionError(f"invalid intrinsics ({e})", scene_dir) from e

        try:
            pose = Pose(_read_matrix(pose_path))
        except PoseValidationError as e:
            raise PoseValidationError(str(e), pose_path) from e

        try:
            frames.append(Frame(
                frame_id=frame_id,
                color=np.asarray(color_img),
                depth=depth,
                color_intrinsics=color_intrinsics,
                depth_intrinsics=depth_intrinsics,
                pose=pose,
            ))
        except ValueError as e:
            raise IngestionError(str(e), pose_path) from e

    logger.info("Loaded scene %s with %d frames", scene_id, len(frames))
    return Scene(scene_id=scene_id, frames=tuple(frames))


def _write_k(intrinsics: CameraIntrinsics, path: Path) -> None:
    k = np.eye(4)
    k[:3, :3] = intrinsics.matrix
    np.savetxt(path, k)


def save_scene(scene: Scene, root_path: Union[str, Path]) -> Path:
    """Write a scene in the layout load_scene reads. Color is stored losslessly as PNG."""
    scene_dir = Path(root_path) / scene.scene_id
    for sub in ("color", "depth", "pose"):
        (scene_dir / sub).mkdir(parents=True, exist_ok=True)

    first = scene.frames[0]
    _write_k(first.color_intrinsics, scene_dir / "intrinsics_color.txt")
    _write_k(first.depth_intrinsics, scene_dir / "intrinsics_depth.txt")

    for frame in scene.frames:
        Image.fromarray(np.ascontiguousarray(frame.color)).save(scene_dir / "color" / f"{frame.frame_id}.png")
        Image.fromarray(np.ascontiguousarray(frame.depth)).save(scene_dir / "depth" / f"{frame.frame_id}.png")
        np.savetxt(scene_dir / "pose" / f"{frame.frame_id}.txt", frame.pose.world_from_camera)
    return scene_dir


def sample_frames(scene: Scene, stride: int) -> Scene:
    """Keep frames at sequence indices 0, stride, 2*stride, ... (frame ids preserved)."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if stride == 1:
        return scene
    return Scene(scene_id=scene.scene_id, frames=scene.frames[::stride])


def load_queries(path: Union[str, Path]) -> List[Query]:
    """
    Read a JSON-lines query file.

    Each line: {query_id, scene_id, text, gt_box?: [xmin,ymin,zmin,xmax,ymax,zmax],
    splits?: [...], gt_masks?: {frame_id: png path relative to the file}}
    """
    path = Path(path)
    if not path.is_file():
        raise IngestionError("query file not found", path)

    queries: List[Query] = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            gt_box = Aabb3.from_list(record["gt_box"]) if record.get("gt_box") is not None else None
            masks: Dict[str, Mask2D] = {
                frame_id: read_mask_png(path.parent / rel, frame_id)
                for frame_id, rel in (record.get("gt_masks") or {}).items()
            }
            queries.append(Query(
                query_id=str(record["query_id"]),
                scene_id=str(record["scene_id"]),
                text=record["text"],
                gt_box=gt_box,
                gt_mask_per_frame=masks,
                splits=tuple(record.get("splits") or ()),
            ))
        except (KeyError, TypeError, ValueError) as e:
            raise IngestionError(f"invalid query on line {line_no} ({e})", path) from e
    return queries
