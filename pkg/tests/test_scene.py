"""Tests for the scene model and on-disk ingestion."""
import json
import shutil

import numpy as np
import pytest

from sceneground.errors import IngestionError, PoseValidationError
from sceneground.scene import (
    Aabb3,
    CameraIntrinsics,
    Frame,
    Mask2D,
    Pose,
    Scene,
    format_frame_id,
    load_queries,
    load_scene,
    sample_frames,
    save_scene,
)
from sceneground.scene.loader import write_mask_png
from tests.synthetic import SCENE_ID


def test_format_frame_id_is_zero_padded():
    assert format_frame_id(0) == "00000"
    assert format_frame_id(42) == "00042"


def test_intrinsics_reject_principal_point_outside_raster():
    with pytest.raises(ValueError):
        CameraIntrinsics(fx=100, fy=100, cx=700, cy=10, width=640, height=480)


def test_intrinsics_read_from_4x4_matrix():
    k = np.eye(4)
    k[0, 0], k[1, 1], k[0, 2], k[1, 2] = 577.6, 578.7, 318.9, 242.7
    intrinsics = CameraIntrinsics.from_matrix(k, 640, 480)
    assert (intrinsics.fx, intrinsics.fy, intrinsics.cx, intrinsics.cy) == (577.6, 578.7, 318.9, 242.7)


def test_pose_rejects_non_orthonormal_rotation():
    matrix = np.eye(4)
    matrix[0, 0] = 1.1
    with pytest.raises(PoseValidationError):
        Pose(matrix)


def test_pose_rejects_reflection():
    with pytest.raises(PoseValidationError):
        Pose(np.diag([1.0, 1.0, -1.0, 1.0]))


def test_pose_transforms_points():
    matrix = np.eye(4)
    matrix[:3, 3] = [1.0, 2.0, 3.0]
    points = Pose(matrix).transform_points(np.array([[0.0, 0.0, 1.0]]))
    np.testing.assert_allclose(points, [[1.0, 2.0, 4.0]])


def test_depth_meters_marks_invalid_pixels_nan(room):
    frame = room.scene.frames[0]
    meters = frame.depth_meters(1000.0)
    assert np.isnan(meters[frame.depth == 0]).all()
    valid = frame.depth > 0
    np.testing.assert_allclose(meters[valid], frame.depth[valid] / 1000.0)


def test_aabb_rejects_inverted_box():
    with pytest.raises(ValueError):
        Aabb3.from_list([1, 0, 0, 0, 1, 1])


def test_save_then_load_is_bit_exact(room, tmp_path):
    save_scene(room.scene, tmp_path)
    loaded = load_scene(tmp_path, SCENE_ID)
    assert loaded.frame_ids == room.scene.frame_ids
    for original, reread in zip(room.scene.frames, loaded.frames):
        assert np.array_equal(original.color, reread.color)
        assert np.array_equal(original.depth, reread.depth)
        np.testing.assert_allclose(original.pose.world_from_camera, reread.pose.world_from_camera, atol=1e-12)
        assert reread.depth_intrinsics == original.depth_intrinsics


def test_missing_depth_directory_names_the_path(room, tmp_path):
    scene_dir = save_scene(room.scene, tmp_path)
    shutil.rmtree(scene_dir / "depth")
    with pytest.raises(IngestionError) as info:
        load_scene(tmp_path, SCENE_ID)
    assert info.value.path == str(scene_dir / "depth")


def test_missing_depth_image_is_reported(room, tmp_path):
    scene_dir = save_scene(room.scene, tmp_path)
    (scene_dir / "depth" / "00003.png").unlink()
    with pytest.raises(IngestionError, match="00003.png"):
        load_scene(tmp_path, SCENE_ID)


@pytest.mark.parametrize("sub, name", [("color", "123.jpg"), ("depth", "123.png"), ("color", "frame_00001.png")])
def test_malformed_frame_file_name_is_rejected(room, tmp_path, sub, name):
    scene_dir = save_scene(room.scene, tmp_path)
    (scene_dir / sub / name).write_bytes(b"")
    with pytest.raises(IngestionError, match="is not a 5-digit id") as info:
        load_scene(tmp_path, SCENE_ID)
    assert info.value.path == str(scene_dir / sub / name)


def test_bad_pose_file_raises_pose_error(room, tmp_path):
    scene_dir = save_scene(room.scene, tmp_path)
    np.savetxt(scene_dir / "pose" / "00002.txt", np.diag([2.0, 1.0, 1.0, 1.0]))
    with pytest.raises(PoseValidationError):
        load_scene(tmp_path, SCENE_ID)


def test_sample_frames_keeps_every_stride_th_frame(room):
    sampled = sample_frames(room.scene, 5)
    assert sampled.frame_ids == ["00000", "00005", "00010"]
    assert sample_frames(room.scene, 1) is room.scene


TINY = CameraIntrinsics(fx=4.0, fy=4.0, cx=2.0, cy=2.0, width=4, height=4)


def sequence(count: int, step: int = 1) -> Scene:
    color = np.zeros((4, 4, 3), dtype=np.uint8)
    depth = np.zeros((4, 4), dtype=np.uint16)
    frames = tuple(Frame(format_frame_id(step * k), color, depth, TINY, TINY, Pose.identity()) for k in range(count))
    return Scene(scene_id="scene0003_00", frames=frames)


def test_sample_frames_counts():
    assert len(sample_frames(sequence(100), 20).frames) == 5
    scene = sequence(7, step=10)
    assert sample_frames(scene, 3).frame_ids == [scene.frame_ids[i] for i in (0, 3, 6)]
    with pytest.raises(ValueError):
        sample_frames(scene, 0)


@pytest.mark.parametrize("count", [1, 7, 30, 61])
@pytest.mark.parametrize("a, b", [(1, 4), (2, 3), (3, 2), (5, 5)])
def test_sample_frames_strides_compose(count, a, b):
    scene = sequence(count)
    assert sample_frames(sample_frames(scene, a), b).frame_ids == sample_frames(scene, a * b).frame_ids


def test_load_queries_reads_ground_truth(tmp_path):
    mask = Mask2D(frame_id="00004", bitmap=np.eye(8, dtype=bool))
    write_mask_png(mask, tmp_path / "masks" / "q1_00004.png")
    path = tmp_path / "queries.jsonl"
    path.write_text(
        json.dumps({
            "query_id": "q1",
            "scene_id": SCENE_ID,
            "text": "the red chair near the table",
            "gt_box": [0, 0, 0, 1, 1, 1],
            "splits": ["multiple", "hard"],
            "gt_masks": {"00004": "masks/q1_00004.png"},
        }) + "\n\n"
        + json.dumps({"query_id": "q2", "scene_id": SCENE_ID, "text": "the cabinet"}) + "\n",
        encoding="utf-8",
    )

    first, second = load_queries(path)
    assert first.gt_box == Aabb3.from_list([0, 0, 0, 1, 1, 1])
    assert first.splits == ("multiple", "hard")
    assert np.array_equal(first.gt_mask_per_frame["00004"].bitmap, mask.bitmap)
    assert second.gt_box is None and second.splits == ()


def test_load_queries_rejects_empty_text(tmp_path):
    path = tmp_path / "queries.jsonl"
    path.write_text(json.dumps({"query_id": "q1", "scene_id": SCENE_ID, "text": "  "}) + "\n", encoding="utf-8")
    with pytest.raises(IngestionError, match="line 1"):
        load_queries(path)
