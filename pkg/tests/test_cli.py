"""Tests for the sceneground command line."""
import csv
import json
import shutil
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from sceneground.cli import main, parse_layouts
from sceneground.errors import ConfigError
from sceneground.scene.loader import save_scene, write_mask_png
from sceneground.scene.models import Mask2D
from sceneground.stitching import Layout
from tests.synthetic import SCENE_ID, analysis_reply, image_reply, object_reply, write_fixtures, write_queries

CONFIG = """\
frame_stride = 1
cell_size = [64, 48]

[projection]
erosion_kernel = 3

[backend]
retry_base_delay_s = 0.0

[bench]
image_size = [96, 72]
"""

TARGETS = {"q1": 3, "q2": 4, "q3": 0}


@pytest.fixture(scope="module")
def workspace(room, tmp_path_factory) -> Path:
    """A saved scene, perception fixtures, queries, a per-query script and a config file."""
    root = tmp_path_factory.mktemp("cli")
    save_scene(room.scene, root / "scenes")
    write_fixtures(room, root / "fixtures")

    records, scripts = [], {}
    for query_id, index in TARGETS.items():
        obj = room.objects[index]
        frame = room.best_frame(index)
        candidates = room.candidates(frame, obj.label)
        script = [analysis_reply(obj.label), image_reply(frame)]
        if len(candidates) > 1:
            script.append(object_reply(candidates.index(index)))
        scripts[query_id] = script
        records.append({"query_id": query_id, "scene_id": SCENE_ID, "text": f"the {obj.label}", "gt_box": obj.box.as_list()})

    write_queries(root / "queries.jsonl", records)
    (root / "script.json").write_text(json.dumps(scripts), encoding="utf-8")
    (root / "config.toml").write_text(CONFIG, encoding="utf-8")
    return root


def ground_args(ws: Path, out: Path, scene_root: Path = None):
    return [
        "ground",
        "--config", str(ws / "config.toml"),
        "--scene-root", str(scene_root or ws / "scenes"),
        "--queries", str(ws / "queries.jsonl"),
        "--script", str(ws / "script.json"),
        "--fixtures", str(ws / "fixtures"),
        "--out", str(out),
    ]


# =============================================================================
# GROUND + EVAL
# =============================================================================

def test_ground_then_eval(workspace, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(ground_args(workspace, out)) == 0

    results = [json.loads(line) for line in (out / "results.jsonl").read_text(encoding="utf-8").splitlines()]
    assert [r["query_id"] for r in results] == ["q1", "q2", "q3"]
    assert all(r["status"] == "success" for r in results)
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "ground"
    assert manifest["config"]["projection"]["erosion_kernel"] == 3
    assert manifest["config"]["backend"]["kind"] == "scripted"
    assert "versions" in manifest
    assert {p.name for p in (out / "transcripts").iterdir()} == {"q1.json", "q2.json", "q3.json"}

    capsys.readouterr()
    assert main(["eval", "--results", str(out), "--queries", str(workspace / "queries.jsonl"), "--out", str(out)]) == 0
    table = capsys.readouterr().out
    assert table.splitlines()[1].split()[:3] == ["overall", "3", "100.0"]
    assert (out / "eval" / "report.txt").read_text(encoding="utf-8") == table
    assert len((out / "eval" / "records.jsonl").read_text(encoding="utf-8").splitlines()) == 3

    eval_manifest = json.loads((out / "eval" / "manifest.json").read_text(encoding="utf-8"))
    assert eval_manifest["command"] == "eval"
    assert "numpy" in eval_manifest["versions"]
    assert json.loads((out / "manifest.json").read_text(encoding="utf-8"))["command"] == "ground"


def test_eval_mask_iou(room, workspace, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(ground_args(workspace, out)) == 0
    results = {r["query_id"]: r for r in map(json.loads, (out / "results.jsonl").read_text().splitlines())}

    records = []
    for query_id, index in TARGETS.items():
        frame = results[query_id]["target_frame_id"]
        write_mask_png(room.object_mask(frame, index), tmp_path / "gt" / f"{query_id}.png")
        records.append({
            "query_id": query_id, "scene_id": SCENE_ID, "text": "x",
            "gt_box": room.objects[index].box.as_list(), "gt_masks": {frame: f"gt/{query_id}.png"},
        })
    write_queries(tmp_path / "masked.jsonl", records)

    capsys.readouterr()
    assert main(["eval", "--results", str(out), "--queries", str(tmp_path / "masked.jsonl"), "--mask-iou", "--out", str(out)]) == 0
    overall = capsys.readouterr().out.splitlines()[1].split()
    assert overall[:3] == ["overall", "3", "100.0"]
    assert overall[4:] == ["100.0", "100.0"]

    bad = records[0]["gt_masks"]
    frame = next(iter(bad))
    write_mask_png(Mask2D(frame_id=frame, bitmap=np.ones((10, 10), dtype=bool)), tmp_path / "gt" / "q1.png")
    assert main(["eval", "--results", str(out), "--queries", str(tmp_path / "masked.jsonl"), "--mask-iou", "--out", str(out)]) == 1
    assert "error:" in capsys.readouterr().err


def test_missing_depth_directory_fails(workspace, tmp_path, capsys):
    scenes = tmp_path / "scenes"
    shutil.copytree(workspace / "scenes", scenes)
    shutil.rmtree(scenes / SCENE_ID / "depth")

    assert main(ground_args(workspace, tmp_path / "run", scene_root=scenes)) == 1
    assert "missing depth directory" in capsys.readouterr().err


def test_eval_rejects_empty_results(workspace, tmp_path, capsys):
    empty = tmp_path / "results.jsonl"
    empty.write_text("", encoding="utf-8")
    assert main(["eval", "--results", str(empty), "--queries", str(workspace / "queries.jsonl"), "--out", str(tmp_path)]) == 1
    assert "results are empty" in capsys.readouterr().err


def test_eval_rejects_mismatched_ids(workspace, tmp_path, capsys):
    results = tmp_path / "results.jsonl"
    results.write_text(json.dumps({"query_id": "q9", "status": "failure"}) + "\n", encoding="utf-8")
    assert main(["eval", "--results", str(results), "--queries", str(workspace / "queries.jsonl"), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "no result for q1, q2, q3" in err and "no ground truth for q9" in err


def test_eval_nr3d(tmp_path, capsys):
    results = tmp_path / "results.jsonl"
    results.write_text(
        json.dumps({"query_id": "a", "status": "success", "box": [0, 0, 0, 1, 1, 1]}) + "\n"
        + json.dumps({"query_id": "b", "status": "failure", "box": None}) + "\n",
        encoding="utf-8",
    )
    targets = {
        "a": {"boxes": [[5, 5, 5, 6, 6, 6], [0, 0, 0, 1, 1, 1.2]], "target_index": 1},
        "b": {"boxes": [[0, 0, 0, 1, 1, 1]], "target_index": 0},
    }
    (tmp_path / "nr3d.json").write_text(json.dumps(targets), encoding="utf-8")

    assert main(["eval", "--results", str(results), "--nr3d", str(tmp_path / "nr3d.json"), "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "eval" / "nr3d.json").read_text()) == {"count": 2, "accuracy": 50.0}
    manifest = json.loads((tmp_path / "eval" / "manifest.json").read_text())
    assert manifest["command"] == "eval" and "versions" in manifest


# =============================================================================
# STITCH
# =============================================================================

def test_stitch_writes_composites_and_plan(workspace, tmp_path):
    frames = tmp_path / "frames"
    frames.mkdir()
    for k in range(7):
        Image.new("RGB", (80, 60), (30 * k, 40, 50)).save(frames / f"{k * 10:05d}.png")

    out = tmp_path / "stitched"
    args = ["stitch", "--config", str(workspace / "config.toml"), "--input", str(frames), "--soft-limit", "6", "--out", str(out)]
    assert main(args) == 0

    plan = json.loads((out / "plan.json").read_text(encoding="utf-8"))
    assert plan["soft_limit"] == 6
    placed = [frame_id for entry in plan["entries"] for _, frame_id in entry["cell_map"]]
    assert placed == [f"{k * 10:05d}" for k in range(7)]
    for entry in plan["entries"]:
        rows, cols = entry["layout"]
        with Image.open(out / entry["file"]) as img:
            assert img.size == (cols * 64, rows * 48)

    assert plan["strategy"] == "dynamic"
    assert plan["layout_counts"] == [[4, 1, 2]]
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "stitch"
    assert "versions" in manifest
    assert manifest["config"]["cell_size"] == [64, 48]


def test_stitch_strategy_flag(workspace, tmp_path):
    frames = tmp_path / "frames"
    frames.mkdir()
    for k in range(3):
        Image.new("RGB", (80, 60), (30 * k, 40, 50)).save(frames / f"{k:05d}.png")

    out = tmp_path / "single"
    args = ["stitch", "--config", str(workspace / "config.toml"), "--input", str(frames), "--strategy", "none", "--out", str(out)]
    assert main(args) == 0

    plan = json.loads((out / "plan.json").read_text(encoding="utf-8"))
    assert plan["layout_counts"] == [[1, 1, 3]]
    assert sorted(p.name for p in out.glob("stitched_*.png")) == [f"stitched_{k:02d}_1x1.png" for k in range(3)]
    assert json.loads((out / "manifest.json").read_text(encoding="utf-8"))["config"]["stitching"]["strategy"] == "none"


def test_stitch_rejects_an_empty_directory(tmp_path, capsys):
    (tmp_path / "frames").mkdir()
    assert main(["stitch", "--input", str(tmp_path / "frames"), "--out", str(tmp_path / "o")]) == 1
    assert "no images to stitch" in capsys.readouterr().err


# =============================================================================
# BENCH
# =============================================================================

def bench_args(workspace: Path, out: Path, *extra: str):
    return ["bench", "--config", str(workspace / "config.toml"), "--backend", "echo", "--count", "24",
            "--seed", "5", "--out", str(out), *extra]


def test_bench_sweep_with_echo_backend_is_deterministic(workspace, tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(bench_args(workspace, first, "--layouts", "4x1,2x2")) == 0
    assert main(bench_args(workspace, second, "--layouts", "4x1,2x2")) == 0

    text = (first / "sweep.csv").read_text(encoding="utf-8")
    assert text == (second / "sweep.csv").read_text(encoding="utf-8")
    assert text.splitlines() == [
        "layout_rows,layout_cols,images_per_request,accuracy,incomplete",
        "4,1,1,1.0000,0",
        "2,2,1,1.0000,0",
    ]
    assert (first / "suite.json").read_bytes() == (second / "suite.json").read_bytes()
    assert json.loads((first / "manifest.json").read_text())["seed"] == 5
    assert not (first / "suite").exists()


def test_bench_writes_suite_images_on_request(workspace, tmp_path):
    out = tmp_path / "images"
    assert main(bench_args(workspace, out, "--layouts", "4x1", "--write-images")) == 0
    suite = json.loads((out / "suite.json").read_text(encoding="utf-8"))
    assert sorted(p.stem for p in (out / "suite").glob("*.png")) == sorted(suite)
    with Image.open(out / "suite" / f"{next(iter(suite))}.png") as img:
        assert img.size == (96, 72)


def test_bench_timing_writes_one_row_per_copy_count(workspace, tmp_path):
    out = tmp_path / "timing"
    assert main(bench_args(workspace, out, "--timing", "--copies", "30", "--trials", "1")) == 0
    with open(out / "timing.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert [int(r["copies"]) for r in rows] == list(range(1, 31))
    assert all(r["failed_trials"] == "0" and r["mean_s"] for r in rows)


def test_parse_layouts():
    assert parse_layouts("4x1, 2X4,") == [Layout(rows=4, cols=1), Layout(rows=2, cols=4)]
    with pytest.raises(ConfigError):
        parse_layouts("4by1")
    with pytest.raises(ConfigError):
        parse_layouts(" , ")


def test_global_flags_after_the_subcommand(workspace, tmp_path):
    out = tmp_path / "late"
    args = ["bench", "--backend", "echo", "--count", "8", "--layouts", "4x1",
            "--config", str(workspace / "config.toml"), "--out", str(out), "--jobs", "2"]
    assert main(args) == 0
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["config"]["jobs"] == 2
