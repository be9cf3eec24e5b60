"""Tests for the output-directory result store."""
import json

import numpy as np
import pytest

from sceneground.errors import IngestionError
from sceneground.scene.loader import read_mask_png
from sceneground.scene.models import Mask2D
from sceneground.storage import LocalResultStore, read_results_file


@pytest.fixture
async def store(tmp_path):
    store = LocalResultStore(tmp_path / "out")
    await store.initialize()
    return store


async def test_layout_and_canonical_json(store):
    await store.save_result("q2", {"query_id": "q2", "status": "success", "box": [0, 0, 0, 1, 1, 1]})
    await store.save_timing("q2", {"total": 1.5})
    await store.save_transcript("q2", {"query_id": "q2", "messages": []})

    text = (store.out_dir / "results" / "q2.json").read_text(encoding="utf-8")
    assert text.endswith("}\n")
    assert text.index('"box"') < text.index('"query_id"') < text.index('"status"')
    assert json.loads((store.out_dir / "timing" / "q2.json").read_text()) == {"total": 1.5}
    assert not list(store.out_dir.rglob("*.tmp"))


async def test_results_index_is_sorted_by_query_id(store):
    for qid in ("q3", "q1", "q2"):
        await store.save_result(qid, {"query_id": qid})
    assert await store.write_results_index() == 3

    lines = (store.out_dir / "results.jsonl").read_text(encoding="utf-8").splitlines()
    assert [json.loads(line)["query_id"] for line in lines] == ["q1", "q2", "q3"]
    assert [r["query_id"] for r in read_results_file(store.out_dir)] == ["q1", "q2", "q3"]


async def test_results_read_from_directory_without_index(store):
    await store.save_result("q1", {"query_id": "q1"})
    assert read_results_file(store.out_dir) == [{"query_id": "q1"}]
    assert read_results_file(store.out_dir / "results" / "q1.json") == [{"query_id": "q1"}]


def test_bad_results_file(tmp_path):
    path = tmp_path / "results.jsonl"
    path.write_text('{"query_id": "q1"}\nnot json\n', encoding="utf-8")
    with pytest.raises(IngestionError, match="line 2"):
        read_results_file(path)
    with pytest.raises(IngestionError):
        read_results_file(tmp_path / "absent.jsonl")


async def test_mask_and_manifest(store):
    bitmap = np.zeros((6, 8), dtype=bool)
    bitmap[1:4, 2:5] = True
    await store.save_mask("q1", Mask2D(frame_id="00004", bitmap=bitmap))
    await store.save_manifest({"command": "ground"})

    assert np.array_equal(read_mask_png(store.out_dir / "masks" / "q1.png", "00004").bitmap, bitmap)
    assert json.loads((store.out_dir / "manifest.json").read_text())["command"] == "ground"
    assert await store.health_check()
