"""End-to-end scripted grounding over the synthetic room."""
import json
from typing import Dict, List

import numpy as np
import pytest

from sceneground.agent.backends.scripted import ScriptLibrary
from sceneground.agent.models import FeedbackKind
from sceneground.errors import BackendTransportError, SegmentationError
from sceneground.evaluation import EvalRecord, accuracy_report
from sceneground.perception import Matcher, Segmenter, load_fixture_perception
from sceneground.pipeline import ground_query, run_batch
from sceneground.config import ProjectionConfig
from sceneground.scene.models import Aabb3, Mask2D, Query
from sceneground.storage import LocalResultStore, read_results_file
from tests.synthetic import SCENE_ID, SyntheticScene, analysis_reply, image_reply, object_reply, write_fixtures

BLIND = "00006"
MISSING_IMAGE = "00099"
INVALID_OBJECT = 7

CHAIR_0, CHAIR_1, CHAIR_2, TABLE, CABINET = range(5)


@pytest.fixture(scope="module")
def fixtures_root(room, tmp_path_factory):
    root = tmp_path_factory.mktemp("fixtures")
    write_fixtures(room, root, blind_frames=[BLIND])
    return root


# =============================================================================
# SCRIPT BUILDING
# =============================================================================

def anchor_frame(room: SyntheticScene, index: int, needs_choice: bool = False) -> str:
    """Best non-blind view of the object; with needs_choice, one where the detector reports several candidates."""
    label = room.objects[index].label
    options = [
        fid for fid in room.scene.frame_ids
        if fid != BLIND
        and index in room.candidates(fid, label)
        and (not needs_choice or len(room.candidates(fid, label)) >= 2)
    ]
    assert options, f"object {index} has no usable anchor view"
    return max(options, key=lambda fid: (room.visible_pixels(fid, index), fid))


def script_for(room: SyntheticScene, index: int, feedbacks=()) -> List[Dict[str, object]]:
    """Replies that ground object index, first triggering each requested feedback kind in order."""
    label = room.objects[index].label
    script: List[Dict[str, object]] = [analysis_reply(label)]
    needs_choice = FeedbackKind.OBJECT_ID_INVALID in feedbacks
    frame = anchor_frame(room, index, needs_choice)
    candidates = room.candidates(frame, label)

    for kind in feedbacks:
        if kind == FeedbackKind.IMAGE_INVALID:
            script.append(image_reply(MISSING_IMAGE))
        elif kind == FeedbackKind.OBJECT_NOT_EXISTING:
            assert room.candidates(BLIND, label), f"no {label} seen in the blind view"
            script.append(image_reply(BLIND))

    script.append(image_reply(frame))
    if len(candidates) > 1:
        if needs_choice:
            script.append(object_reply(INVALID_OBJECT))
        script.append(object_reply(candidates.index(index)))
    return script


PLAN = [
    ("q00", TABLE, ()),
    ("q01", CABINET, ()),
    ("q02", CHAIR_0, ()),
    ("q03", CHAIR_1, (FeedbackKind.IMAGE_INVALID,)),
    ("q04", CHAIR_2, (FeedbackKind.OBJECT_NOT_EXISTING,)),
    ("q05", CHAIR_0, (FeedbackKind.OBJECT_ID_INVALID,)),
    ("q06", CHAIR_1, (FeedbackKind.IMAGE_INVALID, FeedbackKind.OBJECT_NOT_EXISTING, FeedbackKind.OBJECT_ID_INVALID)),
    ("q07", CABINET, (FeedbackKind.IMAGE_INVALID,)),
    ("q08", CHAIR_2, ()),
    ("q09", TABLE, (FeedbackKind.OBJECT_NOT_EXISTING,)),
]


def queries(room: SyntheticScene) -> List[Query]:
    return [
        Query(
            query_id=qid,
            scene_id=SCENE_ID,
            text=f"the {room.objects[index].label} number {index}",
            gt_box=room.objects[index].box,
            splits=("multiple",) if room.objects[index].label == "chair" else ("unique",),
        )
        for qid, index, _ in PLAN
    ]


def library(room: SyntheticScene) -> ScriptLibrary:
    return ScriptLibrary({qid: script_for(room, index, feedbacks) for qid, index, feedbacks in PLAN})


async def run_suite(room, fixtures_root, config, out_dir):
    store = LocalResultStore(out_dir)
    await store.initialize()
    results = await run_batch(
        {SCENE_ID: room.scene},
        queries(room),
        config,
        library(room),
        store,
        fixtures_root=str(fixtures_root),
    )
    await store.write_results_index()
    return results, store


# =============================================================================
# TESTS
# =============================================================================

async def test_scripted_suite_grounds_every_query(room, fixtures_root, pipeline_config, tmp_path):
    results, store = await run_suite(room, fixtures_root, pipeline_config, tmp_path / "run")

    assert [r.query_id for r in results] == [qid for qid, _, _ in PLAN]
    assert all(r.status == "success" for r in results), [(r.query_id, r.reason) for r in results]

    records = [
        EvalRecord.score(r.query_id, Aabb3.from_list(r.box), q.gt_box, q.splits)
        for r, q in zip(results, queries(room))
    ]
    report = accuracy_report(records)
    assert report.overall.acc25 == 100.0
    assert report.row("multiple").count == 6

    for result in results:
        assert result.views_used[0] == result.target_frame_id
        assert BLIND not in result.views_used
        assert result.point_counts["filtered"] <= result.point_counts["union"]


async def test_transcripts_record_every_feedback_kind(room, fixtures_root, pipeline_config, tmp_path):
    _, store = await run_suite(room, fixtures_root, pipeline_config, tmp_path / "run")

    transcript = json.loads((store.out_dir / "transcripts" / "q06.json").read_text(encoding="utf-8"))
    assert [f["kind"] for f in transcript["feedbacks"]] == ["ImageInvalid", "ObjectNotExisting", "ObjectIdInvalid"]
    assert transcript["retries_used"] == 3
    assert transcript["outcome"]["status"] == "success"

    timing = json.loads((store.out_dir / "timing" / "q06.json").read_text(encoding="utf-8"))
    assert {"query_analysis", "image_selection", "projection", "total"} <= set(timing)
    assert (store.out_dir / "masks" / "q06.png").is_file()


async def test_results_are_byte_identical_across_runs(room, fixtures_root, pipeline_config, tmp_path):
    _, first = await run_suite(room, fixtures_root, pipeline_config, tmp_path / "a")
    _, second = await run_suite(room, fixtures_root, pipeline_config, tmp_path / "b")
    assert (first.out_dir / "results.jsonl").read_bytes() == (second.out_dir / "results.jsonl").read_bytes()
    assert len(read_results_file(first.out_dir)) == len(PLAN)


async def test_parallel_jobs_give_the_same_results(room, fixtures_root, pipeline_config, tmp_path):
    _, serial = await run_suite(room, fixtures_root, pipeline_config, tmp_path / "serial")
    parallel_config = pipeline_config.model_copy(update={"jobs": 4})
    _, parallel = await run_suite(room, fixtures_root, parallel_config, tmp_path / "parallel")
    assert (serial.out_dir / "results.jsonl").read_bytes() == (parallel.out_dir / "results.jsonl").read_bytes()


async def test_transport_failure_surfaces_after_other_queries_finish(room, fixtures_root, pipeline_config, tmp_path):
    scripts = {qid: script_for(room, index, feedbacks) for qid, index, feedbacks in PLAN[:3]}
    scripts["q01"] = [{"transport_error": True}, {"transport_error": True}]
    store = LocalResultStore(tmp_path / "run")
    await store.initialize()

    with pytest.raises(BackendTransportError):
        await run_batch(
            {SCENE_ID: room.scene},
            queries(room)[:3],
            pipeline_config,
            ScriptLibrary(scripts),
            store,
            fixtures_root=str(fixtures_root),
        )
    assert sorted(r["query_id"] for r in await store.load_results()) == ["q00", "q02"]


# =============================================================================
# FAILURE RESULTS
# =============================================================================

class FailingSegmenter(Segmenter):
    async def segment(self, frame_id, image, box) -> Mask2D:
        raise SegmentationError("no mask")


class BackgroundSegmenter(Segmenter):
    """Returns a patch of the top-left corner, where the synthetic views see no geometry."""

    async def segment(self, frame_id, image, box) -> Mask2D:
        bitmap = np.zeros(image.shape[:2], dtype=bool)
        bitmap[0:12, 0:12] = True
        return Mask2D(frame_id=frame_id, bitmap=bitmap)


@pytest.mark.parametrize("segmenter, reason", [(FailingSegmenter(), "segmentation_failed"), (BackgroundSegmenter(), "projection_failed")])
async def test_segmentation_and_projection_failures(room, fixtures_root, pipeline_config, segmenter, reason):
    perception = load_fixture_perception(fixtures_root, SCENE_ID)
    perception.segmenter = segmenter
    query = queries(room)[0]
    backend = ScriptLibrary({"q00": script_for(room, TABLE)})

    run = await ground_query(room.scene, query, pipeline_config, backend, perception)

    assert run.result.status == "failure"
    assert run.result.reason == reason
    assert run.result.box is None
    assert run.result.target_frame_id == anchor_frame(room, TABLE)
    assert (run.anchor_mask is not None) == (reason == "projection_failed")


async def test_grounding_failure_is_reported_not_raised(room, fixtures_root, pipeline_config):
    perception = load_fixture_perception(fixtures_root, SCENE_ID)
    backend = ScriptLibrary({"q00": [analysis_reply("sofa")]})
    run = await ground_query(room.scene, queries(room)[0], pipeline_config, backend, perception)
    assert (run.result.status, run.result.reason) == ("failure", "no_views")


class UnusedMatcher(Matcher):
    async def match(self, source_frame, source_image, target_frame, target_image):
        raise AssertionError("matcher called with the ensemble switched off")


async def test_single_view_projection_skips_matching(room, fixtures_root, pipeline_config):
    perception = load_fixture_perception(fixtures_root, SCENE_ID)
    perception.matcher = UnusedMatcher()
    config = pipeline_config.model_copy(update={"projection": ProjectionConfig(erosion_kernel=3, ensemble=False)})
    backend = ScriptLibrary({"q00": script_for(room, TABLE)})

    run = await ground_query(room.scene, queries(room)[0], config, backend, perception)

    assert run.result.status == "success"
    assert run.result.views_used == [run.result.target_frame_id]
    assert run.result.views_rejected == []
    assert "matching" not in run.timings
