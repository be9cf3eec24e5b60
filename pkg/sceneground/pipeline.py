"""
End-to-end grounding: agent loop, anchor segmentation, multi-view matching and ensemble projection.
Batch runner groups queries by scene and writes every artifact through a ResultStore.
"""
import asyncio
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

from pydantic import BaseModel

from sceneground.agent.backends.base import VlmBackend
from sceneground.agent.models import AgentTranscript
from sceneground.agent.workflow import GroundingWorkflow
from sceneground.config import PipelineConfig
from sceneground.errors import PerceptionError, ProjectionError, SegmentationError
from sceneground.perception import build_perception
from sceneground.perception.base import Perception
from sceneground.perception.views import (
    choose_matched_detection,
    detect_target,
    ensemble_candidates,
    match_anchor,
    segment,
)
from sceneground.projection.ensemble import ensemble_project
from sceneground.scene.loader import load_scene, sample_frames
from sceneground.scene.models import Frame, Mask2D, Query, Scene
from sceneground.storage.base import ResultStore

logger = logging.getLogger(__name__)


class GroundingResult(BaseModel):
    """Per-query output. box is [xmin, ymin, zmin, xmax, ymax, zmax] or None on failure."""

    query_id: str
    scene_id: str
    status: Literal["success", "failure"]
    reason: Optional[str] = None
    box: Optional[List[float]] = None
    target_frame_id: Optional[str] = None
    object_id: Optional[int] = None
    views_used: List[str] = []
    views_rejected: List[Dict[str, Any]] = []
    point_counts: Dict[str, int] = {}


@dataclass
class QueryRun:
    result: GroundingResult
    transcript: AgentTranscript
    timings: Dict[str, float] = field(default_factory=dict)
    anchor_mask: Optional[Mask2D] = None


def _add_time(timings: Dict[str, float], stage: str, started: float) -> None:
    timings[stage] = timings.get(stage, 0.0) + (time.perf_counter() - started)


async def _matched_masks(
    scene: Scene,
    anchor: Frame,
    anchor_mask: Mask2D,
    view_ids: Sequence[str],
    target_class: str,
    config: PipelineConfig,
    perception: Perception,
    timings: Dict[str, float],
) -> List[Tuple[Frame, Mask2D]]:
    """Masks of the target in the views nearest the anchor, found through anchor correspondences."""
    if not config.projection.ensemble:
        return []
    started = time.perf_counter()
    candidates = ensemble_candidates(anchor.frame_id, view_ids, config.N)
    matches = await match_anchor(anchor, anchor_mask, [scene.frame(v) for v in candidates], perception.matcher)
    _add_time(timings, "matching", started)

    started = time.perf_counter()
    matched: List[Tuple[Frame, Mask2D]] = []
    for pairs in matches:
        frame = scene.frame(pairs.target_frame)
        try:
            detections = await detect_target(frame, target_class, perception.detector, config.detection_threshold)
        except PerceptionError as e:
            logger.warning("Skipping view %s: detector failed (%s)", frame.frame_id, e)
            continue
        chosen = choose_matched_detection(detections, pairs, target_class)
        if chosen is None:
            logger.info("Skipping view %s: no %s box holds matched pixels", frame.frame_id, target_class)
            continue
        try:
            mask = await segment(frame, chosen.box, perception.segmenter)
        except SegmentationError as e:
            logger.warning("Skipping view %s: %s", frame.frame_id, e)
            continue
        matched.append((frame, mask))
    _add_time(timings, "ensemble_seg", started)
    return matched


async def ground_query(
    scene: Scene,
    query: Query,
    config: PipelineConfig,
    backend: VlmBackend,
    perception: Perception,
    workflow: Optional[GroundingWorkflow] = None,
) -> QueryRun:
    """
    Ground one query to a 3D box.

    Grounding, segmentation and projection failures come back as a failure result.
    Transport errors propagate.
    """
    workflow = workflow or GroundingWorkflow(config, perception)
    transcript, timings = await workflow.run(scene, query, backend.for_query(query.query_id))
    outcome = transcript.outcome

    def failed(reason: str, **extra: Any) -> QueryRun:
        result = GroundingResult(query_id=query.query_id, scene_id=scene.scene_id, status="failure", reason=reason, **extra)
        return QueryRun(result=result, transcript=transcript, timings=timings)

    if not outcome.ok:
        return failed(outcome.reason or "unknown")

    anchor = scene.frame(outcome.target_frame_id)
    selected = dict(target_frame_id=outcome.target_frame_id, object_id=outcome.object_id)

    started = time.perf_counter()
    try:
        anchor_mask = await segment(anchor, outcome.detection.box, perception.segmenter)
    except SegmentationError as e:
        logger.warning("Query %s: anchor segmentation failed (%s)", query.query_id, e)
        _add_time(timings, "segmentation", started)
        return failed("segmentation_failed", **selected)
    _add_time(timings, "segmentation", started)

    matched = await _matched_masks(
        scene,
        anchor,
        anchor_mask,
        transcript.preselected_views,
        transcript.analyzed.target_class,
        config,
        perception,
        timings,
    )

    started = time.perf_counter()
    try:
        box, stats = ensemble_project((anchor, anchor_mask), matched, config.projection, config.depth_scale)
    except ProjectionError as e:
        logger.warning("Query %s: %s", query.query_id, e)
        _add_time(timings, "projection", started)
        run = failed("projection_failed", **selected)
        run.anchor_mask = anchor_mask
        return run
    _add_time(timings, "projection", started)

    result = GroundingResult(
        query_id=query.query_id,
        scene_id=scene.scene_id,
        status="success",
        box=box.as_list(),
        views_used=stats.views_used,
        views_rejected=stats.views_rejected,
        point_counts=stats.point_counts(),
        **selected,
    )
    logger.info("Query %s grounded in frame %s with %d views", query.query_id, anchor.frame_id, len(stats.views_used))
    return QueryRun(result=result, transcript=transcript, timings=timings, anchor_mask=anchor_mask)


# =============================================================================
# BATCH
# =============================================================================

PerceptionFactory = Callable[[str], Perception]


def prepare_scenes(scene_root: Union[str, Path], queries: Sequence[Query], frame_stride: int) -> Dict[str, Scene]:
    """Load and subsample every scene the queries refer to, in first-seen order."""
    scenes: Dict[str, Scene] = {}
    for query in queries:
        if query.scene_id not in scenes:
            scenes[query.scene_id] = sample_frames(load_scene(scene_root, query.scene_id), frame_stride)
    return scenes


async def save_run(store: ResultStore, run: QueryRun) -> None:
    query_id = run.result.query_id
    await store.save_transcript(query_id, run.transcript.to_json_dict())
    await store.save_result(query_id, run.result.model_dump(mode="json"))
    await store.save_timing(query_id, run.timings)
    if run.anchor_mask is not None:
        await store.save_mask(query_id, run.anchor_mask)


async def run_batch(
    scenes: Dict[str, Scene],
    queries: Sequence[Query],
    config: PipelineConfig,
    backend: VlmBackend,
    store: ResultStore,
    perception_factory: Optional[PerceptionFactory] = None,
    fixtures_root: Optional[str] = None,
) -> List[GroundingResult]:
    """
    Ground every query with at most config.jobs in flight; results come back ordered by query_id.

    Raises:
        SceneGroundError: the first pipeline error in query order, after all queries settle
    """
    if perception_factory is None:
        def perception_factory(scene_id: str) -> Perception:
            return build_perception(config.perception, scene_id, fixtures_root)

    perceptions: Dict[str, Perception] = {sid: perception_factory(sid) for sid in scenes}
    workflows = {sid: GroundingWorkflow(config, p) for sid, p in perceptions.items()}
    semaphore = asyncio.Semaphore(config.jobs)

    async def one(query: Query) -> GroundingResult:
        async with semaphore:
            started = time.perf_counter()
            run = await ground_query(
                scenes[query.scene_id],
                query,
                config,
                backend,
                perceptions[query.scene_id],
                workflows[query.scene_id],
            )
            run.timings["total"] = time.perf_counter() - started
            await save_run(store, run)
            return run.result

    ordered = sorted(queries, key=lambda q: q.query_id)
    try:
        outcomes = await asyncio.gather(*(one(q) for q in ordered), return_exceptions=True)
    finally:
        for perception in perceptions.values():
            await perception.close()

    for outcome in outcomes:
        if isinstance(outcome, BaseException):
            raise outcome
    return list(outcomes)
