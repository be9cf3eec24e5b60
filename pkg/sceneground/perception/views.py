"""
View-level perception steps: pre-selection, visual prompts, anchor matching and segmentation.
"""
import asyncio
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image
from pydantic import BaseModel, ConfigDict

from sceneground.errors import PerceptionError, SegmentationError
from sceneground.perception.base import Detector, Matcher, Segmenter
from sceneground.perception.models import Box, Detection2D, MatchPairs
from sceneground.scene.models import Frame, Mask2D, Scene
from sceneground.stitching.render import ID_FONT_SIZE, draw_text, text_box

logger = logging.getLogger(__name__)

CANDIDATE_TEXT = (255, 255, 255)
CANDIDATE_BACKGROUND = (0, 0, 0)


async def preselect_views(
    scene: Scene,
    target_class: str,
    detector: Detector,
    score_threshold: float,
) -> List[str]:
    """
    Frames with at least one target-class detection scoring >= threshold, in scene order.

    Detector failures skip the frame.
    """

    async def keep(frame: Frame) -> bool:
        try:
            detections = await detector.detect(frame.frame_id, frame.color, [target_class])
        except PerceptionError as e:
            logger.warning("Skipping frame %s: detector failed (%s)", frame.frame_id, e)
            return False
        return any(d.matches_class(target_class) and d.score >= score_threshold for d in detections)

    flags = await asyncio.gather(*(keep(f) for f in scene.frames))
    selected = [f.frame_id for f, flag in zip(scene.frames, flags) if flag]
    logger.info("Pre-selected %d/%d views for %r", len(selected), len(scene.frames), target_class)
    return selected


async def detect_target(
    frame: Frame,
    target_class: str,
    detector: Detector,
    score_threshold: float,
) -> List[Detection2D]:
    """Target-class detections on one frame at or above the threshold, in detector order."""
    detections = await detector.detect(frame.frame_id, frame.color, [target_class])
    return [d for d in detections if d.matches_class(target_class) and d.score >= score_threshold]


class AnnotatedCandidates(BaseModel):
    """Visual prompt: the annotated raster and which detection each ID names."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    image: np.ndarray
    id_map: Dict[int, Detection2D]
    label_boxes: Dict[int, Tuple[int, int, int, int]]


def _overlaps(a: Tuple[int, int, int, int], b: Tuple[int, int, int, int]) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def annotate_candidates(
    image: np.ndarray,
    detections: Sequence[Detection2D],
    font_size: int = ID_FONT_SIZE,
) -> AnnotatedCandidates:
    """
    Draw IDs 0..k-1 centered on each box center, white on black.

    A label that would overlap an earlier one moves down by its text height until clear.
    """
    if not detections:
        raise ValueError("annotate_candidates needs at least one detection")

    canvas = Image.fromarray(np.ascontiguousarray(image))
    placed: Dict[int, Tuple[int, int, int, int]] = {}
    for idx, detection in enumerate(detections):
        text = str(idx)
        x0, y0, x1, y1 = text_box(text, (0, 0), font_size)
        width, height = x1 - x0, y1 - y0
        cx, cy = detection.center
        origin = [int(round(cx - width / 2 - x0)), int(round(cy - height / 2 - y0))]
        box = text_box(text, tuple(origin), font_size)
        while any(_overlaps(box, other) for other in placed.values()):
            origin[1] += height
            box = text_box(text, tuple(origin), font_size)
        placed[idx] = draw_text(canvas, text, tuple(origin), CANDIDATE_TEXT, font_size, background=CANDIDATE_BACKGROUND)

    return AnnotatedCandidates(
        image=np.asarray(canvas),
        id_map={idx: d for idx, d in enumerate(detections)},
        label_boxes=placed,
    )


def _inside_mask(mask: Mask2D, pixels: np.ndarray) -> np.ndarray:
    h, w = mask.shape
    cols = np.floor(pixels[:, 0]).astype(np.int64)
    rows = np.floor(pixels[:, 1]).astype(np.int64)
    in_bounds = (cols >= 0) & (cols < w) & (rows >= 0) & (rows < h)
    keep = np.zeros(len(pixels), dtype=bool)
    keep[in_bounds] = mask.bitmap[rows[in_bounds], cols[in_bounds]]
    return keep


async def match_anchor(
    anchor_frame: Frame,
    anchor_mask: Mask2D,
    candidate_frames: Sequence[Frame],
    matcher: Matcher,
) -> List[MatchPairs]:
    """
    Match the anchor against each candidate, keeping only pairs whose source pixel is on the mask.

    Candidates whose matching fails or leaves no pairs are omitted. Output is ordered by frame_id.
    """
    if anchor_mask.is_empty:
        raise ValueError("anchor mask is empty")

    async def one(frame: Frame) -> Optional[MatchPairs]:
        try:
            raw = await matcher.match(anchor_frame.frame_id, anchor_frame.color, frame.frame_id, frame.color)
        except PerceptionError as e:
            logger.warning("Omitting frame %s: matcher failed (%s)", frame.frame_id, e)
            return None
        kept = raw.pairs[_inside_mask(anchor_mask, raw.source_pixels)]
        if len(kept) == 0:
            logger.debug("Omitting frame %s: no pairs on the anchor mask", frame.frame_id)
            return None
        return MatchPairs(source_frame=anchor_frame.frame_id, target_frame=frame.frame_id, pairs=kept)

    results = await asyncio.gather(*(one(f) for f in candidate_frames))
    return sorted((m for m in results if m is not None), key=lambda m: m.target_frame)


async def segment(frame: Frame, box: Box, segmenter: Segmenter) -> Mask2D:
    """
    Box-prompted mask on the color raster.

    Raises:
        SegmentationError: the segmenter has no mask or returned an empty one
    """
    height, width = frame.color.shape[:2]
    x0, y0, x1, y1 = box
    if not (0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height):
        raise ValueError(f"box {list(box)} outside {width}x{height} frame {frame.frame_id}")
    mask = await segmenter.segment(frame.frame_id, frame.color, box)
    if mask.is_empty:
        raise SegmentationError(f"empty mask for frame {frame.frame_id}")
    return mask


def choose_matched_detection(
    detections: Sequence[Detection2D],
    pairs: MatchPairs,
    target_class: str,
) -> Optional[Detection2D]:
    """Target-class detection whose box holds the most matched target pixels; None if no box holds any."""
    target = pairs.target_pixels
    best: Optional[Detection2D] = None
    best_count = 0
    for detection in detections:
        if not detection.matches_class(target_class):
            continue
        count = int(detection.contains(np.floor(target[:, 0]), np.floor(target[:, 1])).sum())
        if count > best_count:
            best, best_count = detection, count
    return best


def ensemble_candidates(anchor_id: str, view_ids: Sequence[str], n: int) -> List[str]:
    """
    The n-1 views closest to the anchor in sequence, excluding the anchor, in sequence order.

    Equal distances prefer the earlier frame.
    """
    if n < 1:
        raise ValueError(f"ensemble size must be >= 1, got {n}")
    anchor = int(anchor_id)
    others = [v for v in view_ids if v != anchor_id]
    nearest = sorted(others, key=lambda v: (abs(int(v) - anchor), int(v)))[: n - 1]
    return sorted(nearest)
