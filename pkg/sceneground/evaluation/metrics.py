"""
Grounding metrics: 3D box IoU, 2D mask IoU and closest-center box matching.
"""
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from sceneground.scene.models import Aabb3, Mask2D

HIT_THRESHOLDS = (0.25, 0.5)


def iou3d(a: Aabb3, b: Aabb3) -> float:
    """
    Intersection over union of two axis-aligned boxes.

    Zero-volume boxes score 0, except two identical degenerate boxes which score 1.
    """
    vol_a, vol_b = a.volume, b.volume
    if vol_a <= 0.0 or vol_b <= 0.0:
        return 1.0 if a == b else 0.0

    lo = np.maximum(np.asarray(a.min), np.asarray(b.min))
    hi = np.minimum(np.asarray(a.max), np.asarray(b.max))
    inter = float(np.prod(np.clip(hi - lo, 0.0, None)))
    union = vol_a + vol_b - inter
    return min(1.0, inter / union) if union > 0 else 0.0


def mask_iou(pred: Mask2D, gt: Mask2D) -> float:
    """|pred & gt| / |pred | gt|; two empty masks score 1."""
    if pred.shape != gt.shape:
        raise ValueError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    union = int(np.logical_or(pred.bitmap, gt.bitmap).sum())
    if union == 0:
        return 1.0
    return int(np.logical_and(pred.bitmap, gt.bitmap).sum()) / union


class EvalRecord(BaseModel):
    """Per-query score. Hits use strict greater-than."""

    query_id: str
    iou3d: float = Field(ge=0.0, le=1.0)
    hit25: bool = False
    hit50: bool = False
    splits: Tuple[str, ...] = ()
    mask_iou: Optional[float] = Field(None, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _derive_hits(self) -> "EvalRecord":
        self.hit25 = self.iou3d > HIT_THRESHOLDS[0]
        self.hit50 = self.iou3d > HIT_THRESHOLDS[1]
        return self

    @classmethod
    def score(
        cls,
        query_id: str,
        pred: Optional[Aabb3],
        gt: Aabb3,
        splits: Sequence[str] = (),
        mask_score: Optional[float] = None,
    ) -> "EvalRecord":
        """A missing prediction (grounding failure) scores IoU 0."""
        value = iou3d(pred, gt) if pred is not None else 0.0
        return cls(query_id=query_id, iou3d=value, splits=tuple(splits), mask_iou=mask_score)


def nr3d_match(pred: Aabb3, gt_boxes: Sequence[Aabb3]) -> int:
    """Index of the ground-truth box whose center is closest to pred's; ties go to the lowest index."""
    if not gt_boxes:
        raise ValueError("nr3d_match needs at least one ground-truth box")
    centers = np.stack([box.center for box in gt_boxes])
    distances = np.linalg.norm(centers - pred.center, axis=1)
    # argmin returns the first minimum
    return int(np.argmin(distances))


def nr3d_accuracy(matches: Sequence[Tuple[Optional[int], int]]) -> float:
    """
    Top-1 accuracy in percent over (matched index or None for failure, target index) pairs.
    """
    if not matches:
        raise ValueError("no matches to score")
    correct = sum(1 for matched, target in matches if matched is not None and matched == target)
    return round(100.0 * correct / len(matches), 1)

