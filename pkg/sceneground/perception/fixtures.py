"""
Fixture-file perception backends and a thresholding oracle segmenter.

Per-scene fixture layout under <fixtures_root>/<scene_id>/:
    detections.json         {frame_id: [{label, box: [x0,y0,x1,y1], score}]}
    view_detections.json    optional, same schema, used for view pre-selection only
    masks/index.json        {frame_id: [{box: [x0,y0,x1,y1], file: "<frame_id>_<k>.png"}]}
    masks/<frame_id>_<k>.png
    matches.json            {"<source>-><target>": [[su, sv, tu, tv], ...]}
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from sceneground.errors import IngestionError, SegmentationError
from sceneground.perception.base import Detector, Matcher, Perception, Segmenter
from sceneground.perception.models import Box, Detection2D, MatchPairs, pair_key
from sceneground.projection.morphology import EIGHT_CONNECTED
from sceneground.scene.loader import read_mask_png, write_mask_png
from sceneground.scene.models import Mask2D

logger = logging.getLogger(__name__)

BOX_MATCH_TOL = 0.5


def _read_json(path: Path) -> object:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise IngestionError(f"could not read fixture ({e})", path) from e


class FixtureDetector(Detector):
    """Replays detections.json. Frames absent from the file have no detections."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._detections: Optional[Dict[str, List[Detection2D]]] = None

    def _load(self) -> Dict[str, List[Detection2D]]:
        if self._detections is None:
            raw = _read_json(self.path)
            try:
                self._detections = {
                    frame_id: [Detection2D.from_fixture(frame_id, r) for r in records]
                    for frame_id, records in raw.items()
                }
            except (KeyError, TypeError, ValueError, AttributeError) as e:
                raise IngestionError(f"invalid detections fixture ({e})", self.path) from e
        return self._detections

    async def detect(self, frame_id: str, image: np.ndarray, classes: Sequence[str]) -> List[Detection2D]:
        detections = self._load().get(frame_id, [])
        if not classes:
            return list(detections)
        return [d for d in detections if any(d.matches_class(c) for c in classes)]


class FixtureSegmenter(Segmenter):
    """Serves stored PNG masks keyed by frame and box (matched within half a pixel)."""

    def __init__(self, masks_dir: Union[str, Path]):
        self.masks_dir = Path(masks_dir)
        self._index: Optional[Dict[str, List[Tuple[Box, str]]]] = None

    def _load(self) -> Dict[str, List[Tuple[Box, str]]]:
        if self._index is None:
            index_path = self.masks_dir / "index.json"
            raw = _read_json(index_path) if index_path.is_file() else {}
            try:
                self._index = {
                    frame_id: [(tuple(float(x) for x in e["box"]), str(e["file"])) for e in entries]
                    for frame_id, entries in raw.items()
                }
            except (KeyError, TypeError, ValueError, AttributeError) as e:
                raise IngestionError(f"invalid mask index ({e})", index_path) from e
        return self._index

    async def segment(self, frame_id: str, image: np.ndarray, box: Box) -> Mask2D:
        for stored_box, filename in self._load().get(frame_id, []):
            if all(abs(a - b) <= BOX_MATCH_TOL for a, b in zip(stored_box, box)):
                mask = read_mask_png(self.masks_dir / filename, frame_id)
                if mask.is_empty:
                    raise SegmentationError(f"stored mask {filename} is empty")
                return mask
        raise SegmentationError(f"no fixture mask for frame {frame_id} box {list(box)}")


class FixtureMatcher(Matcher):
    """Replays matches.json. Unknown frame pairs have no correspondences."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._matches: Optional[Dict[str, np.ndarray]] = None

    def _load(self) -> Dict[str, np.ndarray]:
        if self._matches is None:
            raw = _read_json(self.path) if self.path.is_file() else {}
            if not isinstance(raw, dict):
                raise IngestionError("matches must map frame pairs to rows", self.path)
            self._matches = {key: self._rows(key, rows) for key, rows in raw.items()}
        return self._matches

    def _rows(self, key: str, rows: Any) -> np.ndarray:
        try:
            array = np.asarray(rows, dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise IngestionError(f"invalid matches for {key} ({e})", self.path) from e
        if array.size == 0:
            return np.zeros((0, 4))
        if array.ndim != 2 or array.shape[1] != 4:
            raise IngestionError(f"matches for {key} must be rows of 4 values, got shape {array.shape}", self.path)
        return array

    async def match(
        self,
        source_frame: str,
        source_image: np.ndarray,
        target_frame: str,
        target_image: np.ndarray,
    ) -> MatchPairs:
        rows = self._load().get(pair_key(source_frame, target_frame), np.zeros((0, 4)))
        return MatchPairs(source_frame=source_frame, target_frame=target_frame, pairs=rows)


class ThresholdSegmenter(Segmenter):
    """
    Oracle for synthetic images: foreground is any pixel whose brightest channel reaches
    threshold; the returned mask is the 8-connected foreground region with the most
    pixels inside the box.
    """

    def __init__(self, threshold: int = 128):
        self.threshold = threshold

    async def segment(self, frame_id: str, image: np.ndarray, box: Box) -> Mask2D:
        foreground = np.asarray(image).max(axis=2) >= self.threshold
        labels, count = ndimage.label(foreground, structure=EIGHT_CONNECTED)
        if count == 0:
            raise SegmentationError(f"no foreground in frame {frame_id}")

        h, w = foreground.shape
        x0, y0, x1, y1 = box
        r0, r1 = max(int(np.floor(y0)), 0), min(int(np.ceil(y1)), h)
        c0, c1 = max(int(np.floor(x0)), 0), min(int(np.ceil(x1)), w)
        inside = labels[r0:r1, c0:c1]
        inside = inside[inside > 0]
        if inside.size == 0:
            raise SegmentationError(f"no foreground inside box {list(box)} in frame {frame_id}")
        best = int(np.bincount(inside).argmax())
        return Mask2D(frame_id=frame_id, bitmap=labels == best)


def load_fixture_perception(fixtures_root: Union[str, Path], scene_id: str) -> Perception:
    """Fixture backends for one scene; view_detections.json, when present, drives pre-selection."""
    scene_dir = Path(fixtures_root) / scene_id
    if not scene_dir.is_dir():
        raise IngestionError("perception fixtures not found", scene_dir)

    detections_path = scene_dir / "detections.json"
    if not detections_path.is_file():
        raise IngestionError("missing detections fixture", detections_path)

    view_path = scene_dir / "view_detections.json"
    return Perception(
        detector=FixtureDetector(detections_path),
        segmenter=FixtureSegmenter(scene_dir / "masks"),
        matcher=FixtureMatcher(scene_dir / "matches.json"),
        view_detector=FixtureDetector(view_path) if view_path.is_file() else None,
    )


# =============================================================================
# FIXTURE WRITERS
# =============================================================================

def write_detections(path: Union[str, Path], detections: Mapping[str, Sequence[Detection2D]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {fid: [d.to_fixture() for d in dets] for fid, dets in sorted(detections.items())}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")


def write_masks(masks_dir: Union[str, Path], masks: Mapping[str, Sequence[Tuple[Box, Mask2D]]]) -> None:
    """Store masks as <frame_id>_<k>.png and write index.json."""
    masks_dir = Path(masks_dir)
    index: Dict[str, List[Dict[str, object]]] = {}
    for frame_id, entries in sorted(masks.items()):
        for k, (box, mask) in enumerate(entries):
            filename = f"{frame_id}_{k}.png"
            write_mask_png(mask, masks_dir / filename)
            index.setdefault(frame_id, []).append({"box": list(box), "file": filename})
    masks_dir.mkdir(parents=True, exist_ok=True)
    (masks_dir / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True), encoding="utf-8")


def write_matches(path: Union[str, Path], matches: Sequence[MatchPairs]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {m.key: m.to_fixture() for m in matches}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
