"""
Abstract interfaces for detection, segmentation and matching backends.
Implementations: fixture files (fixtures.py), HTTP clients (http.py), threshold oracle.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from sceneground.perception.models import Box, Detection2D, MatchPairs
from sceneground.scene.models import Mask2D


class Detector(ABC):
    """Open-vocabulary 2D detector."""

    @abstractmethod
    async def detect(self, frame_id: str, image: np.ndarray, classes: Sequence[str]) -> List[Detection2D]:
        """
        Detect objects of the given classes.

        Args:
            frame_id: Frame the image belongs to
            image: HxWx3 uint8 RGB raster
            classes: Class names to look for

        Returns:
            Detections of any of the classes, in backend order
        """
        pass

    async def close(self) -> None:
        """Release resources. Default: nothing to release."""


class Segmenter(ABC):
    """Box-prompted instance segmenter."""

    @abstractmethod
    async def segment(self, frame_id: str, image: np.ndarray, box: Box) -> Mask2D:
        """
        Segment the object inside box.

        Raises:
            SegmentationError: no mask available for this box
        """
        pass

    async def close(self) -> None:
        pass


class Matcher(ABC):
    """Dense cross-view pixel matcher."""

    @abstractmethod
    async def match(
        self,
        source_frame: str,
        source_image: np.ndarray,
        target_frame: str,
        target_image: np.ndarray,
    ) -> MatchPairs:
        pass

    async def close(self) -> None:
        pass


@dataclass
class Perception:
    """
    The perception backends used by one grounding run.

    view_detector pre-selects views; it defaults to detector.
    """

    detector: Detector
    segmenter: Segmenter
    matcher: Matcher
    view_detector: Optional[Detector] = None

    @property
    def preselector(self) -> Detector:
        return self.view_detector or self.detector

    async def close(self) -> None:
        seen = set()
        for backend in (self.detector, self.view_detector, self.segmenter, self.matcher):
            if backend is not None and id(backend) not in seen:
                seen.add(id(backend))
                await backend.close()
