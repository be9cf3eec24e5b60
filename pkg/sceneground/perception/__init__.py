"""Detection, segmentation and matching interfaces, backends and view-level steps."""
from typing import Optional

from sceneground.config import PerceptionConfig
from sceneground.errors import ConfigError
from sceneground.perception.base import Detector, Matcher, Perception, Segmenter
from sceneground.perception.fixtures import (
    FixtureDetector,
    FixtureMatcher,
    FixtureSegmenter,
    ThresholdSegmenter,
    load_fixture_perception,
)
from sceneground.perception.http import HttpDetector, HttpMatcher, HttpSegmenter, http_perception
from sceneground.perception.models import Detection2D, MatchPairs
from sceneground.perception.views import (
    AnnotatedCandidates,
    annotate_candidates,
    choose_matched_detection,
    detect_target,
    ensemble_candidates,
    match_anchor,
    preselect_views,
    segment,
)


def build_perception(config: PerceptionConfig, scene_id: str, fixtures_root: Optional[str] = None) -> Perception:
    """Perception bundle for one scene from config."""
    if config.kind == "http":
        return http_perception(config.detector_url, config.segmenter_url, config.matcher_url, config.timeout_s)
    root = fixtures_root or config.fixtures_root
    if not root:
        raise ConfigError("perception.kind = fixture needs perception.fixtures_root")
    return load_fixture_perception(root, scene_id)


__all__ = [
    "AnnotatedCandidates",
    "Detection2D",
    "Detector",
    "FixtureDetector",
    "FixtureMatcher",
    "FixtureSegmenter",
    "HttpDetector",
    "HttpMatcher",
    "HttpSegmenter",
    "MatchPairs",
    "Matcher",
    "Perception",
    "Segmenter",
    "ThresholdSegmenter",
    "annotate_candidates",
    "build_perception",
    "choose_matched_detection",
    "detect_target",
    "ensemble_candidates",
    "http_perception",
    "load_fixture_perception",
    "match_anchor",
    "preselect_views",
    "segment",
]
