"""
Exception hierarchy for the grounding pipeline.
Grounding failures are results, not exceptions; everything here is a real error.
"""
from pathlib import Path
from typing import Optional, Union


class SceneGroundError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(SceneGroundError):
    """Invalid or unreadable configuration."""


class IngestionError(SceneGroundError):
    """A scene or query file is missing or corrupt."""

    def __init__(self, message: str, path: Optional[Union[str, Path]] = None):
        self.path = str(path) if path is not None else None
        super().__init__(f"{message}: {self.path}" if self.path else message)


class PoseValidationError(IngestionError):
    """Pose rotation block is not a proper rotation."""


class AnalysisError(SceneGroundError):
    """Query analysis response could not be parsed."""


class ResponseFormatError(SceneGroundError):
    """A VLM reply was not the JSON object the prompt asked for."""


class BackendTransportError(SceneGroundError):
    """The VLM backend could not be reached or returned a transport-level error."""


class BackendTimeoutError(BackendTransportError):
    """The VLM backend did not answer within the configured timeout."""


class PerceptionError(SceneGroundError):
    """A detector, segmenter or matcher call failed."""


class SegmentationError(PerceptionError):
    """Segmentation produced no mask for the requested box."""


class ProjectionError(SceneGroundError):
    """Ensemble projection could not produce a box."""


class EvaluationError(SceneGroundError):
    """Results and ground truth do not line up."""


class BenchError(SceneGroundError):
    """Retrieval benchmark could not be generated or run."""
