"""
Conversation and outcome types for the grounding agent.
"""
from enum import Enum
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from sceneground.perception.models import Detection2D
from sceneground.scene.models import format_frame_id


# =============================================================================
# MESSAGES
# =============================================================================

class ImageAttachment(BaseModel):
    """An image sent with a message. Only the label is serialized."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    label: str
    pixels: np.ndarray = Field(exclude=True, repr=False)


class ChatMessage(BaseModel):
    model_config = ConfigDict(frozen=True)

    role: Literal["system", "user", "assistant"]
    text: str
    images: List[ImageAttachment] = []


# =============================================================================
# VLM REPLIES
# =============================================================================

class AnalyzedQuery(BaseModel):
    target_class: str = Field(min_length=1)
    attributes: List[str] = []
    conditions: List[str] = []

    @field_validator("target_class")
    @classmethod
    def _strip(cls, value: str) -> str:
        value = value.strip()
        if not value:
            raise ValueError("target_class is empty")
        return value


def _pad_image_id(value: Any) -> Any:
    """Zero-pad ids given as integers or short digit strings ("3" -> "00003")."""
    if isinstance(value, int) and not isinstance(value, bool):
        return format_frame_id(value)
    if isinstance(value, str):
        digits = value.strip()
        if digits.isascii() and digits.isdigit() and len(digits) < 5:
            return format_frame_id(int(digits))
    return value


class ImageSelection(BaseModel):
    reasoning: str = ""
    target_image_id: str
    reference_image_ids: List[str] = []

    @field_validator("target_image_id", mode="before")
    @classmethod
    def _image_id(cls, value: Any) -> Any:
        return _pad_image_id(value)

    @field_validator("reference_image_ids", mode="before")
    @classmethod
    def _reference_ids(cls, value: Any) -> Any:
        if isinstance(value, list):
            return [_pad_image_id(v) for v in value]
        return value


class ObjectSelection(BaseModel):
    reasoning: str = ""
    object_id: int


# =============================================================================
# FEEDBACK AND OUTCOME
# =============================================================================

class FeedbackKind(str, Enum):
    IMAGE_INVALID = "ImageInvalid"
    OBJECT_NOT_EXISTING = "ObjectNotExisting"
    OBJECT_ID_INVALID = "ObjectIdInvalid"


class Feedback(BaseModel):
    kind: FeedbackKind
    referenced_id: str


class GroundingOutcome(BaseModel):
    """Either a valid (frame, object) pair or a failure with its reason."""

    status: Literal["success", "failure"]
    target_frame_id: Optional[str] = None
    object_id: Optional[int] = None
    detection: Optional[Detection2D] = None
    reason: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "success"

    @classmethod
    def failure(cls, reason: str) -> "GroundingOutcome":
        return cls(status="failure", reason=reason)


class AgentTranscript(BaseModel):
    """
    Everything one grounding loop said and decided.

    analysis_messages hold the separate query-analysis exchange; messages hold the
    grounding conversation starting with the system prompt.
    """

    query_id: str
    query: str
    analyzed: Optional[AnalyzedQuery] = None
    analysis_messages: List[ChatMessage] = []
    preselected_views: List[str] = []
    stitched_images: List[str] = []
    messages: List[ChatMessage] = []
    feedbacks: List[Feedback] = []
    retries_used: int = 0
    image_selection: Optional[ImageSelection] = None
    object_selection: Optional[ObjectSelection] = None
    outcome: GroundingOutcome = GroundingOutcome.failure("not_run")

    def to_json_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")
