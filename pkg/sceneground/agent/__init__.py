"""Grounding-and-feedback agent: prompts, VLM backends and the retry loop."""
from sceneground.agent.grounding import GroundingSession, analyze_query, select_object_id, select_target_image
from sceneground.agent.models import (
    AgentTranscript,
    AnalyzedQuery,
    ChatMessage,
    Feedback,
    FeedbackKind,
    GroundingOutcome,
    ImageAttachment,
    ImageSelection,
    ObjectSelection,
)
from sceneground.agent.workflow import GroundingWorkflow, run_grounding_loop

__all__ = [
    "AgentTranscript",
    "AnalyzedQuery",
    "ChatMessage",
    "Feedback",
    "FeedbackKind",
    "GroundingOutcome",
    "GroundingSession",
    "GroundingWorkflow",
    "ImageAttachment",
    "ImageSelection",
    "ObjectSelection",
    "analyze_query",
    "run_grounding_loop",
    "select_object_id",
    "select_target_image",
]
