"""
Grounding conversation primitives: a transcript-carrying session and the three VLM asks.
"""
import asyncio
import logging
from typing import List, Optional, Sequence, Tuple, Type, TypeVar

from pydantic import BaseModel

from sceneground.agent import prompts
from sceneground.agent.backends.base import VlmBackend
from sceneground.agent.models import (
    AnalyzedQuery,
    ChatMessage,
    ImageAttachment,
    ImageSelection,
    ObjectSelection,
)
from sceneground.agent.parsing import parse_reply
from sceneground.errors import AnalysisError, BackendTransportError, ResponseFormatError
from sceneground.perception.views import AnnotatedCandidates
from sceneground.stitching.render import StitchedImage, resize_for_vlm

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


class GroundingSession:
    """
    Conversation state for one query against a stateless backend.

    Messages only ever grow. Transport failures are retried transport_retries times
    with exponential backoff before the error propagates.
    """

    def __init__(
        self,
        backend: VlmBackend,
        system_prompt: Optional[str] = None,
        transport_retries: int = 1,
        retry_base_delay_s: float = 2.0,
    ):
        self.backend = backend
        self.transport_retries = transport_retries
        self.retry_base_delay_s = retry_base_delay_s
        self.messages: List[ChatMessage] = []
        if system_prompt is not None:
            self.messages.append(ChatMessage(role="system", text=system_prompt))

    async def _send(self) -> str:
        attempts = self.transport_retries + 1
        for attempt in range(attempts):
            try:
                return await self.backend.chat(list(self.messages))
            except BackendTransportError as e:
                if attempt < attempts - 1:
                    delay = self.retry_base_delay_s * (2 ** attempt)
                    logger.warning("VLM transport error (%s); retrying in %.1fs", e, delay)
                    await asyncio.sleep(delay)
                else:
                    raise
        raise AssertionError("unreachable")

    async def ask(self, text: str, images: Sequence[ImageAttachment] = ()) -> str:
        """Append a user message, send the history, append and return the reply."""
        self.messages.append(ChatMessage(role="user", text=text, images=list(images)))
        reply = await self._send()
        self.messages.append(ChatMessage(role="assistant", text=reply))
        return reply

    async def ask_json(self, text: str, model: Type[ModelT], images: Sequence[ImageAttachment] = ()) -> ModelT:
        """
        Ask and parse the reply as model. A malformed reply gets exactly one re-ask.

        Raises:
            ResponseFormatError: the re-asked reply is malformed too
        """
        reply = await self.ask(text, images)
        try:
            return parse_reply(reply, model)
        except ResponseFormatError as e:
            logger.warning("Malformed %s reply, re-asking once: %s", model.__name__, e)
        return parse_reply(await self.ask(prompts.json_reask_prompt()), model)


async def analyze_query(
    text: str,
    backend: VlmBackend,
    transport_retries: int = 1,
    retry_base_delay_s: float = 2.0,
) -> Tuple[AnalyzedQuery, List[ChatMessage]]:
    """
    Parse the query into target class, attributes and conditions.

    Returns:
        (AnalyzedQuery, messages of the analysis exchange)

    Raises:
        AnalysisError: the reply could not be parsed after one re-ask
    """
    if not text or not text.strip():
        raise ValueError("query text is empty")
    session = GroundingSession(backend, transport_retries=transport_retries, retry_base_delay_s=retry_base_delay_s)
    try:
        analyzed = await session.ask_json(prompts.query_analysis_prompt(text), AnalyzedQuery)
    except ResponseFormatError as e:
        raise AnalysisError(f"query analysis failed: {e}") from e
    return analyzed, session.messages


def stitched_attachments(stitched: Sequence[StitchedImage]) -> List[ImageAttachment]:
    return [ImageAttachment(label=s.label, pixels=s.raster) for s in stitched]


async def select_target_image(
    session: GroundingSession,
    analyzed: AnalyzedQuery,
    query: str,
    stitched: Sequence[StitchedImage],
) -> ImageSelection:
    """Send the input prompt with every stitched composite attached."""
    if not stitched:
        raise ValueError("no stitched images to choose from")
    num_views = sum(len(s.cell_map) for s in stitched)
    if len(stitched) > session.backend.max_images_per_request:
        logger.warning(
            "Sending %d images, backend advertises at most %d per request",
            len(stitched), session.backend.max_images_per_request,
        )
    text = prompts.input_prompt(query, analyzed.target_class, analyzed.conditions, num_views)
    return await session.ask_json(text, ImageSelection, stitched_attachments(stitched))


async def reselect_target_image(session: GroundingSession, feedback_text: str) -> ImageSelection:
    """Append one feedback message and parse the new image choice."""
    return await session.ask_json(feedback_text, ImageSelection)


def candidate_attachment(frame_id: str, annotated: AnnotatedCandidates) -> ImageAttachment:
    return ImageAttachment(label=frame_id, pixels=resize_for_vlm(annotated.image))


async def select_object_id(
    session: GroundingSession,
    frame_id: str,
    annotated: AnnotatedCandidates,
    feedback_text: Optional[str] = None,
) -> ObjectSelection:
    """
    Ask for the object ID on the annotated frame.

    The first ask uses the selection prompt; a retry sends feedback_text with the image re-attached.
    """
    num_candidates = len(annotated.id_map)
    if num_candidates < 2:
        raise ValueError("object selection needs at least two candidates")
    text = feedback_text if feedback_text is not None else prompts.bbox_select_prompt(num_candidates)
    return await session.ask_json(text, ObjectSelection, [candidate_attachment(frame_id, annotated)])
