"""
Grounding-and-feedback loop as a LangGraph state machine.
Nodes: analyze -> preselect -> stitch -> select_image <-> check_image -> select_object <-> check_object.
"""
import logging
import time
from typing import Any, Dict, List, Optional, Tuple, TypedDict

from langgraph.graph import END, StateGraph

from sceneground.agent import prompts
from sceneground.agent.backends.base import VlmBackend
from sceneground.agent.grounding import (
    GroundingSession,
    analyze_query,
    reselect_target_image,
    select_object_id,
    select_target_image,
)
from sceneground.agent.models import (
    AgentTranscript,
    AnalyzedQuery,
    ChatMessage,
    Feedback,
    FeedbackKind,
    GroundingOutcome,
    ImageSelection,
    ObjectSelection,
)
from sceneground.config import PipelineConfig
from sceneground.errors import AnalysisError, PerceptionError, ResponseFormatError
from sceneground.perception.base import Perception
from sceneground.perception.models import Detection2D
from sceneground.perception.views import AnnotatedCandidates, annotate_candidates, detect_target, preselect_views
from sceneground.scene.models import Query, Scene
from sceneground.stitching.planner import plan_layouts
from sceneground.stitching.render import StitchedImage, stitch_frames

logger = logging.getLogger(__name__)

ROUTE_END = "end"


class GroundingState(TypedDict, total=False):
    """LangGraph state for one query."""

    # Inputs
    scene: Scene
    query: Query
    session: GroundingSession

    # Progress
    analyzed: Optional[AnalyzedQuery]
    analysis_messages: List[ChatMessage]
    preselected: List[str]
    stitched: List[StitchedImage]
    image_selection: Optional[ImageSelection]
    object_selection: Optional[ObjectSelection]
    target_frame_id: Optional[str]
    candidates: List[Detection2D]
    annotated: Optional[AnnotatedCandidates]

    # Feedback bookkeeping
    feedbacks: List[Feedback]
    retries_used: int
    pending_text: Optional[str]

    # Control
    route: str
    outcome: Optional[GroundingOutcome]
    timings: Dict[str, float]


def _timed(state: GroundingState, stage: str, started: float) -> Dict[str, float]:
    timings = dict(state.get("timings") or {})
    timings[stage] = timings.get(stage, 0.0) + (time.perf_counter() - started)
    return timings


class GroundingWorkflow:
    """
    Runs the grounding loop for queries of one configuration and perception bundle.

    Invalid selections append feedback and retry until M retries are spent; the
    outcome is then a failure. Transport errors propagate.
    """

    def __init__(self, config: PipelineConfig, perception: Perception):
        self.config = config
        self.perception = perception
        self._graph = None
        self._initialized = False

    def initialize(self) -> bool:
        """Compile the graph once."""
        if self._initialized:
            return True
        self._graph = self._build_graph()
        self._initialized = True
        logger.debug("Grounding workflow compiled (M=%d, L=%d)", self.config.M, self.config.L)
        return True

    @property
    def is_initialized(self) -> bool:
        return self._initialized

    @property
    def recursion_limit(self) -> int:
        # Fixed path plus two nodes per attempt in each of the two selection cycles.
        return 10 + 4 * (self.config.M + 1)

    def _build_graph(self):
        graph = StateGraph(GroundingState)
        graph.add_node("analyze", self._analyze)
        graph.add_node("preselect", self._preselect)
        graph.add_node("stitch", self._stitch)
        graph.add_node("select_image", self._select_image)
        graph.add_node("check_image", self._check_image)
        graph.add_node("select_object", self._select_object)
        graph.add_node("check_object", self._check_object)

        graph.set_entry_point("analyze")
        graph.add_conditional_edges("analyze", self._route, {"preselect": "preselect", ROUTE_END: END})
        graph.add_conditional_edges("preselect", self._route, {"stitch": "stitch", ROUTE_END: END})
        graph.add_edge("stitch", "select_image")
        graph.add_conditional_edges("select_image", self._route, {"check_image": "check_image", ROUTE_END: END})
        graph.add_conditional_edges(
            "check_image",
            self._route,
            {"select_image": "select_image", "select_object": "select_object", ROUTE_END: END},
        )
        graph.add_conditional_edges("select_object", self._route, {"check_object": "check_object", ROUTE_END: END})
        graph.add_conditional_edges("check_object", self._route, {"select_object": "select_object", ROUTE_END: END})
        return graph.compile()

    @staticmethod
    def _route(state: GroundingState) -> str:
        return state["route"]

    # =========================================================================
    # NODES
    # =========================================================================

    async def _analyze(self, state: GroundingState) -> Dict[str, Any]:
        started = time.perf_counter()
        backend = state["session"].backend
        try:
            analyzed, messages = await analyze_query(
                state["query"].text,
                backend,
                self.config.backend.transport_retries,
                self.config.backend.retry_base_delay_s,
            )
        except AnalysisError as e:
            logger.warning("Query %s: %s", state["query"].query_id, e)
            return {
                "outcome": GroundingOutcome.failure("analysis_failed"),
                "route": ROUTE_END,
                "timings": _timed(state, "query_analysis", started),
            }
        return {
            "analyzed": analyzed,
            "analysis_messages": messages,
            "route": "preselect",
            "timings": _timed(state, "query_analysis", started),
        }

    async def _preselect(self, state: GroundingState) -> Dict[str, Any]:
        started = time.perf_counter()
        views = await preselect_views(
            state["scene"],
            state["analyzed"].target_class,
            self.perception.preselector,
            self.config.detection_threshold,
        )
        update: Dict[str, Any] = {"preselected": views, "timings": _timed(state, "view_preselection", started)}
        if not views:
            update.update(outcome=GroundingOutcome.failure("no_views"), route=ROUTE_END)
        else:
            update["route"] = "stitch"
        return update

    async def _stitch(self, state: GroundingState) -> Dict[str, Any]:
        started = time.perf_counter()
        scene = state["scene"]
        views = state["preselected"]
        strategy = self.config.stitching.strategy
        plan = plan_layouts(len(views), self.config.L, views, strategy=strategy)
        if plan.soft_limit_exceeded:
            logger.warning(
                "%d views exceed the soft limit of %d stitched images (strategy %s)", len(views), self.config.L, strategy
            )
        images = {fid: scene.frame(fid).color for fid in views}
        stitched = stitch_frames(images, plan, tuple(self.config.cell_size))
        return {"stitched": stitched, "timings": _timed(state, "dynamic_stitching", started)}

    async def _select_image(self, state: GroundingState) -> Dict[str, Any]:
        started = time.perf_counter()
        session = state["session"]
        try:
            if state.get("pending_text"):
                selection = await reselect_target_image(session, state["pending_text"])
            else:
                selection = await select_target_image(
                    session, state["analyzed"], state["query"].text, state["stitched"]
                )
        except ResponseFormatError as e:
            logger.warning("Query %s: %s", state["query"].query_id, e)
            return {
                "pending_text": None,
                "outcome": GroundingOutcome.failure("malformed_reply"),
                "route": ROUTE_END,
                "timings": _timed(state, "image_selection", started),
            }
        return {
            "image_selection": selection,
            "pending_text": None,
            "route": "check_image",
            "timings": _timed(state, "image_selection", started),
        }

    def _feedback(self, state: GroundingState, feedback: Feedback, text: str, retry_node: str) -> Dict[str, Any]:
        retries = state.get("retries_used", 0)
        if retries >= self.config.M:
            logger.info("Query %s: retry limit %d reached", state["query"].query_id, self.config.M)
            return {"outcome": GroundingOutcome.failure("retry_limit"), "route": ROUTE_END}
        logger.info("Query %s: feedback %s for %s", state["query"].query_id, feedback.kind.value, feedback.referenced_id)
        return {
            "feedbacks": list(state.get("feedbacks") or []) + [feedback],
            "retries_used": retries + 1,
            "pending_text": text,
            "route": retry_node,
        }

    async def _check_image(self, state: GroundingState) -> Dict[str, Any]:
        started = time.perf_counter()
        image_id = state["image_selection"].target_image_id
        target_class = state["analyzed"].target_class

        if image_id not in state["preselected"]:
            update = self._feedback(
                state,
                Feedback(kind=FeedbackKind.IMAGE_INVALID, referenced_id=image_id),
                prompts.image_id_invalid_prompt(image_id),
                "select_image",
            )
            update["timings"] = _timed(state, "detection", started)
            return update

        frame = state["scene"].frame(image_id)
        try:
            candidates = await detect_target(frame, target_class, self.perception.detector, self.config.detection_threshold)
        except PerceptionError as e:
            logger.warning("Detector failed on frame %s: %s", image_id, e)
            candidates = []

        if not candidates:
            update = self._feedback(
                state,
                Feedback(kind=FeedbackKind.OBJECT_NOT_EXISTING, referenced_id=image_id),
                prompts.detection_not_exist_prompt(image_id, target_class),
                "select_image",
            )
            update["timings"] = _timed(state, "detection", started)
            return update

        update: Dict[str, Any] = {
            "target_frame_id": image_id,
            "candidates": candidates,
            "timings": _timed(state, "detection", started),
        }
        if len(candidates) == 1:
            update.update(
                outcome=GroundingOutcome(
                    status="success", target_frame_id=image_id, object_id=0, detection=candidates[0]
                ),
                route=ROUTE_END,
            )
        else:
            update.update(annotated=annotate_candidates(frame.color, candidates), route="select_object")
        return update

    async def _select_object(self, state: GroundingState) -> Dict[str, Any]:
        started = time.perf_counter()
        try:
            selection = await select_object_id(
                state["session"], state["target_frame_id"], state["annotated"], state.get("pending_text")
            )
        except ResponseFormatError as e:
            logger.warning("Query %s: %s", state["query"].query_id, e)
            return {
                "pending_text": None,
                "outcome": GroundingOutcome.failure("malformed_reply"),
                "route": ROUTE_END,
                "timings": _timed(state, "instance_selection", started),
            }
        return {
            "object_selection": selection,
            "pending_text": None,
            "route": "check_object",
            "timings": _timed(state, "instance_selection", started),
        }

    async def _check_object(self, state: GroundingState) -> Dict[str, Any]:
        object_id = state["object_selection"].object_id
        candidates = state["candidates"]
        if 0 <= object_id < len(candidates):
            return {
                "outcome": GroundingOutcome(
                    status="success",
                    target_frame_id=state["target_frame_id"],
                    object_id=object_id,
                    detection=candidates[object_id],
                ),
                "route": ROUTE_END,
            }
        return self._feedback(
            state,
            Feedback(kind=FeedbackKind.OBJECT_ID_INVALID, referenced_id=str(object_id)),
            prompts.object_id_invalid_prompt(object_id, len(candidates)),
            "select_object",
        )

    # =========================================================================
    # ENTRY POINT
    # =========================================================================

    async def run(self, scene: Scene, query: Query, backend: VlmBackend) -> Tuple[AgentTranscript, Dict[str, float]]:
        """Run the loop for one query; returns the transcript and per-stage seconds."""
        self.initialize()
        session = GroundingSession(
            backend,
            system_prompt=prompts.grounding_system_prompt(),
            transport_retries=self.config.backend.transport_retries,
            retry_base_delay_s=self.config.backend.retry_base_delay_s,
        )
        initial: GroundingState = {
            "scene": scene,
            "query": query,
            "session": session,
            "feedbacks": [],
            "retries_used": 0,
            "pending_text": None,
            "outcome": None,
            "timings": {},
        }
        final = await self._graph.ainvoke(initial, config={"recursion_limit": self.recursion_limit})
        return self._transcript(final), dict(final.get("timings") or {})

    @staticmethod
    def _transcript(state: Dict[str, Any]) -> AgentTranscript:
        return AgentTranscript(
            query_id=state["query"].query_id,
            query=state["query"].text,
            analyzed=state.get("analyzed"),
            analysis_messages=state.get("analysis_messages") or [],
            preselected_views=state.get("preselected") or [],
            stitched_images=[s.label for s in state.get("stitched") or []],
            messages=list(state["session"].messages),
            feedbacks=state.get("feedbacks") or [],
            retries_used=state.get("retries_used", 0),
            image_selection=state.get("image_selection"),
            object_selection=state.get("object_selection"),
            outcome=state.get("outcome") or GroundingOutcome.failure("incomplete"),
        )


async def run_grounding_loop(
    scene: Scene,
    query: Query,
    config: PipelineConfig,
    backend: VlmBackend,
    perception: Perception,
) -> AgentTranscript:
    """One-shot convenience wrapper around GroundingWorkflow."""
    transcript, _ = await GroundingWorkflow(config, perception).run(scene, query, backend)
    return transcript
