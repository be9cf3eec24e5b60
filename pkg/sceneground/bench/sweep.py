"""
Layout sweep and request-timing harness for the visual-retrieval benchmark.
"""
import asyncio
import csv
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from sceneground.agent.backends.base import VlmBackend
from sceneground.agent.models import ChatMessage, ImageAttachment
from sceneground.agent.prompts import retrieval_prompt
from sceneground.bench.scoring import parse_retrieval_answer, retrieval_recall
from sceneground.bench.suite import BenchItem, truth_map
from sceneground.errors import BackendTransportError, BenchError, ResponseFormatError
from sceneground.stitching.planner import Layout
from sceneground.stitching.render import DEFAULT_CELL_SIZE, StitchedImage, resize_for_vlm, stitch

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ("layout_rows", "layout_cols", "images_per_request", "accuracy", "incomplete")
TIMING_COLUMNS = ("copies", "mean_s", "failed_trials")


@dataclass
class SweepRow:
    layout: Layout
    images_per_request: int
    accuracy: Optional[float]
    incomplete: int
    requests: int


@dataclass
class TimingRow:
    copies: int
    mean_s: Optional[float]
    failed_trials: int


# =============================================================================
# LAYOUT SWEEP
# =============================================================================

def build_requests(
    suite: Sequence[BenchItem],
    layout: Layout,
    images_per_request: int,
    cell_size: Tuple[int, int] = DEFAULT_CELL_SIZE,
) -> List[List[StitchedImage]]:
    """Fill composites in suite order, then group images_per_request composites per request."""
    capacity = layout.capacity
    composites = [
        stitch(
            [(item.item_id, item.image) for item in suite[start:start + capacity]],
            layout,
            cell_size,
            annotate=False,
        )
        for start in range(0, len(suite), capacity)
    ]
    return [composites[i:i + images_per_request] for i in range(0, len(composites), images_per_request)]


def retrieval_message(composites: Sequence[StitchedImage]) -> ChatMessage:
    attachments = [ImageAttachment(label=c.label, pixels=resize_for_vlm(c.raster)) for c in composites]
    return ChatMessage(role="user", text=retrieval_prompt(len(attachments)), images=attachments)


async def _score_request(
    composites: Sequence[StitchedImage],
    truth: Dict[str, str],
    backend: VlmBackend,
    semaphore: asyncio.Semaphore,
    timeout_s: float,
) -> Optional[float]:
    """Recall for one request, or None when the request did not complete."""
    request_truth = {fid: truth[fid] for c in composites for fid in c.frame_ids}
    message = retrieval_message(composites)
    async with semaphore:
        try:
            reply = await asyncio.wait_for(backend.chat([message]), timeout=timeout_s)
        except asyncio.TimeoutError:
            logger.warning("Retrieval request timed out after %.1fs (%s)", timeout_s, composites[0].label)
            return None
        except BackendTransportError as e:
            logger.warning("Retrieval request failed: %s", e)
            return None
    try:
        answer = parse_retrieval_answer(reply)
    except ResponseFormatError as e:
        logger.warning("Unreadable retrieval reply scored as 0: %s", e)
        return 0.0
    return retrieval_recall(request_truth, answer)


async def sweep_layout(
    suite: Sequence[BenchItem],
    layout: Layout,
    images_per_request: int,
    backend: VlmBackend,
    max_in_flight: int = 4,
    timeout_s: float = 120.0,
    cell_size: Tuple[int, int] = DEFAULT_CELL_SIZE,
) -> SweepRow:
    requests = build_requests(suite, layout, images_per_request, cell_size)
    truth = truth_map(suite)
    semaphore = asyncio.Semaphore(max_in_flight)
    scores = await asyncio.gather(
        *(_score_request(r, truth, backend, semaphore, timeout_s) for r in requests)
    )
    completed = [s for s in scores if s is not None]
    accuracy = float(np.mean(completed)) if completed else None
    row = SweepRow(
        layout=layout,
        images_per_request=images_per_request,
        accuracy=accuracy,
        incomplete=len(scores) - len(completed),
        requests=len(scores),
    )
    logger.info(
        "Layout %s x%d: accuracy=%s incomplete=%d/%d",
        layout, images_per_request, accuracy, row.incomplete, row.requests,
    )
    return row


async def run_layout_sweep(
    suite: Sequence[BenchItem],
    layouts: Sequence[Layout],
    images_per_request: int,
    backend: VlmBackend,
    max_in_flight: int = 4,
    timeout_s: float = 120.0,
    cell_size: Tuple[int, int] = DEFAULT_CELL_SIZE,
) -> List[SweepRow]:
    """
    Accuracy per layout: mean recall over the completed requests.
    Timed-out or unreachable requests count as incomplete and are left out of the mean.

    Raises:
        BenchError: empty suite or no layouts
    """
    if not suite:
        raise BenchError("retrieval suite is empty")
    if not layouts:
        raise BenchError("no layouts to sweep")
    if images_per_request < 1:
        raise BenchError(f"images_per_request must be >= 1, got {images_per_request}")
    if images_per_request > backend.max_images_per_request:
        logger.warning(
            "images_per_request=%d exceeds the backend's advisory limit of %d",
            images_per_request, backend.max_images_per_request,
        )
    rows = []
    for layout in layouts:
        rows.append(await sweep_layout(suite, layout, images_per_request, backend, max_in_flight, timeout_s, cell_size))
    return rows


# =============================================================================
# REQUEST TIMING
# =============================================================================

async def time_requests(
    image: np.ndarray,
    max_copies: int,
    trials: int,
    backend: VlmBackend,
    timeout_s: Optional[float] = None,
) -> List[TimingRow]:
    """
    Mean wall time of one request carrying k copies of image, for k = 1..max_copies.
    Requests run one at a time; failed trials are counted and left out of the mean.
    """
    if max_copies < 1 or trials < 1:
        raise BenchError(f"max_copies and trials must be >= 1, got {max_copies} and {trials}")

    pixels = resize_for_vlm(image)
    rows: List[TimingRow] = []
    for copies in range(1, max_copies + 1):
        attachments = [ImageAttachment(label=f"copy-{i}", pixels=pixels) for i in range(copies)]
        message = ChatMessage(role="user", text=retrieval_prompt(copies), images=attachments)
        durations: List[float] = []
        failed = 0
        for _ in range(trials):
            started = time.perf_counter()
            try:
                await asyncio.wait_for(backend.chat([message]), timeout=timeout_s)
            except (asyncio.TimeoutError, BackendTransportError) as e:
                failed += 1
                logger.warning("Timing trial with %d copies failed: %s", copies, str(e) or type(e).__name__)
                continue
            durations.append(time.perf_counter() - started)
        mean_s = float(np.mean(durations)) if durations else None
        rows.append(TimingRow(copies=copies, mean_s=mean_s, failed_trials=failed))
        logger.debug("copies=%d mean=%s failed=%d", copies, mean_s, failed)
    return rows


# =============================================================================
# CSV OUTPUT
# =============================================================================

def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.4f}"


def write_sweep_csv(rows: Sequence[SweepRow], path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([row.layout.rows, row.layout.cols, row.images_per_request, _fmt(row.accuracy), row.incomplete])


def write_timing_csv(rows: Sequence[TimingRow], path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TIMING_COLUMNS)
        for row in rows:
            writer.writerow([row.copies, "" if row.mean_s is None else f"{row.mean_s:.6f}", row.failed_trials])
