"""
Dynamic stitching layout planner.
Packs n frames into grid composites chosen from (4, 1), (2, 4), (8, 2), (9, 3) under a soft image budget L.
The "none", "fixed" and "square" strategies are single-layout baselines for ablation runs.
"""
import math
from typing import List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field

from sceneground.scene.models import format_frame_id


class Layout(BaseModel):
    """Grid of rows x cols cells."""

    model_config = ConfigDict(frozen=True)

    rows: int = Field(ge=1)
    cols: int = Field(ge=1)

    @property
    def capacity(self) -> int:
        return self.rows * self.cols

    def __str__(self) -> str:
        return f"({self.rows}, {self.cols})"


LAYOUT_1 = Layout(rows=1, cols=1)
LAYOUT_4 = Layout(rows=4, cols=1)
LAYOUT_8 = Layout(rows=2, cols=4)
LAYOUT_16 = Layout(rows=8, cols=2)
LAYOUT_27 = Layout(rows=9, cols=3)

CANDIDATE_LAYOUTS: Tuple[Layout, ...] = (LAYOUT_4, LAYOUT_8, LAYOUT_16, LAYOUT_27)


class PlanEntry(BaseModel):
    """One stitched image: its layout and the frames placed in it, row-major."""

    model_config = ConfigDict(frozen=True)

    layout: Layout
    frame_ids: Tuple[str, ...]


class StitchPlan(BaseModel):
    """Composites ordered by ascending layout capacity."""

    model_config = ConfigDict(frozen=True)

    entries: Tuple[PlanEntry, ...] = ()
    soft_limit_exceeded: bool = False

    @property
    def image_count(self) -> int:
        return len(self.entries)

    @property
    def total_capacity(self) -> int:
        return sum(e.layout.capacity for e in self.entries)

    def layout_counts(self) -> List[Tuple[Layout, int]]:
        counts: List[Tuple[Layout, int]] = []
        for entry in self.entries:
            if counts and counts[-1][0] == entry.layout:
                counts[-1] = (entry.layout, counts[-1][1] + 1)
            else:
                counts.append((entry.layout, 1))
        return counts


def _ceil_div(numerator: int, denominator: int) -> int:
    # Counts below zero mean "no layouts of this size".
    return max(math.ceil(numerator / denominator), 0)


def _segments(n: int, limit: int, offset: int = 0) -> List[Tuple[Layout, int, int]]:
    """
    Half-open frame index ranges per layout, in the order the algorithm slices them.

    Every range is later cut into ceil(len / capacity) composites.
    """
    if n == 0:
        return []

    if n <= 4 * limit:
        return [(LAYOUT_4, offset, offset + n)]

    if n <= 8 * limit:
        n8 = _ceil_div(n - 4 * limit, 4)
        n4 = limit - n8
        cut = 4 * n4
        return [(LAYOUT_4, offset, offset + cut), (LAYOUT_8, offset + cut, offset + n)]

    if n <= 16 * limit:
        n16 = _ceil_div(n - 8 * limit, 8)
        remaining = max(n - 16 * n16, 0)
        n48 = limit - n16
        n8 = _ceil_div(remaining - 4 * n48, 4)
        n4 = n48 - n8
        cut4 = 4 * n4
        cut8 = cut4 + 8 * n8
        return [
            (LAYOUT_4, offset, offset + cut4),
            (LAYOUT_8, offset + cut4, offset + cut8),
            (LAYOUT_16, offset + cut8, offset + n),
        ]

    if n <= 27 * limit:
        # 11 = 27 - 16: each (9, 3) layout holds 11 more frames than an (8, 2).
        n27 = _ceil_div(n - 16 * limit, 11)
        n4816 = limit - n27
        remaining = max(n - 27 * n27, 0)
        n16 = _ceil_div(remaining - 8 * n4816, 8)
        n48 = n4816 - n16
        remaining = max(remaining - 16 * n16, 0)
        n8 = _ceil_div(remaining - 4 * n48, 4)
        n4 = n48 - n8
        cut4 = 4 * n4
        cut8 = cut4 + 8 * n8
        cut16 = cut8 + 16 * n16
        return [
            (LAYOUT_4, offset, offset + cut4),
            (LAYOUT_8, offset + cut4, offset + cut8),
            (LAYOUT_16, offset + cut8, offset + cut16),
            (LAYOUT_27, offset + cut16, offset + n),
        ]

    # Over budget: as many full (9, 3) composites as possible, remainder planned with limit 1.
    n27 = n // 27
    head = [(LAYOUT_27, offset, offset + 27 * n27)]
    return head + _segments(n - 27 * n27, 1, offset + 27 * n27)


def _chunks(n: int, soft_limit: int) -> List[Tuple[Layout, int, int]]:
    chunks: List[Tuple[Layout, int, int]] = []
    for layout, start, stop in _segments(n, soft_limit):
        for chunk_start in range(start, stop, layout.capacity):
            chunks.append((layout, chunk_start, min(chunk_start + layout.capacity, stop)))
    # Ascending layout size so only the largest layout may leave cells unused.
    chunks.sort(key=lambda c: (c[0].capacity, c[1]))
    return chunks


STRATEGIES: Tuple[str, ...] = ("dynamic", "none", "fixed", "square")


def _uniform_chunks(n: int, layout: Layout) -> List[Tuple[Layout, int, int]]:
    return [(layout, start, min(start + layout.capacity, n)) for start in range(0, n, layout.capacity)]


def square_layout(n: int, soft_limit: int) -> Layout:
    """Near-square grid with enough cells to fit n frames into at most soft_limit composites."""
    per_image = max(_ceil_div(n, soft_limit), 1)
    rows = math.ceil(math.sqrt(per_image))
    return Layout(rows=rows, cols=_ceil_div(per_image, rows))


def plan_layouts(
    n: int,
    soft_limit: int,
    frame_ids: Optional[Sequence[str]] = None,
    strategy: str = "dynamic",
) -> StitchPlan:
    """
    Plan composites for n frames under soft limit L.

    Args:
        n: Number of frames
        soft_limit: Maximum number of composites unless n > 27 * L
        frame_ids: Frames to place; defaults to 00000 .. n-1
        strategy: "dynamic" mixes the candidate layouts; "none" gives one frame per image,
            "fixed" always uses (8, 2) and "square" one near-square grid sized to stay within L

    Returns:
        StitchPlan with entries in ascending layout capacity
    """
    if n < 0:
        raise ValueError(f"frame count must be >= 0, got {n}")
    if soft_limit < 1:
        raise ValueError(f"soft limit must be >= 1, got {soft_limit}")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown stitching strategy {strategy!r}, expected one of {', '.join(STRATEGIES)}")
    if frame_ids is None:
        frame_ids = [format_frame_id(i) for i in range(n)]
    elif len(frame_ids) != n:
        raise ValueError(f"expected {n} frame ids, got {len(frame_ids)}")

    if strategy == "dynamic":
        chunks = _chunks(n, soft_limit)
    elif strategy == "none":
        chunks = _uniform_chunks(n, LAYOUT_1)
    elif strategy == "fixed":
        chunks = _uniform_chunks(n, LAYOUT_16)
    else:
        chunks = _uniform_chunks(n, square_layout(n, soft_limit))

    entries = tuple(
        PlanEntry(layout=layout, frame_ids=tuple(frame_ids[start:stop]))
        for layout, start, stop in chunks
    )
    exceeded = n > 27 * soft_limit if strategy == "dynamic" else len(entries) > soft_limit
    return StitchPlan(entries=entries, soft_limit_exceeded=exceeded)
