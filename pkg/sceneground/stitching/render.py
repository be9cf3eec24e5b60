"""
Rendering of ID-annotated grid composites and VLM-bound resizing.
"""
import logging
from functools import lru_cache
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw, ImageFont
from pydantic import BaseModel, ConfigDict

from sceneground.stitching.planner import Layout, StitchPlan

logger = logging.getLogger(__name__)

DEFAULT_CELL_SIZE: Tuple[int, int] = (512, 384)
BACKGROUND = (128, 128, 128)
ID_COLOR = (255, 0, 0)
ID_FONT_SIZE = 24
ID_MARGIN = 4
VLM_MAX_LONG_SIDE = 2048
VLM_MAX_SHORT_SIDE = 768


@lru_cache(maxsize=8)
def load_font(size: int) -> ImageFont.ImageFont:
    """Bundled scalable font at a fixed pixel size; bitmap default when FreeType is missing."""
    try:
        return ImageFont.load_default(size=size)
    except (TypeError, ImportError, OSError):
        logger.warning("Scalable default font unavailable, falling back to bitmap font")
        return ImageFont.load_default()


def text_box(text: str, origin: Tuple[int, int], font_size: int = ID_FONT_SIZE) -> Tuple[int, int, int, int]:
    """Pixel bounds (x0, y0, x1, y1) that draw_text would touch for this text."""
    scratch = ImageDraw.Draw(Image.new("RGB", (1, 1)))
    return scratch.textbbox(origin, text, font=load_font(font_size))


def draw_text(
    image: Image.Image,
    text: str,
    origin: Tuple[int, int],
    fill: Tuple[int, int, int],
    font_size: int = ID_FONT_SIZE,
    background: Tuple[int, int, int] = None,
) -> Tuple[int, int, int, int]:
    """Draw text with its top-left at origin; optional solid background box."""
    draw = ImageDraw.Draw(image)
    font = load_font(font_size)
    box = draw.textbbox(origin, text, font=font)
    if background is not None:
        draw.rectangle(box, fill=background)
    draw.text(origin, text, fill=fill, font=font)
    return box


def annotate_id(image: np.ndarray, frame_id: str, font_size: int = ID_FONT_SIZE) -> np.ndarray:
    """Red ID text at the top-left corner."""
    canvas = Image.fromarray(np.ascontiguousarray(image))
    draw_text(canvas, frame_id, (ID_MARGIN, ID_MARGIN), ID_COLOR, font_size)
    return np.asarray(canvas)


def letterbox(image: np.ndarray, cell_size: Tuple[int, int] = DEFAULT_CELL_SIZE) -> np.ndarray:
    """Fit image inside a (width, height) cell, preserving aspect, padding with background."""
    cell_w, cell_h = cell_size
    h, w = image.shape[:2]
    scale = min(cell_w / w, cell_h / h)
    new_w = max(1, min(cell_w, round(w * scale)))
    new_h = max(1, min(cell_h, round(h * scale)))
    resized = Image.fromarray(np.ascontiguousarray(image)).resize((new_w, new_h), Image.Resampling.BILINEAR)
    canvas = Image.new("RGB", (cell_w, cell_h), BACKGROUND)
    canvas.paste(resized, ((cell_w - new_w) // 2, (cell_h - new_h) // 2))
    return np.asarray(canvas)


class StitchedImage(BaseModel):
    """A rendered composite with its cell assignment."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    raster: np.ndarray
    layout: Layout
    cell_map: Tuple[Tuple[int, str], ...]

    @property
    def frame_ids(self) -> List[str]:
        return [frame_id for _, frame_id in self.cell_map]

    @property
    def label(self) -> str:
        return ",".join(self.frame_ids)


def cell_origin(index: int, layout: Layout, cell_size: Tuple[int, int] = DEFAULT_CELL_SIZE) -> Tuple[int, int]:
    """Top-left pixel of a cell; cells run left-to-right, top-to-bottom."""
    row, col = divmod(index, layout.cols)
    return col * cell_size[0], row * cell_size[1]


def stitch(
    frames: Sequence[Tuple[str, np.ndarray]],
    layout: Layout,
    cell_size: Tuple[int, int] = DEFAULT_CELL_SIZE,
    annotate: bool = True,
) -> StitchedImage:
    """
    Place letterboxed frames into a grid, row-major, and stamp each with its ID.

    Raises:
        ValueError: more frames than the layout holds
    """
    if len(frames) > layout.capacity:
        raise ValueError(f"{len(frames)} frames do not fit layout {layout} (capacity {layout.capacity})")

    cell_w, cell_h = cell_size
    canvas = Image.new("RGB", (cell_w * layout.cols, cell_h * layout.rows), BACKGROUND)
    cell_map = []
    for index, (frame_id, image) in enumerate(frames):
        cell = letterbox(image, cell_size)
        if annotate:
            cell = annotate_id(cell, frame_id)
        canvas.paste(Image.fromarray(cell), cell_origin(index, layout, cell_size))
        cell_map.append((index, frame_id))

    return StitchedImage(raster=np.asarray(canvas), layout=layout, cell_map=tuple(cell_map))


def resize_for_vlm(
    image: np.ndarray,
    max_long: int = VLM_MAX_LONG_SIDE,
    max_short: int = VLM_MAX_SHORT_SIDE,
) -> np.ndarray:
    """Uniformly downscale (never upscale) so the long side <= 2048 and the short side <= 768."""
    h, w = image.shape[:2]
    if h == 0 or w == 0:
        raise ValueError("cannot resize an empty image")
    long_side, short_side = max(w, h), min(w, h)
    scale = min(1.0, max_long / long_side, max_short / short_side)
    if scale >= 1.0:
        return image
    new_size = (max(1, round(w * scale)), max(1, round(h * scale)))
    return np.asarray(Image.fromarray(np.ascontiguousarray(image)).resize(new_size, Image.Resampling.LANCZOS))


def stitch_frames(
    images: Mapping[str, np.ndarray],
    plan: StitchPlan,
    cell_size: Tuple[int, int] = DEFAULT_CELL_SIZE,
    annotate: bool = True,
    for_vlm: bool = True,
) -> List[StitchedImage]:
    """Render every plan entry; with for_vlm the composites are passed through resize_for_vlm."""
    stitched: List[StitchedImage] = []
    for entry in plan.entries:
        composite = stitch([(fid, images[fid]) for fid in entry.frame_ids], entry.layout, cell_size, annotate)
        if for_vlm:
            composite = composite.model_copy(update={"raster": resize_for_vlm(composite.raster)})
        stitched.append(composite)
    return stitched


def plan_manifest(stitched: Sequence[StitchedImage], files: Sequence[str]) -> Dict[str, object]:
    """plan.json payload for the stitch command."""
    return {
        "entries": [
            {
                "file": name,
                "layout": [s.layout.rows, s.layout.cols],
                "cell_map": [[index, frame_id] for index, frame_id in s.cell_map],
            }
            for s, name in zip(stitched, files)
        ]
    }
