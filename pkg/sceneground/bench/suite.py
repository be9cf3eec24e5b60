"""
Visual-retrieval benchmark suite: ID-annotated images each carrying one colored block.
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image
from pydantic import BaseModel, ConfigDict

from sceneground.errors import BenchError
from sceneground.stitching.render import ID_MARGIN, annotate_id, text_box

logger = logging.getLogger(__name__)

BLOCK_COLORS: Dict[str, Tuple[int, int, int]] = {
    "red": (255, 0, 0),
    "green": (0, 255, 0),
    "blue": (0, 0, 255),
    "yellow": (255, 255, 0),
    "white": (255, 255, 255),
    "black": (0, 0, 0),
}
COLOR_NAMES: Tuple[str, ...] = tuple(BLOCK_COLORS)
MAX_ITEMS = 1000
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

Rect = Tuple[int, int, int, int]


class BenchItem(BaseModel):
    """
    One benchmark image. block_rect is (x0, y0, x1, y1) with exclusive x1/y1.
    image already carries the red ID and the block.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    item_id: str
    image: np.ndarray
    block_color: str
    block_rect: Rect


def list_source_images(image_source: Union[str, Path]) -> List[Path]:
    root = Path(image_source)
    if not root.is_dir():
        raise BenchError(f"image source is not a directory: {root}")
    return sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def _synthetic_base(rng: np.random.Generator, size: Tuple[int, int]) -> np.ndarray:
    # Muted tone plus mild noise, so no pixel reads as a pure block color.
    width, height = size
    tone = rng.integers(64, 192, size=3)
    noise = rng.integers(-24, 25, size=(height, width, 3))
    return np.clip(tone + noise, 0, 255).astype(np.uint8)


def _load_base(path: Path, size: Tuple[int, int]) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB").resize(size, Image.Resampling.BILINEAR))
    except OSError as e:
        raise BenchError(f"could not read source image {path}: {e}") from e


def _place_block(rng: np.random.Generator, item_id: str, size: Tuple[int, int], block_fraction: float) -> Rect:
    width, height = size
    side = max(1, round(block_fraction * min(width, height)))
    if side > min(width, height):
        raise BenchError(f"block side {side} does not fit a {width}x{height} image")
    # Keep the block below the ID label when the image is tall enough.
    label_bottom = text_box(item_id, (ID_MARGIN, ID_MARGIN))[3] + ID_MARGIN
    y_min = label_bottom if label_bottom + side <= height else 0
    x0 = int(rng.integers(0, width - side + 1))
    y0 = int(rng.integers(y_min, height - side + 1))
    return x0, y0, x0 + side, y0 + side


def generate_suite(
    count: int,
    seed: int,
    image_source: Optional[Union[str, Path]] = None,
    image_size: Tuple[int, int] = (640, 480),
    block_fraction: float = 0.10,
) -> List[BenchItem]:
    """
    Build count items with IDs 00000.. in order.

    Args:
        count: Number of items (1..1000)
        seed: Seed for every random choice
        image_source: Directory of base images, or None for synthetic bases
        image_size: (width, height) every base image is brought to
        block_fraction: Block side as a fraction of the image's short side

    Raises:
        BenchError: count out of range or too few source images
    """
    if not 1 <= count <= MAX_ITEMS:
        raise BenchError(f"suite size must be in [1, {MAX_ITEMS}], got {count}")

    rng = np.random.default_rng(seed)
    sources: Optional[List[Path]] = None
    if image_source is not None:
        available = list_source_images(image_source)
        if len(available) < count:
            raise BenchError(f"insufficient source images in {image_source}: found {len(available)}, need {count}")
        order = rng.permutation(len(available))[:count]
        sources = [available[i] for i in order]

    items: List[BenchItem] = []
    for index in range(count):
        item_id = f"{index:05d}"
        base = _load_base(sources[index], image_size) if sources else _synthetic_base(rng, image_size)
        color = COLOR_NAMES[int(rng.integers(0, len(COLOR_NAMES)))]
        x0, y0, x1, y1 = _place_block(rng, item_id, image_size, block_fraction)

        image = base.copy()
        image[y0:y1, x0:x1] = BLOCK_COLORS[color]
        image = annotate_id(image, item_id)
        items.append(BenchItem(item_id=item_id, image=image, block_color=color, block_rect=(x0, y0, x1, y1)))

    logger.info("Generated retrieval suite: %d items, seed %d", count, seed)
    return items


def truth_map(items: Sequence[BenchItem]) -> Dict[str, str]:
    return {item.item_id: item.block_color for item in items}


def suite_manifest(items: Sequence[BenchItem]) -> Dict[str, Dict[str, object]]:
    """item_id -> {color, rect}."""
    return {item.item_id: {"color": item.block_color, "rect": list(item.block_rect)} for item in items}


def write_suite_images(items: Sequence[BenchItem], out_dir: Union[str, Path]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for item in items:
        Image.fromarray(item.image).save(out / f"{item.item_id}.png")
