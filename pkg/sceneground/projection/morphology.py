"""
Binary mask morphology: erosion, largest connected components, resampling.
"""
import numpy as np
from scipy import ndimage

from sceneground.scene.models import Mask2D

# 8-connectivity
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def erode_mask(mask: Mask2D, kernel: int) -> Mask2D:
    """
    Binary erosion with a kernel x kernel square. Pixels outside the raster count as false,
    so an all-true 15x15 mask eroded with kernel 15 keeps only its center pixel.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise ValueError(f"erosion kernel must be odd and >= 1, got {kernel}")
    if kernel == 1:
        return mask
    structure = np.ones((kernel, kernel), dtype=bool)
    eroded = ndimage.binary_erosion(mask.bitmap, structure=structure, border_value=0)
    return mask.with_bitmap(eroded)


def top_components(mask: Mask2D, k: int) -> Mask2D:
    """
    Keep the k largest 8-connected components.

    Equal sizes are ordered by the component's first pixel in row-major order.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if mask.is_empty:
        return mask

    labels, count = ndimage.label(mask.bitmap, structure=EIGHT_CONNECTED)
    if count <= k:
        return mask

    sizes = np.bincount(labels.ravel())[1:]
    # ndimage.label numbers components in row-major order of their first pixel.
    order = sorted(range(count), key=lambda i: (-int(sizes[i]), i))
    keep = np.array([i + 1 for i in order[:k]])
    return mask.with_bitmap(np.isin(labels, keep))


def resample_mask_nearest(mask: Mask2D, width: int, height: int) -> Mask2D:
    """Nearest-neighbor resample to width x height, sampling source pixel centers."""
    src_h, src_w = mask.shape
    if (src_w, src_h) == (width, height):
        return mask
    rows = np.minimum(((np.arange(height) + 0.5) * src_h / height).astype(np.int64), src_h - 1)
    cols = np.minimum(((np.arange(width) + 0.5) * src_w / width).astype(np.int64), src_w - 1)
    return mask.with_bitmap(mask.bitmap[np.ix_(rows, cols)])
