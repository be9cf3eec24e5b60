"""Dynamic stitching: layout planning and composite rendering."""
from sceneground.stitching.planner import (
    CANDIDATE_LAYOUTS,
    Layout,
    PlanEntry,
    STRATEGIES,
    StitchPlan,
    plan_layouts,
    square_layout,
)
from sceneground.stitching.render import (
    StitchedImage,
    letterbox,
    resize_for_vlm,
    stitch,
    stitch_frames,
)

__all__ = [
    "CANDIDATE_LAYOUTS",
    "Layout",
    "PlanEntry",
    "STRATEGIES",
    "StitchPlan",
    "StitchedImage",
    "letterbox",
    "plan_layouts",
    "resize_for_vlm",
    "square_layout",
    "stitch",
    "stitch_frames",
]
