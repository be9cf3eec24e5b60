"""
Prompt templates and their rendering.
Templates live in agent/templates/*.txt; placeholders are {name} and nothing else is substituted.
"""
from functools import lru_cache
from pathlib import Path
from typing import Sequence

TEMPLATE_DIR = Path(__file__).parent / "templates"

QUERY_ANALYSIS = "query_analysis"
GROUNDING_SYSTEM = "grounding_system"
INPUT = "input"
BBOX_SELECT = "bbox_select"
IMAGE_ID_INVALID = "image_id_invalid"
DETECTION_NOT_EXIST = "detection_not_exist"
OBJECT_ID_INVALID = "object_id_invalid"
JSON_REASK = "json_reask"
RETRIEVAL = "retrieval"


@lru_cache(maxsize=None)
def template(name: str) -> str:
    """Template text without its file's trailing newline."""
    return (TEMPLATE_DIR / f"{name}.txt").read_text(encoding="utf-8").rstrip("\n")


def render(name: str, **values: object) -> str:
    text = template(name)
    for key, value in values.items():
        text = text.replace("{" + key + "}", str(value))
    return text


def format_conditions(conditions: Sequence[str]) -> str:
    """Conditions joined by "; ", or "none"."""
    return "; ".join(conditions) if conditions else "none"


def query_analysis_prompt(query: str) -> str:
    return render(QUERY_ANALYSIS, query=query)


def grounding_system_prompt() -> str:
    return template(GROUNDING_SYSTEM)


def input_prompt(query: str, target_class: str, conditions: Sequence[str], num_views: int) -> str:
    return render(
        INPUT,
        query=query,
        pred_target_class=target_class,
        conditions=format_conditions(conditions),
        num_view_selections=num_views,
    )


def bbox_select_prompt(num_candidates: int) -> str:
    return render(BBOX_SELECT, num_candidate_bboxes=num_candidates)


def image_id_invalid_prompt(image_id: str) -> str:
    return render(IMAGE_ID_INVALID, image_id=image_id)


def detection_not_exist_prompt(image_id: str, target_class: str) -> str:
    return render(DETECTION_NOT_EXIST, image_id=image_id, pred_target_class=target_class)


def object_id_invalid_prompt(object_id: object, num_candidates: int) -> str:
    """One-sentence notice followed by the full object selection prompt."""
    return render(OBJECT_ID_INVALID, object_id=object_id) + "\n" + bbox_select_prompt(num_candidates)


def json_reask_prompt() -> str:
    return template(JSON_REASK)


def retrieval_prompt(num_images: int) -> str:
    return render(RETRIEVAL, num_images=num_images)
