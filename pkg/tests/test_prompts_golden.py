"""Rendered prompts must match the checked-in golden texts exactly."""
from pathlib import Path

import pytest

from sceneground.agent import prompts

GOLDEN_DIR = Path(__file__).parent / "golden"


def golden(name: str) -> str:
    return (GOLDEN_DIR / f"{name}.txt").read_text(encoding="utf-8").rstrip("\n")


@pytest.mark.parametrize(
    "name, rendered",
    [
        ("query_analysis", lambda: prompts.query_analysis_prompt("this is a brown cabinet. it is to the right of a picture.")),
        ("grounding_system", prompts.grounding_system_prompt),
        (
            "input",
            lambda: prompts.input_prompt(
                "Find the black table that is surrounded by four chairs.",
                "table",
                ["it's black", "it's surrounded by four chairs"],
                6,
            ),
        ),
        ("bbox_select", lambda: prompts.bbox_select_prompt(3)),
        ("image_id_invalid", lambda: prompts.image_id_invalid_prompt("00007")),
        ("detection_not_exist", lambda: prompts.detection_not_exist_prompt("00040", "chair")),
        ("object_id_invalid", lambda: prompts.object_id_invalid_prompt(7, 3)),
        ("retrieval", lambda: prompts.retrieval_prompt(2)),
    ],
)
def test_prompt_matches_golden(name, rendered):
    assert rendered() == golden(name)


def test_empty_conditions_render_as_none():
    assert prompts.format_conditions([]) == "none"
    assert "Conditions: none" in prompts.input_prompt("the lamp", "lamp", [], 3)


def test_no_placeholder_survives_rendering():
    text = prompts.input_prompt("q", "chair", ["near the door"], 4)
    assert "{query}" not in text and "{pred_target_class}" not in text
