"""
Extraction of JSON objects from free-form VLM replies.
"""
import json
from typing import Any, Dict, Iterator, Type, TypeVar

from pydantic import BaseModel, ValidationError

from sceneground.errors import ResponseFormatError

ModelT = TypeVar("ModelT", bound=BaseModel)


def _balanced_spans(text: str) -> Iterator[str]:
    """Every top-level {...} span in order, honoring JSON string quoting."""
    depth = 0
    start = -1
    in_string = False
    escaped = False
    for i, ch in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"' and depth > 0:
            in_string = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}" and depth > 0:
            depth -= 1
            if depth == 0:
                yield text[start:i + 1]


def extract_json_object(text: str) -> Dict[str, Any]:
    """
    First balanced top-level JSON object in text.
    Code fences and surrounding prose are ignored.

    Raises:
        ResponseFormatError: no parseable object
    """
    for span in _balanced_spans(text):
        try:
            value = json.loads(span)
        except json.JSONDecodeError:
            continue
        if isinstance(value, dict):
            return value
    raise ResponseFormatError(f"no JSON object in reply: {text[:200]!r}")


def parse_reply(text: str, model: Type[ModelT]) -> ModelT:
    """Extract the JSON object and validate it against model."""
    payload = extract_json_object(text)
    try:
        return model.model_validate(payload)
    except ValidationError as e:
        raise ResponseFormatError(f"reply does not match {model.__name__}: {e}") from e
