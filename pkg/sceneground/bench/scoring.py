"""
Parsing and recall scoring of retrieval answers.
"""
import logging
import re
from typing import Any, List, Mapping, Optional, Sequence, Tuple

from pydantic import BaseModel

from sceneground.agent.parsing import extract_json_object
from sceneground.bench.suite import COLOR_NAMES, BenchItem
from sceneground.errors import ResponseFormatError

logger = logging.getLogger(__name__)

_WORD = re.compile(r"[a-z]+")


class RetrievalAnswer(BaseModel):
    """(item_id, color) pairs; colors are always vocabulary words."""

    pairs: List[Tuple[str, str]] = []


def normalize_color(raw: Any) -> Optional[str]:
    """
    Vocabulary color named in raw, case-insensitive, prose tolerated.
    None when no vocabulary word appears or more than one distinct one does.
    """
    words = {w for w in _WORD.findall(str(raw).lower()) if w in COLOR_NAMES}
    return words.pop() if len(words) == 1 else None


def normalize_item_id(raw: Any) -> Optional[str]:
    if isinstance(raw, bool):
        return None
    if isinstance(raw, int):
        return f"{raw:05d}" if raw >= 0 else None
    digits = str(raw).strip()
    return digits.zfill(5) if digits.isdigit() else None


def _lookup(payload: Mapping[str, Any], key: str) -> List[Any]:
    for name, value in payload.items():
        if name.lower() == key:
            return value if isinstance(value, list) else [value]
    raise ResponseFormatError(f"retrieval reply has no {key!r} list")


def parse_retrieval_answer(text: str) -> RetrievalAnswer:
    """
    Read the {"ids": [...], "colors": [...]} object out of a reply.
    Pairs whose id or color does not normalize are dropped.

    Raises:
        ResponseFormatError: no JSON object or a missing list
    """
    payload = extract_json_object(text)
    ids = _lookup(payload, "ids")
    colors = _lookup(payload, "colors")
    if len(ids) != len(colors):
        logger.warning("Retrieval reply lists differ in length (%d ids, %d colors)", len(ids), len(colors))

    pairs: List[Tuple[str, str]] = []
    for raw_id, raw_color in zip(ids, colors):
        item_id, color = normalize_item_id(raw_id), normalize_color(raw_color)
        if item_id is not None and color is not None:
            pairs.append((item_id, color))
    return RetrievalAnswer(pairs=pairs)


def retrieval_recall(truth: Mapping[str, str], answer: RetrievalAnswer) -> float:
    """
    Share of truth items for which at least one answered pair has the right id and color.

    Raises:
        ValueError: empty truth
    """
    if not truth:
        raise ValueError("cannot score against an empty ground truth")
    answered = set(answer.pairs)
    correct = sum(1 for item_id, color in truth.items() if (item_id, color) in answered)
    return correct / len(truth)


def score_retrieval(gt: Sequence[BenchItem], answer: RetrievalAnswer) -> float:
    return retrieval_recall({item.item_id: item.block_color for item in gt}, answer)
