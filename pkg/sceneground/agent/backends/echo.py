"""
Echo backend for the retrieval benchmark: answers from ground truth.
"""
import json
from typing import Dict, List, Mapping, Sequence

from sceneground.agent.backends.base import VlmBackend
from sceneground.agent.models import ChatMessage

COLOR_ROTATION = ("red", "green", "blue", "yellow", "white", "black")


def _wrong_color(color: str) -> str:
    return COLOR_ROTATION[(COLOR_ROTATION.index(color) + 1) % len(COLOR_ROTATION)]


class EchoRetrievalBackend(VlmBackend):
    """
    Reads the item IDs from the labels of the attached images (comma-separated) and
    replies with their true colors. corrupt_per_request swaps the color of that many
    leading items in every reply.
    """

    def __init__(self, truth: Mapping[str, str], corrupt_per_request: int = 0, max_images_per_request: int = 10):
        self.truth: Dict[str, str] = dict(truth)
        self.corrupt_per_request = corrupt_per_request
        self.max_images_per_request = max_images_per_request
        self.requests = 0

    async def chat(self, messages: Sequence[ChatMessage]) -> str:
        self.requests += 1
        ids: List[str] = []
        for message in messages:
            for image in message.images:
                ids.extend(i for i in image.label.split(",") if i in self.truth)
        colors = [self.truth[i] for i in ids]
        for k in range(min(self.corrupt_per_request, len(colors))):
            colors[k] = _wrong_color(colors[k])
        return json.dumps({"ids": ids, "colors": colors})
