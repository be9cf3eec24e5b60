"""
Abstract base class for vision-language model backends.
Allows swapping between an HTTP chat endpoint, a scripted replay, or the retrieval echo.
"""
from abc import ABC, abstractmethod
from typing import Sequence

from sceneground.agent.models import ChatMessage


class VlmBackend(ABC):
    """
    Stateless chat interface: the caller carries the transcript and sends it whole.

    max_images_per_request is advisory; callers warn when they exceed it.
    """

    max_images_per_request: int = 10

    @abstractmethod
    async def chat(self, messages: Sequence[ChatMessage]) -> str:
        """
        Send the full message history and return the reply text.

        Raises:
            BackendTransportError: the backend could not be reached
            BackendTimeoutError: the backend did not answer in time
        """
        pass

    def for_query(self, query_id: str) -> "VlmBackend":
        """Backend view for one query. Default: the backend itself."""
        return self

    async def close(self) -> None:
        """Clean up resources. Default: nothing to release."""
