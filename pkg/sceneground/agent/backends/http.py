"""
OpenAI-compatible chat-completions backend.
Uses async HTTP calls with images attached as base64 PNG data URLs.
"""
import asyncio
import base64
import logging
import os
from typing import Any, Dict, List, Optional, Sequence

import aiohttp

from sceneground.agent.backends.base import VlmBackend
from sceneground.agent.models import ChatMessage
from sceneground.config import BackendConfig
from sceneground.errors import BackendTimeoutError, BackendTransportError, ConfigError
from sceneground.perception.http import encode_png

logger = logging.getLogger(__name__)


class HttpVlmBackend(VlmBackend):
    """
    Chat-completions client.

    One request per chat() call; retries belong to the caller. Concurrent calls are
    capped at config.max_in_flight.
    """

    def __init__(self, config: BackendConfig):
        api_key = os.environ.get(config.api_key_env)
        if not api_key:
            raise ConfigError(f"environment variable {config.api_key_env} is not set")

        self.config = config
        self.max_images_per_request = config.max_images_per_request
        self.url = f"{config.base_url.rstrip('/')}/chat/completions"
        self.headers = {
            "Authorization": f"Bearer {api_key}",
            "Content-Type": "application/json",
        }

        self._http_session: Optional[aiohttp.ClientSession] = None
        self._http_timeout = aiohttp.ClientTimeout(
            total=config.timeout_s,
            connect=15,
            sock_connect=15,
        )
        self._in_flight = asyncio.Semaphore(config.max_in_flight)

    async def _get_session(self) -> aiohttp.ClientSession:
        """Get or create HTTP session."""
        if self._http_session is None or self._http_session.closed:
            connector = aiohttp.TCPConnector(
                limit=max(self.config.max_in_flight, 1) * 2,
                keepalive_timeout=60,
                enable_cleanup_closed=True,
            )
            self._http_session = aiohttp.ClientSession(
                timeout=self._http_timeout,
                connector=connector,
            )
        return self._http_session

    @staticmethod
    def _content(message: ChatMessage) -> Any:
        if not message.images:
            return message.text
        parts: List[Dict[str, Any]] = [{"type": "text", "text": message.text}]
        for image in message.images:
            data = base64.b64encode(encode_png(image.pixels)).decode("ascii")
            parts.append({"type": "image_url", "image_url": {"url": f"data:image/png;base64,{data}"}})
        return parts

    def build_payload(self, messages: Sequence[ChatMessage]) -> Dict[str, Any]:
        return {
            "model": self.config.model,
            "messages": [{"role": m.role, "content": self._content(m)} for m in messages],
            "temperature": self.config.temperature,
            "top_p": self.config.top_p,
            "max_tokens": self.config.max_tokens,
        }

    async def chat(self, messages: Sequence[ChatMessage]) -> str:
        payload = self.build_payload(messages)
        async with self._in_flight:
            session = await self._get_session()
            try:
                async with session.post(self.url, headers=self.headers, json=payload) as response:
                    if response.status != 200:
                        body = await response.text()
                        raise BackendTransportError(f"chat API error {response.status}: {body[:500]}")
                    result = await response.json()
            except asyncio.TimeoutError as e:
                raise BackendTimeoutError(f"chat request timed out after {self.config.timeout_s}s") from e
            except aiohttp.ClientError as e:
                raise BackendTransportError(f"chat request failed: {e}") from e

        try:
            return result["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as e:
            raise BackendTransportError(f"unexpected chat API response shape: {result}") from e

    async def close(self) -> None:
        if self._http_session and not self._http_session.closed:
            await self._http_session.close()
