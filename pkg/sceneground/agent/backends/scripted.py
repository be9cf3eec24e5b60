"""
Scripted backend replaying canned replies, for tests and offline runs.

Script shapes (JSON):
    ["reply 0", {"json": "reply 1"}, ...]              replies by call index
    {"0": "reply 0", "1": ...}                          same, keyed by index
    {"<query_id>": [...], "<other query_id>": {...}}    one script per query
Entries: a string is returned verbatim, any other JSON value is returned serialized,
{"transport_error": true} raises a transport error and {"timeout": true} a timeout.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

from sceneground.agent.backends.base import VlmBackend
from sceneground.agent.models import ChatMessage
from sceneground.errors import BackendTimeoutError, BackendTransportError, ConfigError

logger = logging.getLogger(__name__)

Script = Union[Sequence[Any], Mapping[str, Any]]


def _is_index_keyed(script: Mapping[str, Any]) -> bool:
    return all(str(k).isdigit() for k in script)


def _as_list(script: Script) -> List[Any]:
    if isinstance(script, Mapping):
        return [script[k] for k in sorted(script, key=lambda k: int(k))]
    return list(script)


class ScriptedVlmBackend(VlmBackend):
    """Replies in call order. Every call's messages are recorded in calls."""

    def __init__(self, script: Script, max_images_per_request: int = 10):
        if isinstance(script, Mapping) and script and not _is_index_keyed(script):
            raise ConfigError("per-query scripts must be opened through ScriptLibrary.for_query")
        self.replies = _as_list(script)
        self.max_images_per_request = max_images_per_request
        self.calls: List[List[ChatMessage]] = []

    async def chat(self, messages: Sequence[ChatMessage]) -> str:
        index = len(self.calls)
        self.calls.append(list(messages))
        if index >= len(self.replies):
            raise BackendTransportError(f"script exhausted after {len(self.replies)} replies")

        entry = self.replies[index]
        if isinstance(entry, Mapping):
            if entry.get("transport_error"):
                raise BackendTransportError(f"scripted transport error at call {index}")
            if entry.get("timeout"):
                raise BackendTimeoutError(f"scripted timeout at call {index}")
        if isinstance(entry, str):
            return entry
        return json.dumps(entry)


class ScriptLibrary(VlmBackend):
    """Per-query scripts; for_query hands out a fresh ScriptedVlmBackend."""

    def __init__(self, scripts: Mapping[str, Script], max_images_per_request: int = 10):
        self.scripts = dict(scripts)
        self.max_images_per_request = max_images_per_request
        self.opened: Dict[str, ScriptedVlmBackend] = {}

    def for_query(self, query_id: str) -> VlmBackend:
        if query_id not in self.scripts:
            raise ConfigError(f"no script for query {query_id}")
        backend = ScriptedVlmBackend(self.scripts[query_id], self.max_images_per_request)
        self.opened[query_id] = backend
        return backend

    async def chat(self, messages: Sequence[ChatMessage]) -> str:
        raise ConfigError("a per-query script library must be opened with for_query")


def load_script(path: Union[str, Path], max_images_per_request: int = 10) -> VlmBackend:
    """Scripted backend from a JSON file; per-query files yield a ScriptLibrary."""
    path = Path(path)
    try:
        script = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"could not read script {path}: {e}") from e

    if isinstance(script, Mapping) and script and not _is_index_keyed(script):
        return ScriptLibrary(script, max_images_per_request)
    if not isinstance(script, (list, Mapping)):
        raise ConfigError(f"script must be a JSON array or object: {path}")
    return ScriptedVlmBackend(script, max_images_per_request)


def scripted_backend(script: Optional[Script], max_images_per_request: int = 10) -> VlmBackend:
    """In-memory counterpart of load_script."""
    script = script or []
    if isinstance(script, Mapping) and script and not _is_index_keyed(script):
        return ScriptLibrary(script, max_images_per_request)
    return ScriptedVlmBackend(script, max_images_per_request)
