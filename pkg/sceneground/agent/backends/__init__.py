"""VLM backends and the factory that picks one from config."""
from typing import Mapping, Optional

from sceneground.agent.backends.base import VlmBackend
from sceneground.agent.backends.echo import EchoRetrievalBackend
from sceneground.agent.backends.http import HttpVlmBackend
from sceneground.agent.backends.scripted import (
    ScriptedVlmBackend,
    ScriptLibrary,
    load_script,
    scripted_backend,
)
from sceneground.config import BackendConfig
from sceneground.errors import ConfigError


def build_backend(
    config: BackendConfig,
    script_path: Optional[str] = None,
    truth: Optional[Mapping[str, str]] = None,
) -> VlmBackend:
    """
    Backend for config.kind.

    Args:
        config: Backend settings
        script_path: Overrides config.script_path for the scripted backend
        truth: item_id -> color, required by the echo backend
    """
    if config.kind == "http":
        return HttpVlmBackend(config)
    if config.kind == "scripted":
        path = script_path or config.script_path
        if not path:
            raise ConfigError("backend.kind = scripted needs a script path")
        return load_script(path, config.max_images_per_request)
    if config.kind == "echo":
        if truth is None:
            raise ConfigError("the echo backend only serves the retrieval benchmark")
        return EchoRetrievalBackend(truth, max_images_per_request=config.max_images_per_request)
    raise ConfigError(f"unknown backend kind {config.kind!r}")


__all__ = [
    "EchoRetrievalBackend",
    "HttpVlmBackend",
    "ScriptLibrary",
    "ScriptedVlmBackend",
    "VlmBackend",
    "build_backend",
    "load_script",
    "scripted_backend",
]
