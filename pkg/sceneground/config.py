"""
Configuration module for the grounding pipeline.
Loads environment variables, an optional TOML/JSON file, and CLI overrides into typed settings.
"""
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from sceneground.errors import ConfigError

# Load .env file if it exists
load_dotenv()


class ProjectionConfig(BaseModel):
    """Multi-view ensemble projection parameters."""

    erosion_kernel: int = Field(15, ge=1)
    top_components: int = Field(2, ge=1)
    chamfer_threshold: float = Field(0.1, gt=0)
    outlier_nb: int = Field(5, ge=1)
    outlier_std_ratio: float = Field(1.0, ge=0)
    ensemble_n: int = Field(7, ge=1)
    # Ablation switches; all on for the full pipeline.
    morphology: bool = True
    filtering: bool = True
    ensemble: bool = True

    @field_validator("erosion_kernel")
    @classmethod
    def _odd_kernel(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("erosion_kernel must be odd")
        return value


class StitchingConfig(BaseModel):
    """Composite layout selection."""

    strategy: Literal["dynamic", "none", "fixed", "square"] = "dynamic"


class BackendConfig(BaseModel):
    """VLM backend selection. Credentials are referenced by env variable name only."""

    kind: Literal["http", "scripted", "echo"] = "http"
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4o-2024-05-13"
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.1
    top_p: float = 0.3
    max_tokens: int = 1024
    timeout_s: float = 120.0
    max_in_flight: int = Field(4, ge=1)
    max_images_per_request: int = Field(10, ge=1)
    script_path: Optional[str] = None
    transport_retries: int = Field(1, ge=0)
    retry_base_delay_s: float = Field(2.0, ge=0)


class PerceptionConfig(BaseModel):
    """Detector / segmenter / matcher selection."""

    kind: Literal["fixture", "http"] = "fixture"
    fixtures_root: Optional[str] = None
    detector_url: str = "http://localhost:8000"
    segmenter_url: str = "http://localhost:8000"
    matcher_url: str = "http://localhost:8000"
    timeout_s: float = 60.0


class BenchConfig(BaseModel):
    """Visual-retrieval benchmark settings."""

    layouts: List[Tuple[int, int]] = [(4, 1), (2, 4), (8, 2), (5, 5), (9, 3)]
    images_per_request: int = Field(1, ge=1)
    block_fraction: float = Field(0.10, gt=0, lt=1)
    image_size: Tuple[int, int] = (640, 480)
    timeout_s: float = 120.0


class PipelineConfig(BaseSettings):
    """Pipeline settings. Field names are the config-file keys."""

    # =============================================================
    # GROUNDING LOOP
    # =============================================================
    M: int = Field(3, ge=0, description="retry limit")
    L: int = Field(6, ge=1, description="soft stitched-image limit")
    N: int = Field(7, ge=1, description="ensemble image count")
    frame_stride: int = Field(20, ge=1)
    detection_threshold: float = Field(0.30, ge=0, le=1)

    # =============================================================
    # IMAGING
    # =============================================================
    depth_scale: float = Field(1000.0, gt=0)
    cell_size: Tuple[int, int] = (512, 384)

    stitching: StitchingConfig = StitchingConfig()
    projection: ProjectionConfig = ProjectionConfig()
    backend: BackendConfig = BackendConfig()
    perception: PerceptionConfig = PerceptionConfig()
    bench: BenchConfig = BenchConfig()

    # =============================================================
    # RUNTIME
    # =============================================================
    jobs: int = Field(1, ge=1)
    seed: int = 0
    debug: bool = False

    model_config = SettingsConfigDict(
        env_prefix="SCENEGROUND_",
        env_nested_delimiter="__",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    @model_validator(mode="after")
    def _sync_ensemble_size(self) -> "PipelineConfig":
        # N is authoritative; projection.ensemble_n mirrors it.
        if self.projection.ensemble_n != self.N:
            self.projection = self.projection.model_copy(update={"ensemble_n": self.N})
        return self

    def snapshot(self) -> Dict[str, Any]:
        """JSON-safe dump for run manifests."""
        return self.model_dump(mode="json")


def _deep_merge(base: Dict[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = _deep_merge(dict(merged[key]), value)
        else:
            merged[key] = value
    return merged


def _reject_inline_secrets(values: Mapping[str, Any], path: str = "") -> None:
    for key, value in values.items():
        where = f"{path}.{key}" if path else key
        if key.lower() in {"api_key", "token", "secret", "password"}:
            raise ConfigError(f"credentials must come from an environment variable, not the config file ({where})")
        if isinstance(value, Mapping):
            _reject_inline_secrets(value, where)


def read_config_file(path: Path) -> Dict[str, Any]:
    """Read a TOML or JSON config file into a plain dict."""
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        if path.suffix.lower() == ".toml":
            with path.open("rb") as fh:
                values = tomllib.load(fh)
        else:
            values = json.loads(path.read_text(encoding="utf-8"))
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"could not parse config file {path}: {e}") from e
    if not isinstance(values, dict):
        raise ConfigError(f"config file must hold a table/object: {path}")
    _reject_inline_secrets(values)
    return values


def load_config(
    path: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> PipelineConfig:
    """
    Build settings with precedence CLI flag > config file > environment > default.

    Args:
        path: Optional TOML or JSON file whose keys mirror PipelineConfig
        overrides: Values from CLI flags; None entries are ignored
    """
    values: Dict[str, Any] = read_config_file(path) if path else {}
    if overrides:
        values = _deep_merge(values, _drop_none(overrides))
    try:
        return PipelineConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e


def _drop_none(values: Mapping[str, Any]) -> Dict[str, Any]:
    cleaned: Dict[str, Any] = {}
    for key, value in values.items():
        if value is None:
            continue
        cleaned[key] = _drop_none(value) if isinstance(value, Mapping) else value
    return cleaned


@lru_cache()
def get_settings() -> PipelineConfig:
    """Get cached settings instance (environment and defaults only)."""
    return PipelineConfig()
