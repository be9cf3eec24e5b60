"""Shared fixtures: one rendered room scene per session and per-test fixture copies."""
from pathlib import Path

import pytest

from sceneground.config import PipelineConfig, ProjectionConfig
from tests.synthetic import SyntheticScene, room_scene


@pytest.fixture(scope="session")
def room() -> SyntheticScene:
    return room_scene()


@pytest.fixture
def pipeline_config() -> PipelineConfig:
    """Defaults except for what a 320x240 synthetic scene needs."""
    return PipelineConfig(
        frame_stride=1,
        projection=ProjectionConfig(erosion_kernel=3),
        backend={"kind": "scripted", "retry_base_delay_s": 0.0},
    )


@pytest.fixture
def out_dir(tmp_path: Path) -> Path:
    return tmp_path / "out"
