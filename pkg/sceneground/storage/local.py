"""
Local output-directory store.

Layout under <out>/:
    transcripts/<query_id>.json
    results/<query_id>.json
    timing/<query_id>.json
    masks/<query_id>.png
    results.jsonl
    manifest.json
"""
import asyncio
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Union

from sceneground.errors import IngestionError
from sceneground.scene.loader import write_mask_png
from sceneground.scene.models import Mask2D
from sceneground.storage.base import ResultStore

logger = logging.getLogger(__name__)

SUBDIRS = ("transcripts", "results", "timing", "masks")


def _dump_json(value: Any) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(value, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(path: Path, value: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(_dump_json(value), encoding="utf-8")
    os.replace(tmp, path)


def read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise IngestionError(f"could not read JSON ({e})", path) from e


class LocalResultStore(ResultStore):
    """Writes artifacts as files under one output directory."""

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)

    async def initialize(self) -> None:
        for sub in SUBDIRS:
            (self.out_dir / sub).mkdir(parents=True, exist_ok=True)

    async def _write(self, path: Path, value: Any) -> None:
        await asyncio.to_thread(write_json, path, value)

    async def save_transcript(self, query_id: str, transcript: Mapping[str, Any]) -> None:
        await self._write(self.out_dir / "transcripts" / f"{query_id}.json", dict(transcript))

    async def save_result(self, query_id: str, result: Mapping[str, Any]) -> None:
        await self._write(self.out_dir / "results" / f"{query_id}.json", dict(result))

    async def save_timing(self, query_id: str, timings: Mapping[str, float]) -> None:
        await self._write(self.out_dir / "timing" / f"{query_id}.json", dict(timings))

    async def save_mask(self, query_id: str, mask: Mask2D) -> None:
        await asyncio.to_thread(write_mask_png, mask, self.out_dir / "masks" / f"{query_id}.png")

    async def save_manifest(self, manifest: Mapping[str, Any]) -> None:
        await self._write(self.out_dir / "manifest.json", dict(manifest))

    async def load_results(self) -> List[Dict[str, Any]]:
        results_dir = self.out_dir / "results"
        if not results_dir.is_dir():
            return []
        paths = sorted(results_dir.glob("*.json"))
        return [read_json(p) for p in paths]

    async def write_results_index(self) -> int:
        results = sorted(await self.load_results(), key=lambda r: str(r.get("query_id", "")))
        lines = [json.dumps(r, sort_keys=True, ensure_ascii=False) for r in results]
        index = self.out_dir / "results.jsonl"
        await asyncio.to_thread(index.write_text, "".join(line + "\n" for line in lines), "utf-8")
        logger.info("Wrote %d results to %s", len(results), index)
        return len(results)

    async def health_check(self) -> bool:
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            marker = self.out_dir / ".health"
            marker.write_text("ok", encoding="utf-8")
            marker.unlink()
            return True
        except OSError:
            return False


def read_results_file(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """
    Read results from a results.jsonl file, a single result JSON, or an output directory.
    """
    path = Path(path)
    if path.is_dir():
        index = path / "results.jsonl"
        if index.is_file():
            path = index
        else:
            return [read_json(p) for p in sorted((path / "results").glob("*.json"))]
    if not path.is_file():
        raise IngestionError("results not found", path)
    if path.suffix == ".jsonl":
        records = []
        for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if line.strip():
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as e:
                    raise IngestionError(f"invalid JSON on line {line_no} ({e})", path) from e
        return records
    value = read_json(path)
    return value if isinstance(value, list) else [value]
